#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "regfuse/geometry.hpp"

namespace regfuse {

struct FusionThresholds {
    double d1 = 15.0;  // degrees, max rotation disagreement between T1 and T2⁻¹
    double d2 = 60.0;  // degrees, max rotation angle of T1
    double d3 = 0.3;   // min overlap OL1
    double d4 = 0.05;  // overlap slack in favor of T1
    /// Overlap distance threshold for this category; unset means the run's tau.
    std::optional<double> tau;
};

void validate(const FusionThresholds& th);

struct FusionInput {
    RigidTransform t1;  // model A, source to target
    RigidTransform t2;  // model A, target to source
    RigidTransform t3;  // model B, source to target
    double ol1 = 0.0;
    double ol3 = 0.0;
};

enum class Model { A, B };

struct FusionDecision {
    Model chosen = Model::B;
    RigidTransform transform;
    bool l1 = false;
    bool l2 = false;
    bool l3 = false;
    bool l4 = false;
    double rot_consistency_deg = 0.0;
    double angle_r1_deg = 0.0;
    double ol1 = 0.0;
    double ol3 = 0.0;
};

/// T1 and T2 agree: the rotation error between R1 and R2ᵀ is below d1.
bool rule_l1(const RigidTransform& t1, const RigidTransform& t2, double d1);
/// The rotation angle of R1 is below d2.
bool rule_l2(const RigidTransform& t1, double d2);
/// Model A's overlap is adequate: OL1 ≥ d3.
bool rule_l3(double ol1, double d3);
/// OL1 + d4 > OL3.
bool rule_l4(double ol1, double ol3, double d4);

/// The boolean core: (l1 ∧ l2 ∧ l3) ∨ l4 selects model A.
inline bool fusion_predicate(bool l1, bool l2, bool l3, bool l4) { return (l1 && l2 && l3) || l4; }

FusionDecision fuse(const FusionInput& in, const FusionThresholds& th);

/// Per-category thresholds with a fallback record.
class ThresholdTable {
public:
    ThresholdTable() = default;
    explicit ThresholdTable(FusionThresholds fallback) : fallback_(fallback) {}

    const FusionThresholds& lookup(int category) const;
    const FusionThresholds& fallback() const { return fallback_; }
    void set(int category, const FusionThresholds& th);
    void set_fallback(const FusionThresholds& th);
    const std::map<int, FusionThresholds>& entries() const { return by_category_; }

private:
    FusionThresholds fallback_{};
    std::map<int, FusionThresholds> by_category_;
};

/// Line format: `<category_id|default> d1 d2 d3 d4 [tau]`; '#' starts a
/// comment line. Throws FormatError with the offending line number.
ThresholdTable read_thresholds(std::istream& in);
ThresholdTable read_thresholds(const std::string& path);

inline constexpr const char* kDecisionCsvHeader =
    "pair_id,l1,l2,l3,l4,chosen,rot_consistency_deg,angle_r1_deg,ol1,ol3";

std::string decision_csv_row(const std::string& pair_id, const FusionDecision& d);

}  // namespace regfuse
