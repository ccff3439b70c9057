#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "regfuse/geometry.hpp"
#include "regfuse/pipeline_a.hpp"
#include "regfuse/rng.hpp"

namespace regfuse {

class KdTree;

enum class RansacObjective {
    /// Number of hard correspondences within inlier_tau.
    InlierCount,
    /// Fraction of the whole source landing within inlier_tau of the target,
    /// the overlap-driven criterion that prefers high-overlap poses.
    OverlapFitness,
};

struct RansacConfig {
    std::size_t max_iterations = 100000;
    std::size_t sample_size = 3;
    double inlier_tau = 0.05;
    RansacObjective objective = RansacObjective::InlierCount;
    double source_keep_fraction = 0.7;
    RngSeed seed{};
    double descriptor_radius = 0.3;
    double normal_radius = 0.15;
    /// Overlap-score length scale used when filtering the source.
    double sigma = 0.05;
    /// Stop once the best hypothesis explains more than this fraction of the
    /// correspondences. Values above 1 disable the early exit.
    double early_exit_ratio = 0.95;
    /// Reject samples whose source and target edge lengths differ by more
    /// than this ratio before solving. 0 disables the check.
    double edge_similarity = 0.9;
    /// Distance threshold for the reported overlap.
    double tau = 0.05;
    /// Hard matches must be mutual nearest neighbors in descriptor space;
    /// otherwise every kept source point takes its nearest target feature.
    bool mutual = true;
    /// After the correspondence re-fit, polish against nearest target points
    /// with robust weights 1/(1 + d²/c²)², c = polish_scale, for up to this
    /// many rounds. 0 disables.
    int geometric_rounds = 100;
    double polish_scale = 0.03;
    unsigned workers = 1;
};

void validate(const RansacConfig& cfg);

/// A hard putative pairing: source point index to target point index.
struct IndexPair {
    std::size_t source = 0;
    std::size_t target = 0;
};

struct HypothesisScore {
    std::size_t inlier_count = 0;
    /// inlier_count over the source size.
    double fitness = 0.0;
    /// Fraction of all source points within inlier_tau of the target; only
    /// computed for the OverlapFitness objective, 0 otherwise.
    double overlap = 0.0;
};

/// Scores T against the correspondences. `tgt_index` (over `tgt`) is needed
/// only for the overlap objective and may be null otherwise.
HypothesisScore score_hypothesis(const RigidTransform& t, const PointCloud& src, const PointCloud& tgt,
                                 std::span<const IndexPair> corr, const RansacConfig& cfg,
                                 const KdTree* tgt_index = nullptr);

/// Descriptor RANSAC with partial-to-complete filtering: the source keeps
/// only its `source_keep_fraction` best overlap-scored points after coarse
/// alignment, the target is used whole. Hard correspondences are mutual
/// nearest neighbors in descriptor space.
RegistrationResult ransac_register(const PointCloud& src, const PointCloud& tgt, const RansacConfig& cfg);

/// The RANSAC core on given correspondences, without filtering or
/// descriptors. Iteration i draws its sample from a stream derived from
/// (seed, i), so results do not depend on `workers`.
RegistrationResult ransac_on_correspondences(const PointCloud& src, const PointCloud& tgt,
                                             std::span<const IndexPair> corr, const RansacConfig& cfg);

}  // namespace regfuse
