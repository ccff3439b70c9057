#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "regfuse/geometry.hpp"
#include "regfuse/rng.hpp"

namespace regfuse {

class KdTree;

struct RegistrationResult {
    RigidTransform transform;
    /// overlap_ratio of the source under `transform` at the configured tau.
    double overlap = 0.0;
    /// Recoverable problems hit on the way, e.g. "coarse_degenerate",
    /// "fmr_degenerate", "kabsch_degenerate", "ransac_degenerate".
    std::set<std::string> degenerate_flags;
    /// One trimmed alignment residual per refinement iteration.
    std::vector<double> per_iteration_residuals;
};

struct PipelineAConfig {
    int refine_iterations = 2;
    /// Matching rounds inside each refinement iteration; the spatial
    /// bandwidth shrinks geometrically across all rounds.
    int inner_steps = 5;
    double keep_fraction = 0.7;
    double sigma = 0.05;
    double tau = 0.05;
    double ratio = 0.9;
    bool require_mutual = true;
    bool use_fmr = true;
    double temperature = 0.02;
    double descriptor_radius = 0.3;
    double normal_radius = 0.15;
    /// Spatial kernel bandwidth at the first and the last matching round.
    double bandwidth_start = 0.1;
    double bandwidth_end = 0.01;
    /// The final matching round uses hard (argmax) assignments.
    bool hard_final_step = true;
    /// Global feature step: descriptor-only matching at `global_temperature`
    /// pruned by the pairwise rigidity filter with tolerance
    /// `consistency_eps`.
    /// Its pose competes with the coarse pose as a refinement start.
    bool global_step = true;
    double global_temperature = 1e-4;
    double consistency_eps = 0.05;
};

void validate(const PipelineAConfig& cfg);

/// Coarse principal-axes alignment followed by `refine_iterations` rounds of
/// overlap scoring, representative selection, partial-to-complete soft
/// matching, feature-matching removal and weighted Kabsch. The refinement
/// runs from the coarse pose and from the global feature pose; the result
/// with the lower trimmed residual wins. Degenerate steps are recorded as
/// flags and skipped; the run never throws on geometry.
///
/// The pipeline is deterministic; `seed` is accepted for interface symmetry
/// with the sampling-based pipeline and does not affect the result.
RegistrationResult register_a(const PointCloud& src, const PointCloud& tgt, const PipelineAConfig& cfg,
                              RngSeed seed = {});

/// (T1, T2): source to target and target to source, solved independently.
std::pair<RegistrationResult, RegistrationResult> register_a_bidirectional(const PointCloud& src,
                                                                           const PointCloud& tgt,
                                                                           const PipelineAConfig& cfg,
                                                                           RngSeed seed = {});

/// Mean squared nearest-target distance over the `keep_fraction` closest
/// transformed source points.
double trimmed_residual(const PointCloud& src, const KdTree& tgt_index, const RigidTransform& t,
                        double keep_fraction);

}  // namespace regfuse
