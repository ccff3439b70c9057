#include "regfuse/pipeline_a.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "regfuse/alignment.hpp"
#include "regfuse/correspondence.hpp"
#include "regfuse/error.hpp"
#include "regfuse/nn_index.hpp"

namespace regfuse {

void validate(const PipelineAConfig& cfg) {
    if (cfg.refine_iterations < 1) throw InvalidInput("refine_iterations must be at least 1");
    if (cfg.inner_steps < 1) throw InvalidInput("inner_steps must be at least 1");
    if (!(cfg.keep_fraction > 0.0 && cfg.keep_fraction <= 1.0)) throw InvalidInput("keep_fraction must lie in (0, 1]");
    if (!(cfg.sigma > 0.0)) throw InvalidInput("sigma must be positive");
    if (!(cfg.tau > 0.0)) throw InvalidInput("tau must be positive");
    if (!(cfg.ratio > 0.0 && cfg.ratio < 1.0)) throw InvalidInput("ratio must lie in (0, 1)");
    if (!(cfg.temperature > 0.0)) throw InvalidInput("temperature must be positive");
    if (!(cfg.descriptor_radius > 0.0)) throw InvalidInput("descriptor_radius must be positive");
    if (!(cfg.normal_radius > 0.0)) throw InvalidInput("normal_radius must be positive");
    if (!(cfg.bandwidth_start > 0.0 && cfg.bandwidth_end > 0.0)) throw InvalidInput("bandwidths must be positive");
    if (!(cfg.global_temperature > 0.0)) throw InvalidInput("global_temperature must be positive");
    if (!(cfg.consistency_eps > 0.0)) throw InvalidInput("consistency_eps must be positive");
}

double trimmed_residual(const PointCloud& src, const KdTree& tgt_index, const RigidTransform& t,
                        double keep_fraction) {
    std::vector<double> d;
    d.reserve(src.size());
    for (const auto& p : src) d.push_back(tgt_index.nearest(t(p)).sq_distance);
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(d.size()) - 1e-9)));
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(keep - 1), d.end());
    std::sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(keep));
    double sum = 0.0;
    for (std::size_t i = 0; i < keep; ++i) sum += d[i];
    return sum / static_cast<double>(keep);
}

namespace {

constexpr double kHardTemperature = 1e-12;

// Annealed refinement loop shared by every starting pose.
class Refiner {
public:
    Refiner(const PointCloud& src, const PointCloud& tgt, const KdTree& tgt_index, const PipelineAConfig& cfg)
        : src_(src),
          tgt_(tgt),
          tgt_index_(tgt_index),
          cfg_(cfg),
          src_desc_(compute_descriptors(src, cfg.descriptor_radius, cfg.normal_radius)),
          tgt_desc_(compute_descriptors(tgt, cfg.descriptor_radius, cfg.normal_radius)) {}

    RegistrationResult run(const RigidTransform& start) const {
        RegistrationResult out;
        RigidTransform current = start;
        const int total_steps = cfg_.refine_iterations * cfg_.inner_steps;
        const double decay =
            total_steps > 1 ? std::pow(cfg_.bandwidth_end / cfg_.bandwidth_start, 1.0 / (total_steps - 1)) : 1.0;
        const double root_t = std::sqrt(cfg_.temperature);
        int step = 0;
        for (int it = 0; it < cfg_.refine_iterations; ++it) {
            for (int inner = 0; inner < cfg_.inner_steps; ++inner, ++step) {
                const double bandwidth = cfg_.bandwidth_start * std::pow(decay, step);
                // With this scale the spatial part of the softmax logit is
                // −‖Δx‖²/(2·bandwidth²).
                // The last round takes the argmax of each softmax row: soft
                // averaging leaves a small bias even on exact copies.
                const bool hard = cfg_.hard_final_step && step == total_steps - 1;
                current = this->step(current, bandwidth / root_t, hard ? kHardTemperature : cfg_.temperature,
                                     out.degenerate_flags);
            }
            out.per_iteration_residuals.push_back(trimmed_residual(src_, tgt_index_, current, cfg_.keep_fraction));
        }
        out.transform = current;
        return out;
    }

    /// Pose from descriptor matches alone, independent of any start pose.
    std::optional<RigidTransform> global_pose(std::set<std::string>& flags) const {
        const RowMatrix dist = feature_sq_distances(src_desc_, tgt_desc_);
        CorrespondenceSet corr = match_partial_to_complete(src_desc_, tgt_desc_, tgt_, cfg_.global_temperature, dist);
        try {
            corr = consistency_filter(src_, corr, cfg_.consistency_eps);
            return weighted_kabsch(src_, corr);
        } catch (const DegenerateSet&) {
            flags.insert("global_degenerate");
        } catch (const DegenerateGeometry&) {
            flags.insert("global_degenerate");
        } catch (const InvalidWeights&) {
            flags.insert("global_degenerate");
        }
        return std::nullopt;
    }

private:
    RigidTransform step(const RigidTransform& current, double scale, double temperature,
                        std::set<std::string>& flags) const {
        const PointCloud aligned = apply_transform(src_, current);
        const auto scores = overlap_scores(aligned, tgt_index_, cfg_.sigma);
        const auto rows = select_representative(scores, cfg_.keep_fraction);

        const FeatureSet src_sel = src_desc_.subset(rows).with_positions(aligned, scale);
        const FeatureSet tgt_all = tgt_desc_.with_positions(tgt_, scale);
        const RowMatrix dist = feature_sq_distances(src_sel, tgt_all);
        CorrespondenceSet corr = match_partial_to_complete(src_sel, tgt_all, tgt_, temperature, dist);
        if (cfg_.use_fmr) {
            try {
                corr = fmr_filter(corr, src_sel, dist, cfg_.ratio, cfg_.require_mutual);
            } catch (const DegenerateSet&) {
                // Too few survivors: keep this round's unfiltered set.
                flags.insert("fmr_degenerate");
            }
        }
        try {
            return compose(weighted_kabsch(aligned, corr), current);
        } catch (const DegenerateGeometry&) {
            flags.insert("kabsch_degenerate");
        } catch (const InvalidWeights&) {
            flags.insert("kabsch_degenerate");
        }
        return current;
    }

    const PointCloud& src_;
    const PointCloud& tgt_;
    const KdTree& tgt_index_;
    const PipelineAConfig& cfg_;
    FeatureSet src_desc_;
    FeatureSet tgt_desc_;
};

}  // namespace

RegistrationResult register_a(const PointCloud& src, const PointCloud& tgt, const PipelineAConfig& cfg, RngSeed) {
    validate(cfg);
    if (src.size() < 10 || tgt.size() < 10) throw InvalidInput("registration needs at least 10 points per cloud");

    const KdTree tgt_index(tgt);
    const CoarseAlignment coarse = coarse_align(src, tgt);
    const Refiner refiner(src, tgt, tgt_index, cfg);

    std::set<std::string> flags;
    std::vector<RigidTransform> starts{coarse.transform};
    if (cfg.global_step) {
        if (auto pose = refiner.global_pose(flags)) starts.push_back(*pose);
    }

    RegistrationResult best;
    double best_residual = 0.0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        RegistrationResult r = refiner.run(starts[i]);
        const double res = r.per_iteration_residuals.back();
        if (i == 0 || res < best_residual) {
            best = std::move(r);
            best_residual = res;
        }
    }
    best.degenerate_flags.insert(flags.begin(), flags.end());
    if (coarse.degenerate) best.degenerate_flags.insert("coarse_degenerate");
    best.overlap = overlap_ratio(src, tgt_index, best.transform, cfg.tau);
    return best;
}

std::pair<RegistrationResult, RegistrationResult> register_a_bidirectional(const PointCloud& src,
                                                                           const PointCloud& tgt,
                                                                           const PipelineAConfig& cfg,
                                                                           RngSeed seed) {
    return {register_a(src, tgt, cfg, seed), register_a(tgt, src, cfg, seed)};
}

}  // namespace regfuse
