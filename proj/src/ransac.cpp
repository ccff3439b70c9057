#include "regfuse/ransac.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <thread>

#include "regfuse/alignment.hpp"
#include "regfuse/correspondence.hpp"
#include "regfuse/error.hpp"
#include "regfuse/nn_index.hpp"

namespace regfuse {
namespace {

constexpr std::size_t kChunk = 4096;

struct Candidate {
    bool valid = false;
    std::size_t iteration = 0;
    RigidTransform transform;
    std::size_t inliers = 0;
    double value = 0.0;
};

// Higher objective wins; equal objectives go to the earlier iteration.
bool better(const Candidate& a, const Candidate& b) {
    if (!a.valid) return false;
    if (!b.valid) return true;
    if (a.value != b.value) return a.value > b.value;
    return a.iteration < b.iteration;
}

std::size_t count_inliers(const RigidTransform& t, const PointCloud& src, const PointCloud& tgt,
                          std::span<const IndexPair> corr, double tau2) {
    std::size_t n = 0;
    for (const auto& c : corr) {
        if ((t(src[c.source]) - tgt[c.target]).squaredNorm() <= tau2) ++n;
    }
    return n;
}

double source_overlap(const RigidTransform& t, const PointCloud& src, const KdTree& tgt_index, double tau2) {
    std::size_t n = 0;
    for (const auto& p : src) {
        if (tgt_index.nearest(t(p)).sq_distance <= tau2) ++n;
    }
    return static_cast<double>(n) / static_cast<double>(src.size());
}

// Draws three distinct correspondence positions.
std::array<std::size_t, 3> draw_sample(SplitMixStream& stream, std::size_t m) {
    const auto a = static_cast<std::size_t>(stream.below(m));
    auto b = static_cast<std::size_t>(stream.below(m - 1));
    if (b >= a) ++b;
    auto c = static_cast<std::size_t>(stream.below(m - 2));
    const auto lo = std::min(a, b);
    const auto hi = std::max(a, b);
    if (c >= lo) ++c;
    if (c >= hi) ++c;
    return {a, b, c};
}

class Searcher {
public:
    Searcher(const PointCloud& src, const PointCloud& tgt, std::span<const IndexPair> corr, const RansacConfig& cfg,
             const KdTree* tgt_index)
        : src_(src), tgt_(tgt), corr_(corr), cfg_(cfg), tgt_index_(tgt_index), tau2_(cfg.inlier_tau * cfg.inlier_tau) {}

    Candidate run(std::size_t begin, std::size_t end) const {
        Candidate best;
        const double min_sep2 = 4.0 * tau2_;
        for (std::size_t i = begin; i < end; ++i) {
            SplitMixStream stream(derive_seed(cfg_.seed, i).value);
            const auto pick = draw_sample(stream, corr_.size());
            std::array<Vec3, 3> xs, ys;
            for (int k = 0; k < 3; ++k) {
                xs[k] = src_[corr_[pick[k]].source];
                ys[k] = tgt_[corr_[pick[k]].target];
            }
            if (!acceptable(xs, ys, min_sep2)) continue;
            CorrespondenceSet sample;
            for (int k = 0; k < 3; ++k) sample.push_back({corr_[pick[k]].source, ys[k], 1.0});
            RigidTransform t;
            try {
                t = weighted_kabsch(src_, sample);
            } catch (const DegenerateGeometry&) {
                continue;
            }
            Candidate cand;
            cand.valid = true;
            cand.iteration = i;
            cand.inliers = count_inliers(t, src_, tgt_, corr_, tau2_);
            if (cfg_.objective == RansacObjective::InlierCount) {
                cand.value = static_cast<double>(cand.inliers);
            } else {
                // The overlap scan is the expensive part; skip hypotheses that
                // the minimal sample itself does not support.
                if (cand.inliers < 3) continue;
                cand.value = source_overlap(t, src_, *tgt_index_, tau2_);
            }
            cand.transform = t;
            if (better(cand, best)) best = cand;
        }
        return best;
    }

private:
    bool acceptable(const std::array<Vec3, 3>& xs, const std::array<Vec3, 3>& ys, double min_sep2) const {
        for (int a = 0; a < 3; ++a) {
            for (int b = a + 1; b < 3; ++b) {
                const double ds2 = (xs[a] - xs[b]).squaredNorm();
                if (ds2 < min_sep2) return false;
                if (cfg_.edge_similarity > 0.0) {
                    const double ds = std::sqrt(ds2);
                    const double dt = (ys[a] - ys[b]).norm();
                    if (std::min(ds, dt) < cfg_.edge_similarity * std::max(ds, dt)) return false;
                }
            }
        }
        const Vec3 e1 = xs[1] - xs[0];
        const Vec3 e2 = xs[2] - xs[0];
        // Nearly collinear: the sine of the angle at xs[0] is tiny.
        return e1.cross(e2).norm() > 1e-2 * e1.norm() * e2.norm();
    }

    const PointCloud& src_;
    const PointCloud& tgt_;
    std::span<const IndexPair> corr_;
    const RansacConfig& cfg_;
    const KdTree* tgt_index_;
    double tau2_;
};

}  // namespace

void validate(const RansacConfig& cfg) {
    if (cfg.max_iterations < 1) throw InvalidInput("max_iterations must be at least 1");
    if (cfg.sample_size != 3) throw InvalidInput("sample_size must be 3");
    if (!(cfg.inlier_tau > 0.0) || !std::isfinite(cfg.inlier_tau)) throw InvalidInput("inlier_tau must be positive");
    if (!(cfg.source_keep_fraction > 0.0 && cfg.source_keep_fraction <= 1.0)) {
        throw InvalidInput("source_keep_fraction must lie in (0, 1]");
    }
    if (!(cfg.descriptor_radius > 0.0)) throw InvalidInput("descriptor_radius must be positive");
    if (!(cfg.sigma > 0.0)) throw InvalidInput("sigma must be positive");
    if (!(cfg.tau > 0.0)) throw InvalidInput("tau must be positive");
    if (!(cfg.edge_similarity >= 0.0 && cfg.edge_similarity < 1.0)) {
        throw InvalidInput("edge_similarity must lie in [0, 1)");
    }
    if (cfg.geometric_rounds < 0) throw InvalidInput("geometric_rounds must be non-negative");
    if (!(cfg.polish_scale > 0.0)) throw InvalidInput("polish_scale must be positive");
    if (cfg.workers < 1) throw InvalidInput("workers must be at least 1");
}

HypothesisScore score_hypothesis(const RigidTransform& t, const PointCloud& src, const PointCloud& tgt,
                                 std::span<const IndexPair> corr, const RansacConfig& cfg, const KdTree* tgt_index) {
    if (src.empty()) throw InvalidInput("scoring against an empty source");
    for (const auto& c : corr) {
        if (c.source >= src.size() || c.target >= tgt.size()) throw InvalidInput("correspondence index out of range");
    }
    const double tau2 = cfg.inlier_tau * cfg.inlier_tau;
    HypothesisScore s;
    s.inlier_count = count_inliers(t, src, tgt, corr, tau2);
    s.fitness = static_cast<double>(s.inlier_count) / static_cast<double>(src.size());
    if (cfg.objective == RansacObjective::OverlapFitness) {
        if (tgt_index) {
            s.overlap = source_overlap(t, src, *tgt_index, tau2);
        } else {
            s.overlap = source_overlap(t, src, KdTree(tgt), tau2);
        }
    }
    return s;
}

RegistrationResult ransac_on_correspondences(const PointCloud& src, const PointCloud& tgt,
                                             std::span<const IndexPair> corr, const RansacConfig& cfg) {
    validate(cfg);
    if (src.empty() || tgt.empty()) throw InvalidInput("RANSAC on an empty cloud");
    for (const auto& c : corr) {
        if (c.source >= src.size() || c.target >= tgt.size()) throw InvalidInput("correspondence index out of range");
    }
    const KdTree tgt_index(tgt);
    RegistrationResult out;
    if (corr.size() < 3) {
        out.degenerate_flags.insert("ransac_degenerate");
        out.overlap = overlap_ratio(src, tgt_index, out.transform, cfg.tau);
        return out;
    }

    const Searcher searcher(src, tgt, corr, cfg, &tgt_index);
    Candidate best;
    const auto exit_count = cfg.early_exit_ratio * static_cast<double>(corr.size());
    for (std::size_t begin = 0; begin < cfg.max_iterations; begin += kChunk) {
        const std::size_t end = std::min(cfg.max_iterations, begin + kChunk);
        const std::size_t workers = std::min<std::size_t>(cfg.workers, end - begin);
        std::vector<Candidate> partial(workers);
        if (workers == 1) {
            partial[0] = searcher.run(begin, end);
        } else {
            std::vector<std::thread> pool;
            const std::size_t span = (end - begin + workers - 1) / workers;
            for (std::size_t w = 0; w < workers; ++w) {
                const std::size_t b = std::min(end, begin + w * span);
                const std::size_t e = std::min(end, b + span);
                pool.emplace_back([&, w, b, e] { partial[w] = searcher.run(b, e); });
            }
            for (auto& th : pool) th.join();
        }
        for (const auto& c : partial) {
            if (better(c, best)) best = c;
        }
        if (best.valid && static_cast<double>(best.inliers) > exit_count) break;
    }

    if (!best.valid || best.inliers < 3) {
        out.degenerate_flags.insert("ransac_degenerate");
        if (best.valid) out.transform = best.transform;
        out.overlap = overlap_ratio(src, tgt_index, out.transform, cfg.tau);
        return out;
    }

    // Re-estimate on the full inlier set until the set stops growing.
    const double tau2 = cfg.inlier_tau * cfg.inlier_tau;
    RigidTransform t = best.transform;
    std::size_t inliers = best.inliers;
    for (int round = 0; round < 5; ++round) {
        CorrespondenceSet set;
        for (const auto& c : corr) {
            if ((t(src[c.source]) - tgt[c.target]).squaredNorm() <= tau2) set.push_back({c.source, tgt[c.target], 1.0});
        }
        RigidTransform refit;
        try {
            refit = weighted_kabsch(src, set);
        } catch (const DegenerateGeometry&) {
            break;
        }
        const std::size_t n = count_inliers(refit, src, tgt, corr, tau2);
        if (n < inliers) break;
        const bool grew = n > inliers;
        t = refit;
        inliers = n;
        if (!grew) break;
    }
    // A hard inlier gate leaves many nearby fixed points under noise; smooth
    // weights make the end point depend much less on the winning sample.
    const double c2 = cfg.polish_scale * cfg.polish_scale;
    for (int round = 0; round < cfg.geometric_rounds; ++round) {
        CorrespondenceSet set;
        set.reserve(src.size());
        for (std::size_t i = 0; i < src.size(); ++i) {
            const Neighbor nn = tgt_index.nearest(t(src[i]));
            const double u = 1.0 + nn.sq_distance / c2;
            set.push_back({i, tgt[nn.index], 1.0 / (u * u)});
        }
        RigidTransform refit;
        try {
            refit = weighted_kabsch(src, set);
        } catch (const DegenerateGeometry&) {
            break;
        }
        const bool settled = rotation_angle_deg(refit.rotation().transpose() * t.rotation()) < 1e-9 &&
                             (refit.translation() - t.translation()).norm() < 1e-12;
        t = refit;
        if (settled) break;
    }
    out.transform = t;
    out.overlap = overlap_ratio(src, tgt_index, t, cfg.tau);
    return out;
}

RegistrationResult ransac_register(const PointCloud& src, const PointCloud& tgt, const RansacConfig& cfg) {
    validate(cfg);
    if (src.size() < 10 || tgt.size() < 10) throw InvalidInput("registration needs at least 10 points per cloud");

    const KdTree tgt_index(tgt);
    const CoarseAlignment coarse = coarse_align(src, tgt);
    const auto scores = overlap_scores(apply_transform(src, coarse.transform), tgt_index, cfg.sigma);
    const auto rows = select_representative(scores, cfg.source_keep_fraction);

    const FeatureSet src_desc = compute_descriptors(src, cfg.descriptor_radius, cfg.normal_radius);
    const FeatureSet tgt_desc = compute_descriptors(tgt, cfg.descriptor_radius, cfg.normal_radius);
    const FeatureSet src_kept = src_desc.subset(rows);

    std::vector<IndexPair> pairs;
    if (cfg.mutual) {
        for (const auto& m : mutual_matches(src_kept, tgt_desc)) {
            pairs.push_back({src_kept.indices[m.source_row], tgt_desc.indices[m.target_row]});
        }
    } else {
        const RowMatrix dist = feature_sq_distances(src_kept, tgt_desc);
        for (Eigen::Index i = 0; i < dist.rows(); ++i) {
            Eigen::Index j = 0;
            dist.row(i).minCoeff(&j);
            pairs.push_back({src_kept.indices[static_cast<std::size_t>(i)], tgt_desc.indices[static_cast<std::size_t>(j)]});
        }
    }
    RegistrationResult out = ransac_on_correspondences(src, tgt, pairs, cfg);
    if (coarse.degenerate) out.degenerate_flags.insert("coarse_degenerate");
    return out;
}

}  // namespace regfuse
