#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "regfuse/alignment.hpp"
#include "regfuse/geometry.hpp"

namespace regfuse {

inline constexpr std::size_t kDescriptorDim = 33;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-point descriptors (one unit-norm row per point) tied to indices of the
/// cloud they were computed on.
///
/// A feature set may also carry a spatial block: the positions of its points
/// in a shared frame plus a length scale. Feature distance then becomes
/// ‖Δdescriptor‖² + ‖Δposition‖² / scale², which is how the registration loop
/// lets the current alignment inform matching.
struct FeatureSet {
    std::vector<std::size_t> indices;
    RowMatrix descriptors;
    /// The point had fewer than three neighbors and got the uniform descriptor.
    std::vector<bool> flagged;

    std::vector<Vec3> positions;
    double spatial_scale = 0.0;

    std::size_t size() const { return indices.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(descriptors.cols()); }
    bool has_positions() const { return spatial_scale > 0.0; }

    /// Rows `rows` (positions into this set, not cloud indices).
    FeatureSet subset(std::span<const std::size_t> rows) const;
    /// Copy with a spatial block; `cloud` supplies the position of each
    /// indexed point.
    FeatureSet with_positions(const PointCloud& cloud, double scale) const;
};

/// FPFH-style histograms: three 11-bin histograms of the Darboux-frame angles
/// between each point's normal and its neighbors' within `radius`, blended
/// with distance-weighted neighbor histograms, then L2-normalized. Normals
/// come from local PCA and are oriented away from the cloud centroid, which
/// keeps the descriptor invariant under rigid motion.
FeatureSet compute_descriptors(const PointCloud& cloud, double radius);
/// Same, with normals estimated over a separate `normal_radius`.
FeatureSet compute_descriptors(const PointCloud& cloud, double radius, double normal_radius);

/// Debug dump: header `point_index,d0,...,d32`, one row per point, numbers
/// in the CSV number format.
std::string descriptor_csv(const FeatureSet& features);

/// Indices of the ⌈keep_fraction · n⌉ highest scores, ties to the lower
/// index, returned in ascending index order.
std::vector<std::size_t> select_representative(std::span<const double> scores, double keep_fraction);

/// Squared joint feature distances, rows = `a`, cols = `b`.
RowMatrix feature_sq_distances(const FeatureSet& a, const FeatureSet& b);

/// Row-stochastic matching matrix: row i is softmax over target rows of
/// −dᵢⱼ²/(2·temperature). Without a spatial block this is exactly the
/// softmax of cosine similarity / temperature.
RowMatrix similarity_weights(const FeatureSet& src_sel, const FeatureSet& tgt_all, double temperature);

/// Partial-to-complete soft matching. Each selected source point is paired
/// with the similarity-weighted average of all target points; the pair weight
/// is the row's best similarity (1 − d²/2, i.e. cosine without a spatial
/// block) clamped to [0, 1]. The target set is never filtered.
CorrespondenceSet match_partial_to_complete(const FeatureSet& src_sel, const FeatureSet& tgt_all,
                                            const PointCloud& tgt_points, double temperature);
/// Same, reusing `sq_dist` = feature_sq_distances(src_sel, tgt_all).
CorrespondenceSet match_partial_to_complete(const FeatureSet& src_sel, const FeatureSet& tgt_all,
                                            const PointCloud& tgt_points, double temperature,
                                            const RowMatrix& sq_dist);

/// Feature-matching removal. Keeps a pair when its source point's best target
/// feature beats the second best by `ratio` (distance ratio) and, when
/// `require_mutual`, that target's best source feature is the same point.
/// The result is a subset of `corr` in its original order. Throws
/// DegenerateSet when fewer than three pairs survive.
CorrespondenceSet fmr_filter(const CorrespondenceSet& corr, const FeatureSet& src_feats, const FeatureSet& tgt_feats,
                             double ratio, bool require_mutual);

/// Same, reusing `sq_dist` = feature_sq_distances(src_feats, tgt_feats).
CorrespondenceSet fmr_filter(const CorrespondenceSet& corr, const FeatureSet& src_feats, const RowMatrix& sq_dist,
                             double ratio, bool require_mutual);

/// Pairwise rigidity check. Two pairs agree when their source points are at
/// least 2·eps apart and the source and target distances differ by less than
/// `eps`. Returns the largest set of pairwise-agreeing pairs found by greedy
/// growth from every seed (seeds and candidates in descending agreement
/// count, ties by input order), in input order. Throws DegenerateSet when
/// fewer than three pairs remain.
CorrespondenceSet consistency_filter(const PointCloud& src, const CorrespondenceSet& corr, double eps);

struct HardMatch {
    std::size_t source_row = 0;
    std::size_t target_row = 0;
    double distance = 0.0;
};

/// Mutual nearest neighbors in feature space, ascending by source row.
std::vector<HardMatch> mutual_matches(const FeatureSet& src, const FeatureSet& tgt);

}  // namespace regfuse
