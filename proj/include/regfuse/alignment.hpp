#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "regfuse/geometry.hpp"

namespace regfuse {

class KdTree;

/// One weighted pairing of a source point (by index) with a target location.
/// The target may be an actual target point or a synthesized soft point.
struct Correspondence {
    std::size_t source_index = 0;
    Vec3 target = Vec3::Zero();
    double weight = 1.0;
};

using CorrespondenceSet = std::vector<Correspondence>;

/// Closed-form minimizer of Σ wᵢ‖R·xᵢ + t − yᵢ‖² over SE(3) via SVD of the
/// weighted cross-covariance, with the determinant sign fix so R is never a
/// reflection.
///
/// Throws InvalidWeights for negative/non-finite weights or when no weight is
/// positive, InvalidInput for out-of-range source indices, and
/// DegenerateGeometry when fewer than three pairs carry weight or the
/// weighted points are collinear/coincident (second singular value of the
/// covariance below 1e-9 of the largest).
RigidTransform weighted_kabsch(const PointCloud& src, const CorrespondenceSet& corr);

/// Σ wᵢ‖T(xᵢ) − yᵢ‖².
double weighted_sq_residual(const PointCloud& src, const CorrespondenceSet& corr, const RigidTransform& t);

struct CoarseAlignment {
    RigidTransform transform;
    /// Index into the fixed hypothesis order (sign patterns (+,+,+),
    /// (−,−,+), (−,+,−), (+,−,−) on the principal axes). -1 when degenerate.
    int hypothesis = -1;
    std::array<double, 4> chamfer{};
    /// Two principal variances of either cloud coincide (relative 1e-9), so
    /// the axes are not defined; the transform is then centroid-only.
    bool degenerate = false;
};

/// Principal-axes initializer: centroids matched, source axes rotated onto
/// target axes under each of the four proper sign assignments, and the
/// hypothesis with the smallest chamfer distance kept (ties go to the lower
/// hypothesis index).
CoarseAlignment coarse_align(const PointCloud& src, const PointCloud& tgt);

/// The four candidate transforms in hypothesis order. Throws
/// DegenerateGeometry when principal axes are undefined.
std::array<RigidTransform, 4> principal_axis_hypotheses(const PointCloud& src, const PointCloud& tgt);

/// Per-source-point overlap likelihood exp(−d/σ), d being the distance from
/// the aligned source point to its nearest target point.
std::vector<double> overlap_scores(const PointCloud& src_aligned, const PointCloud& tgt, double sigma);
std::vector<double> overlap_scores(const PointCloud& src_aligned, const KdTree& tgt_index, double sigma);

/// Fraction of T(src) points whose nearest target point lies within tau.
double overlap_ratio(const PointCloud& src, const PointCloud& tgt, const RigidTransform& t, double tau);
double overlap_ratio(const PointCloud& src, const KdTree& tgt_index, const RigidTransform& t, double tau);

}  // namespace regfuse
