#include "regfuse/alignment.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "regfuse/error.hpp"
#include "regfuse/nn_index.hpp"

namespace regfuse {

RigidTransform weighted_kabsch(const PointCloud& src, const CorrespondenceSet& corr) {
    double total = 0.0;
    std::size_t positive = 0;
    for (const auto& c : corr) {
        if (!std::isfinite(c.weight) || c.weight < 0.0) {
            throw InvalidWeights("correspondence weights must be finite and non-negative");
        }
        if (c.source_index >= src.size()) {
            throw InvalidInput("correspondence source index " + std::to_string(c.source_index) + " out of range");
        }
        if (!c.target.allFinite()) throw InvalidInput("correspondence target has a non-finite coordinate");
        if (c.weight > 0.0) {
            total += c.weight;
            ++positive;
        }
    }
    if (positive == 0) throw InvalidWeights("all correspondence weights are zero");
    if (positive < 3) throw DegenerateGeometry("fewer than three weighted correspondences");

    Vec3 src_mean = Vec3::Zero();
    Vec3 tgt_mean = Vec3::Zero();
    for (const auto& c : corr) {
        if (c.weight == 0.0) continue;
        const double w = c.weight / total;
        src_mean += w * src[c.source_index];
        tgt_mean += w * c.target;
    }

    Mat3 cov = Mat3::Zero();
    for (const auto& c : corr) {
        if (c.weight == 0.0) continue;
        const double w = c.weight / total;
        cov += w * (src[c.source_index] - src_mean) * (c.target - tgt_mean).transpose();
    }

    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    if (!(sv[0] > 0.0) || sv[1] < 1e-9 * sv[0]) {
        throw DegenerateGeometry("weighted correspondences are collinear or coincident");
    }
    const Mat3& u = svd.matrixU();
    const Mat3& v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
    const Mat3 r = v * d * u.transpose();
    return RigidTransform(r, tgt_mean - r * src_mean);
}

double weighted_sq_residual(const PointCloud& src, const CorrespondenceSet& corr, const RigidTransform& t) {
    double sum = 0.0;
    for (const auto& c : corr) sum += c.weight * (t(src[c.source_index]) - c.target).squaredNorm();
    return sum;
}

namespace {

struct PrincipalFrame {
    Vec3 centroid;
    Mat3 axes;  // columns, ascending variance, det +1
    bool degenerate = false;
};

PrincipalFrame principal_frame(const PointCloud& cloud) {
    if (cloud.empty()) throw InvalidInput("principal axes of an empty cloud");
    PrincipalFrame f;
    f.centroid = cloud.centroid();
    Mat3 cov = Mat3::Zero();
    for (const auto& p : cloud) {
        const Vec3 d = p - f.centroid;
        cov += d * d.transpose();
    }
    cov /= static_cast<double>(cloud.size());
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 ev = eig.eigenvalues();
    const double scale = std::max(ev[2], std::numeric_limits<double>::min());
    f.degenerate = (ev[1] - ev[0]) <= 1e-9 * scale || (ev[2] - ev[1]) <= 1e-9 * scale;
    f.axes = eig.eigenvectors();
    if (f.axes.determinant() < 0.0) f.axes.col(0) = -f.axes.col(0);
    return f;
}

constexpr std::array<std::array<double, 3>, 4> kSignPatterns{{
    {1.0, 1.0, 1.0},
    {-1.0, -1.0, 1.0},
    {-1.0, 1.0, -1.0},
    {1.0, -1.0, -1.0},
}};

std::array<RigidTransform, 4> hypotheses_from(const PrincipalFrame& s, const PrincipalFrame& t) {
    std::array<RigidTransform, 4> out;
    for (std::size_t k = 0; k < 4; ++k) {
        const Vec3 signs(kSignPatterns[k][0], kSignPatterns[k][1], kSignPatterns[k][2]);
        const Mat3 r = project_to_rotation(t.axes * signs.asDiagonal() * s.axes.transpose());
        out[k] = RigidTransform(r, t.centroid - r * s.centroid);
    }
    return out;
}

// chamfer(T(src), tgt) evaluated without re-indexing the moved source:
// the second half is computed in the source frame.
double hypothesis_chamfer(const PointCloud& src, const KdTree& src_index, const PointCloud& tgt,
                          const KdTree& tgt_index, const RigidTransform& t) {
    const RigidTransform inv = invert(t);
    double fwd = 0.0;
    for (const auto& p : src) fwd += tgt_index.nearest(t(p)).sq_distance;
    double bwd = 0.0;
    for (const auto& q : tgt) bwd += src_index.nearest(inv(q)).sq_distance;
    return fwd / static_cast<double>(src.size()) + bwd / static_cast<double>(tgt.size());
}

}  // namespace

std::array<RigidTransform, 4> principal_axis_hypotheses(const PointCloud& src, const PointCloud& tgt) {
    const auto s = principal_frame(src);
    const auto t = principal_frame(tgt);
    if (s.degenerate || t.degenerate) throw DegenerateGeometry("principal axes are not unique");
    return hypotheses_from(s, t);
}

CoarseAlignment coarse_align(const PointCloud& src, const PointCloud& tgt) {
    if (src.size() < 3 || tgt.size() < 3) throw InvalidInput("coarse alignment needs at least three points per cloud");
    const auto s = principal_frame(src);
    const auto t = principal_frame(tgt);
    const KdTree src_index(src);
    const KdTree tgt_index(tgt);

    CoarseAlignment out;
    if (s.degenerate || t.degenerate) {
        out.degenerate = true;
        out.transform = RigidTransform(Mat3::Identity(), t.centroid - s.centroid);
        out.chamfer.fill(hypothesis_chamfer(src, src_index, tgt, tgt_index, out.transform));
        return out;
    }
    const auto hyps = hypotheses_from(s, t);
    for (std::size_t k = 0; k < 4; ++k) {
        out.chamfer[k] = hypothesis_chamfer(src, src_index, tgt, tgt_index, hyps[k]);
        if (out.hypothesis < 0 || out.chamfer[k] < out.chamfer[static_cast<std::size_t>(out.hypothesis)]) {
            out.hypothesis = static_cast<int>(k);
        }
    }
    out.transform = hyps[static_cast<std::size_t>(out.hypothesis)];
    return out;
}

std::vector<double> overlap_scores(const PointCloud& src_aligned, const KdTree& tgt_index, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidInput("overlap sigma must be positive");
    if (tgt_index.size() == 0) throw InvalidInput("overlap scores against an empty target");
    std::vector<double> scores;
    scores.reserve(src_aligned.size());
    for (const auto& p : src_aligned) {
        scores.push_back(std::exp(-std::sqrt(tgt_index.nearest(p).sq_distance) / sigma));
    }
    return scores;
}

std::vector<double> overlap_scores(const PointCloud& src_aligned, const PointCloud& tgt, double sigma) {
    if (tgt.empty()) throw InvalidInput("overlap scores against an empty target");
    return overlap_scores(src_aligned, KdTree(tgt), sigma);
}

double overlap_ratio(const PointCloud& src, const KdTree& tgt_index, const RigidTransform& t, double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidInput("overlap tau must be positive");
    if (src.empty() || tgt_index.size() == 0) throw InvalidInput("overlap ratio of an empty cloud");
    const double tau2 = tau * tau;
    std::size_t within = 0;
    for (const auto& p : src) {
        if (tgt_index.nearest(t(p)).sq_distance <= tau2) ++within;
    }
    return static_cast<double>(within) / static_cast<double>(src.size());
}

double overlap_ratio(const PointCloud& src, const PointCloud& tgt, const RigidTransform& t, double tau) {
    if (src.empty() || tgt.empty()) throw InvalidInput("overlap ratio of an empty cloud");
    return overlap_ratio(src, KdTree(tgt), t, tau);
}

}  // namespace regfuse
