#include "regfuse/correspondence.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "regfuse/error.hpp"
#include "regfuse/io.hpp"
#include "regfuse/nn_index.hpp"

namespace regfuse {
namespace {

constexpr int kBins = 11;

void check_compatible(const FeatureSet& a, const FeatureSet& b) {
    if (a.dim() != b.dim()) throw InvalidInput("feature sets differ in descriptor dimension");
    if (a.has_positions() != b.has_positions()) throw InvalidInput("only one feature set carries positions");
    if (a.has_positions() && a.spatial_scale != b.spatial_scale) {
        throw InvalidInput("feature sets use different spatial scales");
    }
}

// Orientation fallback for normals perpendicular to the centroid direction:
// one global axis so that e.g. every normal of a plane agrees.
Vec3 global_reference_axis(const PointCloud& cloud, const Vec3& centroid) {
    Mat3 cov = Mat3::Zero();
    for (const auto& p : cloud) cov += (p - centroid) * (p - centroid).transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Vec3 axis = eig.eigenvectors().col(0);
    // Sign by the largest-magnitude component so the choice is deterministic.
    Eigen::Index k = 0;
    axis.cwiseAbs().maxCoeff(&k);
    return axis[k] < 0.0 ? Vec3(-axis) : axis;
}

// Darboux-frame pair features (alpha, phi, theta) following the usual PFH
// convention: the point whose normal makes the smaller angle with the
// connecting line acts as the source.
bool pair_features(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2, double& f1, double& f2,
                   double& f3) {
    Vec3 dp = p2 - p1;
    const double dist = dp.norm();
    if (dist == 0.0) return false;
    Vec3 na = n1;
    Vec3 nb = n2;
    const double a1 = na.dot(dp) / dist;
    const double a2 = nb.dot(dp) / dist;
    // Near-ties (e.g. two points sharing one normal neighborhood) keep p1 as
    // the source; letting rounding decide would flip the sign of f3.
    const double gap = std::acos(std::clamp(std::abs(a1), 0.0, 1.0)) - std::acos(std::clamp(std::abs(a2), 0.0, 1.0));
    if (gap > 1e-9) {
        std::swap(na, nb);
        dp = -dp;
        f3 = -a2;
    } else {
        f3 = a1;
    }
    Vec3 v = dp.cross(na);
    const double vn = v.norm();
    if (vn == 0.0) return false;
    v /= vn;
    const Vec3 w = na.cross(v);
    f2 = v.dot(nb);
    f1 = std::atan2(w.dot(nb), na.dot(nb));
    return true;
}

int bin_of(double value, double lo, double hi) {
    const int b = static_cast<int>(std::floor(kBins * (value - lo) / (hi - lo)));
    return std::clamp(b, 0, kBins - 1);
}

}  // namespace

FeatureSet FeatureSet::subset(std::span<const std::size_t> rows) const {
    FeatureSet out;
    out.descriptors.resize(static_cast<Eigen::Index>(rows.size()), descriptors.cols());
    out.spatial_scale = spatial_scale;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto row = rows[r];
        if (row >= size()) throw InvalidInput("feature row out of range");
        out.indices.push_back(indices[row]);
        out.descriptors.row(static_cast<Eigen::Index>(r)) = descriptors.row(static_cast<Eigen::Index>(row));
        out.flagged.push_back(flagged[row]);
        if (has_positions()) out.positions.push_back(positions[row]);
    }
    return out;
}

FeatureSet FeatureSet::with_positions(const PointCloud& cloud, double scale) const {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidInput("spatial scale must be positive");
    FeatureSet out = *this;
    out.spatial_scale = scale;
    out.positions.clear();
    out.positions.reserve(indices.size());
    for (auto i : indices) {
        if (i >= cloud.size()) throw InvalidInput("feature index out of range for the position cloud");
        out.positions.push_back(cloud[i]);
    }
    return out;
}

FeatureSet compute_descriptors(const PointCloud& cloud, double radius) { return compute_descriptors(cloud, radius, radius); }

FeatureSet compute_descriptors(const PointCloud& cloud, double radius, double normal_radius) {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidInput("descriptor radius must be positive");
    if (!(normal_radius > 0.0) || !std::isfinite(normal_radius)) throw InvalidInput("normal radius must be positive");
    if (cloud.size() < 10) throw InvalidInput("descriptors need at least 10 points");
    const std::size_t n = cloud.size();
    const KdTree index(cloud);
    const Vec3 centroid = cloud.centroid();
    const Vec3 reference = global_reference_axis(cloud, centroid);

    double extent = 0.0;
    for (const auto& p : cloud) extent = std::max(extent, (p - centroid).norm());

    std::vector<std::vector<std::size_t>> neighbors(n);
    std::vector<Vec3> normals(n, Vec3::Zero());
    std::vector<bool> flagged(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        auto nb = index.radius_search(cloud[i], radius);
        std::erase(nb, i);
        auto local = normal_radius == radius ? nb : index.radius_search(cloud[i], normal_radius);
        if (normal_radius != radius) std::erase(local, i);
        if (nb.size() < 3 || local.size() < 3) {
            flagged[i] = true;
            continue;
        }
        Vec3 mean = cloud[i];
        for (auto j : local) mean += cloud[j];
        mean /= static_cast<double>(local.size() + 1);
        Mat3 cov = (cloud[i] - mean) * (cloud[i] - mean).transpose();
        for (auto j : local) cov += (cloud[j] - mean) * (cloud[j] - mean).transpose();
        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        Vec3 normal = eig.eigenvectors().col(0);
        const double side = normal.dot(cloud[i] - centroid);
        if (std::abs(side) > 1e-9 * std::max(extent, 1e-300)) {
            if (side < 0.0) normal = -normal;
        } else if (normal.dot(reference) < 0.0) {
            normal = -normal;
        }
        normals[i] = normal;
        neighbors[i] = std::move(nb);
    }

    // Simplified point feature histograms.
    RowMatrix spfh = RowMatrix::Zero(static_cast<Eigen::Index>(n), kDescriptorDim);
    for (std::size_t i = 0; i < n; ++i) {
        if (flagged[i]) continue;
        std::size_t used = 0;
        std::array<int, kDescriptorDim> counts{};
        for (auto j : neighbors[i]) {
            if (flagged[j]) continue;
            double f1 = 0.0, f2 = 0.0, f3 = 0.0;
            if (!pair_features(cloud[i], normals[i], cloud[j], normals[j], f1, f2, f3)) continue;
            ++counts[static_cast<std::size_t>(bin_of(f1, -kPi, kPi))];
            ++counts[static_cast<std::size_t>(kBins + bin_of(f2, -1.0, 1.0))];
            ++counts[static_cast<std::size_t>(2 * kBins + bin_of(f3, -1.0, 1.0))];
            ++used;
        }
        if (used == 0) continue;
        const double incr = 100.0 / static_cast<double>(used);
        for (std::size_t b = 0; b < kDescriptorDim; ++b) {
            spfh(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = counts[b] * incr;
        }
    }

    FeatureSet out;
    out.indices.resize(n);
    std::iota(out.indices.begin(), out.indices.end(), std::size_t{0});
    out.flagged = flagged;
    out.descriptors = RowMatrix::Zero(static_cast<Eigen::Index>(n), kDescriptorDim);
    const double uniform = 1.0 / std::sqrt(static_cast<double>(kDescriptorDim));
    for (std::size_t i = 0; i < n; ++i) {
        auto row = out.descriptors.row(static_cast<Eigen::Index>(i));
        if (flagged[i]) {
            row.setConstant(uniform);
            continue;
        }
        Eigen::Matrix<double, 1, kDescriptorDim> blend = Eigen::Matrix<double, 1, kDescriptorDim>::Zero();
        for (auto j : neighbors[i]) {
            if (flagged[j]) continue;
            const double d = (cloud[j] - cloud[i]).norm();
            if (d == 0.0) continue;
            blend += spfh.row(static_cast<Eigen::Index>(j)) / d;
        }
        for (int h = 0; h < 3; ++h) {
            auto seg = blend.segment(h * kBins, kBins);
            const double s = seg.sum();
            if (s > 0.0) seg *= 100.0 / s;
        }
        Eigen::Matrix<double, 1, kDescriptorDim> fpfh = spfh.row(static_cast<Eigen::Index>(i)) + blend;
        const double norm = fpfh.norm();
        if (norm > 0.0) {
            row = fpfh / norm;
        } else {
            row.setConstant(uniform);
            out.flagged[i] = true;
        }
    }
    return out;
}

std::string descriptor_csv(const FeatureSet& features) {
    std::string out = "point_index";
    for (Eigen::Index d = 0; d < features.descriptors.cols(); ++d) out += ",d" + std::to_string(d);
    out += '\n';
    for (std::size_t r = 0; r < features.size(); ++r) {
        out += std::to_string(features.indices[r]);
        for (Eigen::Index d = 0; d < features.descriptors.cols(); ++d) {
            out += ',' + io::format_csv_number(features.descriptors(static_cast<Eigen::Index>(r), d));
        }
        out += '\n';
    }
    return out;
}

std::vector<std::size_t> select_representative(std::span<const double> scores, double keep_fraction) {
    if (!(keep_fraction > 0.0) || keep_fraction > 1.0) throw InvalidInput("keep_fraction must lie in (0, 1]");
    const std::size_t n = scores.size();
    const auto keep = std::min(
        n, static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n) - 1e-9)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(keep);
    std::sort(order.begin(), order.end());
    return order;
}

RowMatrix feature_sq_distances(const FeatureSet& a, const FeatureSet& b) {
    check_compatible(a, b);
    const auto na = static_cast<Eigen::Index>(a.size());
    const auto nb = static_cast<Eigen::Index>(b.size());
    const Eigen::VectorXd an = a.descriptors.rowwise().squaredNorm();
    const Eigen::VectorXd bn = b.descriptors.rowwise().squaredNorm();
    RowMatrix d = -2.0 * (a.descriptors * b.descriptors.transpose());
    d.colwise() += an;
    d.rowwise() += bn.transpose();
    if (a.has_positions()) {
        const double inv = 1.0 / (a.spatial_scale * a.spatial_scale);
        for (Eigen::Index i = 0; i < na; ++i) {
            const Vec3& p = a.positions[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < nb; ++j) {
                d(i, j) += (p - b.positions[static_cast<std::size_t>(j)]).squaredNorm() * inv;
            }
        }
    }
    return d.cwiseMax(0.0);
}

namespace {

RowMatrix softmax_rows(const RowMatrix& sq_dist, double temperature) {
    RowMatrix logits = sq_dist * (-0.5 / temperature);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        row = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
    }
    return logits;
}

}  // namespace

RowMatrix similarity_weights(const FeatureSet& src_sel, const FeatureSet& tgt_all, double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InvalidInput("temperature must be positive");
    if (tgt_all.size() == 0) throw InvalidInput("matching against an empty target feature set");
    return softmax_rows(feature_sq_distances(src_sel, tgt_all), temperature);
}

CorrespondenceSet match_partial_to_complete(const FeatureSet& src_sel, const FeatureSet& tgt_all,
                                            const PointCloud& tgt_points, double temperature) {
    return match_partial_to_complete(src_sel, tgt_all, tgt_points, temperature, feature_sq_distances(src_sel, tgt_all));
}

CorrespondenceSet match_partial_to_complete(const FeatureSet& src_sel, const FeatureSet& tgt_all,
                                            const PointCloud& tgt_points, double temperature,
                                            const RowMatrix& sq_dist) {
    if (src_sel.size() == 0) throw InvalidInput("no selected source points to match");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InvalidInput("temperature must be positive");
    if (tgt_all.size() == 0) throw InvalidInput("matching against an empty target feature set");
    if (sq_dist.rows() != static_cast<Eigen::Index>(src_sel.size()) ||
        sq_dist.cols() != static_cast<Eigen::Index>(tgt_all.size())) {
        throw InvalidInput("distance matrix does not match the feature sets");
    }
    for (auto j : tgt_all.indices) {
        if (j >= tgt_points.size()) throw InvalidInput("target feature index out of range");
    }
    const RowMatrix weights = softmax_rows(sq_dist, temperature);

    CorrespondenceSet out;
    out.reserve(src_sel.size());
    for (Eigen::Index i = 0; i < weights.rows(); ++i) {
        Vec3 soft = Vec3::Zero();
        for (Eigen::Index j = 0; j < weights.cols(); ++j) {
            const double w = weights(i, j);
            if (w != 0.0) soft += w * tgt_points[tgt_all.indices[static_cast<std::size_t>(j)]];
        }
        const double best_sim = 1.0 - 0.5 * sq_dist.row(i).minCoeff();
        out.push_back({src_sel.indices[static_cast<std::size_t>(i)], soft, std::clamp(best_sim, 0.0, 1.0)});
    }
    return out;
}

CorrespondenceSet fmr_filter(const CorrespondenceSet& corr, const FeatureSet& src_feats, const FeatureSet& tgt_feats,
                             double ratio, bool require_mutual) {
    return fmr_filter(corr, src_feats, feature_sq_distances(src_feats, tgt_feats), ratio, require_mutual);
}

CorrespondenceSet fmr_filter(const CorrespondenceSet& corr, const FeatureSet& src_feats, const RowMatrix& dist,
                             double ratio, bool require_mutual) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidInput("ratio must lie in (0, 1)");
    if (dist.cols() < 2) throw InvalidInput("ratio test needs at least two target features");
    if (dist.rows() != static_cast<Eigen::Index>(src_feats.size())) {
        throw InvalidInput("distance matrix does not match the source feature set");
    }

    std::unordered_map<std::size_t, std::size_t> row_of;
    for (std::size_t r = 0; r < src_feats.size(); ++r) row_of.emplace(src_feats.indices[r], r);

    // Column argmin over source rows, ties to the lower row.
    std::vector<Eigen::Index> best_src(static_cast<std::size_t>(dist.cols()), 0);
    for (Eigen::Index j = 0; j < dist.cols(); ++j) dist.col(j).minCoeff(&best_src[static_cast<std::size_t>(j)]);

    CorrespondenceSet out;
    for (const auto& c : corr) {
        const auto it = row_of.find(c.source_index);
        if (it == row_of.end()) throw InvalidInput("correspondence source has no feature row");
        const auto i = static_cast<Eigen::Index>(it->second);
        Eigen::Index best = 0;
        const double d1 = dist.row(i).minCoeff(&best);
        double d2 = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < dist.cols(); ++j) {
            if (j != best) d2 = std::min(d2, dist(i, j));
        }
        // Distance ratio on unsquared distances.
        if (!(std::sqrt(d1) < ratio * std::sqrt(d2))) continue;
        if (require_mutual && best_src[static_cast<std::size_t>(best)] != i) continue;
        out.push_back(c);
    }
    if (out.size() < 3) throw DegenerateSet("fewer than three correspondences survived feature-matching removal");
    return out;
}

CorrespondenceSet consistency_filter(const PointCloud& src, const CorrespondenceSet& corr, double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidInput("consistency eps must be positive");
    const std::size_t n = corr.size();
    for (const auto& c : corr) {
        if (c.source_index >= src.size()) throw InvalidInput("correspondence source index out of range");
    }
    // Pairs closer than 2·eps agree trivially and say nothing about rotation.
    std::vector<char> agree(n * n, 0);
    std::vector<std::size_t> support(n, 0);
    for (std::size_t a = 0; a < n; ++a) {
        const Vec3& xa = src[corr[a].source_index];
        for (std::size_t b = a + 1; b < n; ++b) {
            const double ds = (xa - src[corr[b].source_index]).norm();
            const double dt = (corr[a].target - corr[b].target).norm();
            if (ds >= 2.0 * eps && std::abs(ds - dt) < eps) {
                agree[a * n + b] = agree[b * n + a] = 1;
                ++support[a];
                ++support[b];
            }
        }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return support[x] > support[y]; });

    // Greedy clique growth from every seed, candidates in support order.
    std::vector<std::size_t> best;
    std::vector<std::size_t> clique;
    for (const auto seed : order) {
        if (support[seed] + 1 <= best.size()) break;
        clique.assign(1, seed);
        for (const auto c : order) {
            if (c == seed) continue;
            const bool all = std::all_of(clique.begin(), clique.end(), [&](std::size_t q) { return agree[c * n + q]; });
            if (all) clique.push_back(c);
        }
        if (clique.size() > best.size()) best = clique;
    }
    if (best.size() < 3) throw DegenerateSet("fewer than three correspondences are mutually consistent");
    std::sort(best.begin(), best.end());
    CorrespondenceSet out;
    out.reserve(best.size());
    for (auto i : best) out.push_back(corr[i]);
    return out;
}

std::vector<HardMatch> mutual_matches(const FeatureSet& src, const FeatureSet& tgt) {
    if (src.size() == 0 || tgt.size() == 0) return {};
    const RowMatrix dist = feature_sq_distances(src, tgt);
    std::vector<Eigen::Index> best_src(static_cast<std::size_t>(dist.cols()), 0);
    for (Eigen::Index j = 0; j < dist.cols(); ++j) dist.col(j).minCoeff(&best_src[static_cast<std::size_t>(j)]);
    std::vector<HardMatch> out;
    for (Eigen::Index i = 0; i < dist.rows(); ++i) {
        Eigen::Index j = 0;
        const double d = dist.row(i).minCoeff(&j);
        if (best_src[static_cast<std::size_t>(j)] == i) {
            out.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), std::sqrt(d)});
        }
    }
    return out;
}

}  // namespace regfuse
