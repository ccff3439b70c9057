#include "regfuse/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "regfuse/error.hpp"

namespace regfuse {
namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::vector<Vec3> blob_points(std::size_t count, Rng& rng) {
    const Vec3 axes(uniform(rng, 0.45, 0.75), uniform(rng, 0.35, 0.6), uniform(rng, 0.25, 0.45));
    struct Bump {
        Vec3 dir;
        double amplitude;
        double inv_width2;
    };
    std::vector<Bump> bumps;
    for (int k = 0; k < 6; ++k) {
        const Vec3 dir = random_unit_vector(rng);
        const double amp = uniform(rng, -0.2, 0.35);
        const double w = uniform(rng, 0.35, 0.7);
        bumps.push_back({dir, amp, 1.0 / (w * w)});
    }
    std::vector<Vec3> pts;
    pts.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Vec3 u = random_unit_vector(rng);
        double r = 1.0;
        for (const auto& b : bumps) r += b.amplitude * std::exp((u.dot(b.dir) - 1.0) * b.inv_width2);
        r = std::max(r, 0.3);
        pts.push_back(axes.cwiseProduct(u) * r);
    }
    return pts;
}

std::vector<Vec3> plane_points(std::size_t count, Rng& rng) {
    const double sx = uniform(rng, 0.5, 0.7);
    const double sy = sx * uniform(rng, 0.6, 0.95);
    std::vector<Vec3> pts;
    pts.reserve(count);
    for (std::size_t i = 0; i < count; ++i) pts.emplace_back(uniform(rng, -sx, sx), uniform(rng, -sy, sy), 0.0);
    return pts;
}

std::vector<Vec3> cylinder_points(std::size_t count, Rng& rng) {
    const double radius = uniform(rng, 0.3, 0.45);
    const double half_height = uniform(rng, 0.5, 0.75);
    std::vector<Vec3> pts;
    pts.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double theta = uniform(rng, -kPi, kPi);
        pts.emplace_back(radius * std::cos(theta), radius * std::sin(theta), uniform(rng, -half_height, half_height));
    }
    return pts;
}

std::vector<Vec3> box_surface(std::size_t count, const Vec3& half, Rng& rng) {
    // Faces by area: pairs perpendicular to x, y, z.
    const double ax = half.y() * half.z();
    const double ay = half.x() * half.z();
    const double az = half.x() * half.y();
    const double total = ax + ay + az;
    std::vector<Vec3> pts;
    pts.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double pick = uniform(rng, 0.0, total);
        const double side = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
        Vec3 p(uniform(rng, -half.x(), half.x()), uniform(rng, -half.y(), half.y()), uniform(rng, -half.z(), half.z()));
        if (pick < ax) {
            p.x() = side * half.x();
        } else if (pick < ax + ay) {
            p.y() = side * half.y();
        } else {
            p.z() = side * half.z();
        }
        pts.push_back(p);
    }
    return pts;
}

std::vector<Vec3> box_points(std::size_t count, Rng& rng) {
    const double a = uniform(rng, 0.3, 0.42);
    const double c = uniform(rng, 0.55, 0.8);
    return box_surface(count, Vec3(a, a, c), rng);
}

std::vector<Vec3> composite_points(std::size_t count, Rng& rng) {
    const std::size_t handle = count / 4;
    auto pts = blob_points(count - handle, rng);
    const Vec3 dir = random_unit_vector(rng);
    const Vec3 half(uniform(rng, 0.08, 0.14), uniform(rng, 0.08, 0.14), uniform(rng, 0.25, 0.35));
    const Mat3 orient = random_rotation(360.0, rng);
    const Vec3 offset = dir * 0.55;
    for (const auto& p : box_surface(handle, half, rng)) pts.push_back(orient * p + offset);
    return pts;
}

// Indices of the `k` points furthest along `dir`, ascending by index.
std::vector<std::size_t> crop_view(const std::vector<Vec3>& pts, const Vec3& dir, std::size_t k) {
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> proj(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) proj[i] = pts[i].dot(dir);
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                     [&](std::size_t a, std::size_t b) { return proj[a] > proj[b] || (proj[a] == proj[b] && a < b); });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

std::size_t shared_count(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::size_t i = 0, j = 0, n = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
            ++n;
            ++i;
            ++j;
        } else if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return n;
}

constexpr double kOverlapTolerance = 0.05;
constexpr int kMaxAttempts = 100;

}  // namespace

std::string to_string(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::RandomBlob: return "random_blob";
        case ShapeKind::Plane: return "plane";
        case ShapeKind::Cylinder: return "cylinder";
        case ShapeKind::Box: return "box";
        case ShapeKind::Composite: return "composite";
    }
    return "unknown";
}

ShapeKind shape_kind_from_string(const std::string& name) {
    for (auto k : {ShapeKind::RandomBlob, ShapeKind::Plane, ShapeKind::Cylinder, ShapeKind::Box, ShapeKind::Composite}) {
        if (to_string(k) == name) return k;
    }
    throw InvalidInput("unknown shape '" + name + "'");
}

double GeneratedPair::planted_overlap() const {
    if (overlap_mask_src.empty()) return 0.0;
    const auto n = std::count(overlap_mask_src.begin(), overlap_mask_src.end(), true);
    return static_cast<double>(n) / static_cast<double>(overlap_mask_src.size());
}

PointCloud sample_complete_shape(ShapeKind kind, std::size_t count, Rng& rng) {
    std::vector<Vec3> pts;
    switch (kind) {
        case ShapeKind::RandomBlob: pts = blob_points(count, rng); break;
        case ShapeKind::Plane: pts = plane_points(count, rng); break;
        case ShapeKind::Cylinder: pts = cylinder_points(count, rng); break;
        case ShapeKind::Box: pts = box_points(count, rng); break;
        case ShapeKind::Composite: pts = composite_points(count, rng); break;
    }
    Vec3 c = Vec3::Zero();
    for (const auto& p : pts) c += p;
    c /= static_cast<double>(pts.size());
    for (auto& p : pts) p -= c;
    return PointCloud(std::move(pts));
}

void validate(const PairSpec& spec) {
    if (!(spec.overlap_target > 0.0 && spec.overlap_target <= 1.0)) {
        throw InvalidInput("overlap_target must lie in (0, 1]");
    }
    if (spec.points_per_cloud < 32) throw InvalidInput("points_per_cloud must be at least 32");
    if (spec.rot_level != 0 && spec.rot_level != 1) throw InvalidInput("rot_level must be 0 or 1");
    if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) throw InvalidInput("noise_sigma must be >= 0");
    if (!(spec.noise_clip > 0.0)) throw InvalidInput("noise_clip must be positive");
    if (!(spec.max_translation >= 0.0) || !std::isfinite(spec.max_translation)) {
        throw InvalidInput("max_translation must be >= 0");
    }
}

GeneratedPair generate_pair(const PairSpec& spec) {
    validate(spec);
    const std::size_t k = spec.points_per_cloud;

    Rng shape_rng = make_rng(derive_seed(spec.seed, 1));
    const PointCloud complete = sample_complete_shape(spec.shape, 2 * k, shape_rng);
    const std::vector<Vec3> pts(complete.begin(), complete.end());

    Rng view_rng = make_rng(derive_seed(spec.seed, 2));
    std::vector<std::size_t> best_src, best_tgt;
    double best_fraction = -1.0;
    auto fraction = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
        return static_cast<double>(shared_count(a, b)) / static_cast<double>(k);
    };
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        const Vec3 v1 = random_unit_vector(view_rng);
        Vec3 axis = random_unit_vector(view_rng);
        axis -= axis.dot(v1) * v1;
        if (axis.norm() < 1e-6) continue;
        axis.normalize();
        const auto src_view = crop_view(pts, v1, k);
        auto view_at = [&](double angle) {
            return crop_view(pts, Eigen::AngleAxisd(angle, axis) * v1, k);
        };
        double lo = 0.0;
        double hi = kPi;
        auto lo_view = src_view;
        auto hi_view = view_at(hi);
        if (fraction(src_view, hi_view) < spec.overlap_target) {
            for (int it = 0; it < 40; ++it) {
                const double mid = 0.5 * (lo + hi);
                auto mid_view = view_at(mid);
                if (fraction(src_view, mid_view) >= spec.overlap_target) {
                    lo = mid;
                    lo_view = std::move(mid_view);
                } else {
                    hi = mid;
                    hi_view = std::move(mid_view);
                }
            }
        }
        for (const auto* cand : {&lo_view, &hi_view}) {
            const double f = fraction(src_view, *cand);
            if (best_fraction < 0.0 ||
                std::abs(f - spec.overlap_target) < std::abs(best_fraction - spec.overlap_target)) {
                best_fraction = f;
                best_src = src_view;
                best_tgt = *cand;
            }
        }
        if (std::abs(best_fraction - spec.overlap_target) <= kOverlapTolerance) break;
    }
    if (std::abs(best_fraction - spec.overlap_target) > kOverlapTolerance) {
        throw OverlapUnreachable("overlap target unreachable for this shape; best fraction " +
                                     std::to_string(best_fraction),
                                 best_fraction);
    }

    Rng pose_rng = make_rng(derive_seed(spec.seed, 3));
    const Mat3 rotation = random_rotation(spec.rot_level == 0 ? 45.0 : 360.0, pose_rng);
    const double m = spec.max_translation;
    const Vec3 translation = m > 0.0 ? Vec3(uniform(pose_rng, -m, m), uniform(pose_rng, -m, m), uniform(pose_rng, -m, m))
                                     : Vec3::Zero();

    GeneratedPair out;
    out.gt = RigidTransform(rotation, translation);
    out.category_id = spec.category_id;
    const RigidTransform to_source = invert(out.gt);
    out.src = add_noise(apply_transform(complete.select(best_src), to_source), spec.noise_sigma, spec.noise_clip,
                        derive_seed(spec.seed, 4));
    out.tgt = add_noise(complete.select(best_tgt), spec.noise_sigma, spec.noise_clip, derive_seed(spec.seed, 5));
    out.overlap_mask_src.reserve(k);
    for (auto i : best_src) out.overlap_mask_src.push_back(std::binary_search(best_tgt.begin(), best_tgt.end(), i));
    return out;
}

PointCloud add_noise(const PointCloud& cloud, double sigma, double clip, RngSeed seed) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidInput("noise sigma must be >= 0");
    if (!(clip > 0.0)) throw InvalidInput("noise clip must be positive");
    if (sigma == 0.0) return cloud;
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    std::vector<Vec3> out;
    out.reserve(cloud.size());
    for (const auto& p : cloud) {
        Vec3 q = p;
        for (int d = 0; d < 3; ++d) q[d] += std::clamp(normal(rng), -clip, clip);
        out.push_back(q);
    }
    return PointCloud(std::move(out));
}

std::vector<std::size_t> subsample_indices(std::size_t size, std::size_t n, RngSeed seed) {
    if (n < 1 || n > size) throw InvalidInput("subsample size must lie in [1, cloud size]");
    std::vector<std::size_t> all(size);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> out;
    out.reserve(n);
    Rng rng = make_rng(seed);
    std::sample(all.begin(), all.end(), std::back_inserter(out), n, rng);
    return out;
}

PointCloud subsample(const PointCloud& cloud, std::size_t n, RngSeed seed) {
    const auto idx = subsample_indices(cloud.size(), n, seed);
    return cloud.select(idx);
}

GeneratedPair subsample_pair(const GeneratedPair& pair, std::size_t n, RngSeed seed) {
    GeneratedPair out = pair;
    const auto keep = subsample_indices(pair.src.size(), n, derive_seed(seed, 101));
    out.src = pair.src.select(keep);
    out.overlap_mask_src.clear();
    for (auto k : keep) out.overlap_mask_src.push_back(pair.overlap_mask_src[k]);
    out.tgt = subsample(pair.tgt, n, derive_seed(seed, 102));
    return out;
}

}  // namespace regfuse
