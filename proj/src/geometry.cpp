#include "regfuse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "regfuse/error.hpp"

namespace regfuse {

PointCloud::PointCloud(std::vector<Vec3> points) : points_(std::move(points)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!points_[i].allFinite()) {
            throw InvalidInput("point " + std::to_string(i) + " has a non-finite coordinate");
        }
    }
}

Vec3 PointCloud::centroid() const {
    if (points_.empty()) throw InvalidInput("centroid of an empty cloud");
    Vec3 sum = Vec3::Zero();
    for (const auto& p : points_) sum += p;
    return sum / static_cast<double>(points_.size());
}

PointCloud PointCloud::select(std::span<const std::size_t> indices) const {
    std::vector<Vec3> out;
    out.reserve(indices.size());
    for (auto i : indices) {
        if (i >= points_.size()) throw InvalidInput("point index out of range");
        out.push_back(points_[i]);
    }
    PointCloud c;
    c.points_ = std::move(out);
    return c;
}

bool is_rotation(const Mat3& r, double tolerance) {
    if (!r.allFinite()) return false;
    const Mat3 gram = r.transpose() * r;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tolerance) return false;
    return std::abs(r.determinant() - 1.0) <= tolerance;
}

Mat3 project_to_rotation(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    return svd.matrixU() * d * svd.matrixV().transpose();
}

RigidTransform::RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
    if (!is_rotation(rotation_)) throw InvalidInput("rotation is not in SO(3)");
    if (!translation_.allFinite()) throw InvalidInput("translation has a non-finite entry");
}

RigidTransform RigidTransform::from_matrix(const Mat4& m, double tolerance) {
    if (!m.allFinite()) throw InvalidInput("transform matrix has a non-finite entry");
    const Eigen::RowVector4d last = m.row(3);
    if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > tolerance) {
        throw InvalidInput("homogeneous matrix last row is not 0 0 0 1");
    }
    const Mat3 r = m.topLeftCorner<3, 3>();
    if (!is_rotation(r, tolerance)) throw InvalidInput("rotation block is not a rotation");
    return RigidTransform(project_to_rotation(r), m.topRightCorner<3, 1>());
}

Mat4 RigidTransform::matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
    std::vector<Vec3> out;
    out.reserve(cloud.size());
    for (const auto& p : cloud) out.push_back(t(p));
    return PointCloud(std::move(out));
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    return RigidTransform(a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation());
}

RigidTransform invert(const RigidTransform& t) {
    const Mat3 rt = t.rotation().transpose();
    return RigidTransform(rt, -(rt * t.translation()));
}

// Equal to arccos(clamp((tr R - 1) / 2)) on SO(3), but well conditioned at
// 0 and 180 degrees where arccos loses about half the significant digits.
double rotation_angle_deg(const Mat3& r) {
    const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
    const Vec3 skew(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    const double s = std::min(0.5 * skew.norm(), 1.0);
    return rad2deg(std::atan2(s, c));
}

Mat3 axis_angle_rotation(const Vec3& axis, double angle_deg) {
    return Eigen::AngleAxisd(deg2rad(angle_deg), axis.normalized()).toRotationMatrix();
}

Vec3 random_unit_vector(Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
        Vec3 v(normal(rng), normal(rng), normal(rng));
        const double n = v.norm();
        if (n > 1e-12) return v / n;
    }
}

Mat3 random_rotation(double max_angle_deg, Rng& rng) {
    if (!std::isfinite(max_angle_deg) || max_angle_deg < 0.0 || max_angle_deg > 360.0) {
        throw InvalidInput("max_angle_deg must lie in [0, 360]");
    }
    if (max_angle_deg == 0.0) return Mat3::Identity();
    if (max_angle_deg >= 180.0) {
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::Vector4d q;
        do {
            q = Eigen::Vector4d(normal(rng), normal(rng), normal(rng), normal(rng));
        } while (q.norm() < 1e-12);
        q.normalize();
        const Mat3 r = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
        return project_to_rotation(r);
    }
    const Vec3 axis = random_unit_vector(rng);
    std::uniform_real_distribution<double> uniform(0.0, max_angle_deg);
    return axis_angle_rotation(axis, uniform(rng));
}

Mat3 random_rotation(double max_angle_deg, RngSeed seed) {
    Rng rng = make_rng(seed);
    return random_rotation(max_angle_deg, rng);
}

EulerZYX euler_from_rotation(const Mat3& r) {
    EulerZYX e;
    const double s = std::clamp(-r(2, 0), -1.0, 1.0);
    e.pitch = rad2deg(std::asin(s));
    if (std::abs(std::abs(e.pitch) - 90.0) < 1e-6) {
        e.gimbal_lock = true;
        e.pitch = std::copysign(90.0, s);
        e.roll = 0.0;
        e.yaw = rad2deg(std::atan2(-r(0, 1), r(1, 1)));
        return e;
    }
    e.yaw = rad2deg(std::atan2(r(1, 0), r(0, 0)));
    e.roll = rad2deg(std::atan2(r(2, 1), r(2, 2)));
    return e;
}

Mat3 rotation_from_euler(const EulerZYX& e) {
    return rot_z(e.yaw) * rot_y(e.pitch) * rot_x(e.roll);
}

}  // namespace regfuse
