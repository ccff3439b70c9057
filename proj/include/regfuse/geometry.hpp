#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "regfuse/rng.hpp"

namespace regfuse {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Ordered set of 3D points. Every coordinate is finite; construction rejects
/// NaN/inf. An empty cloud is representable, but operations that need points
/// check for it and throw.
class PointCloud {
public:
    PointCloud() = default;
    explicit PointCloud(std::vector<Vec3> points);

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const Vec3& operator[](std::size_t i) const { return points_[i]; }
    std::span<const Vec3> points() const { return points_; }
    auto begin() const { return points_.begin(); }
    auto end() const { return points_.end(); }

    Vec3 centroid() const;
    PointCloud select(std::span<const std::size_t> indices) const;

    friend bool operator==(const PointCloud& a, const PointCloud& b) { return a.points_ == b.points_; }

private:
    std::vector<Vec3> points_;
};

/// Element of SE(3). The rotation is checked on construction: RᵀR = I and
/// det R = +1, both within kRotationTolerance.
class RigidTransform {
public:
    static constexpr double kRotationTolerance = 1e-9;

    RigidTransform();
    RigidTransform(const Mat3& rotation, const Vec3& translation);

    static RigidTransform identity() { return {}; }
    /// Accepts a homogeneous matrix whose rotation block is within `tolerance`
    /// of SO(3) and projects it onto the nearest rotation. Throws otherwise.
    static RigidTransform from_matrix(const Mat4& m, double tolerance = 1e-4);

    const Mat3& rotation() const { return rotation_; }
    const Vec3& translation() const { return translation_; }
    Mat4 matrix() const;

    Vec3 operator()(const Vec3& p) const { return rotation_ * p + translation_; }

    friend bool operator==(const RigidTransform& a, const RigidTransform& b) {
        return a.rotation_ == b.rotation_ && a.translation_ == b.translation_;
    }

private:
    Mat3 rotation_;
    Vec3 translation_;
};

bool is_rotation(const Mat3& r, double tolerance = RigidTransform::kRotationTolerance);
/// Nearest proper rotation in the Frobenius sense.
Mat3 project_to_rotation(const Mat3& m);

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);
/// Returns A∘B: applying the result equals applying B first, then A.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

/// Rotation angle of R in degrees, in [0, 180].
double rotation_angle_deg(const Mat3& r);

Mat3 axis_angle_rotation(const Vec3& axis, double angle_deg);
inline Mat3 rot_z(double deg) { return axis_angle_rotation(Vec3::UnitZ(), deg); }
inline Mat3 rot_y(double deg) { return axis_angle_rotation(Vec3::UnitY(), deg); }
inline Mat3 rot_x(double deg) { return axis_angle_rotation(Vec3::UnitX(), deg); }

/// Bounded angles (< 180°) draw a uniform axis and a uniform angle in
/// [0, max_angle_deg]. 180° and above means unrestricted: a Haar-uniform
/// rotation from a uniform unit quaternion.
Mat3 random_rotation(double max_angle_deg, Rng& rng);
Mat3 random_rotation(double max_angle_deg, RngSeed seed);

Vec3 random_unit_vector(Rng& rng);

/// Intrinsic Z-Y-X Euler angles in degrees: R = Rz(yaw) * Ry(pitch) * Rx(roll).
struct EulerZYX {
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;
    /// |pitch| within 1e-6° of 90°. Roll is then pinned to 0 and yaw absorbs
    /// the remaining rotation about the shared axis.
    bool gimbal_lock = false;
};

EulerZYX euler_from_rotation(const Mat3& r);
Mat3 rotation_from_euler(const EulerZYX& e);

constexpr double kPi = 3.14159265358979323846;
constexpr double deg2rad(double d) { return d * kPi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace regfuse
