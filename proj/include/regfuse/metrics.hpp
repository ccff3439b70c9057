#pragma once

#include "regfuse/geometry.hpp"

namespace regfuse {

class KdTree;

/// Per-pair evaluation quantities, all in model units or degrees.
struct PairMetrics {
    double error_r_deg = 0.0;
    double error_t = 0.0;
    double mae_r_deg = 0.0;
    double mae_t = 0.0;
    double mse = 0.0;
    /// Either Euler decomposition hit gimbal lock; mae_r_deg used the
    /// canonical branch.
    bool gimbal_lock = false;
};

/// Geodesic angle between the predicted and ground-truth rotations,
/// arccos((tr(R_gt⁻¹ R_pred) − 1) / 2) in degrees.
double error_rot_isotropic(const Mat3& r_pred, const Mat3& r_gt);

/// ‖R_gt⁻¹ (t_pred − t_gt)‖₁.
double error_trans_isotropic(const Vec3& t_pred, const Mat3& r_gt, const Vec3& t_gt);

struct EulerMae {
    double value = 0.0;
    bool gimbal_lock = false;
};

/// Mean absolute difference of Z-Y-X Euler angles (degrees), no wrapping.
EulerMae mae_euler(const Mat3& r_pred, const Mat3& r_gt);
double mae_trans(const Vec3& t_pred, const Vec3& t_gt);

/// Challenge score: rotation error in radians plus the isotropic
/// translation error.
double challenge_mse(double error_r_deg, double error_t);

PairMetrics evaluate_pair(const RigidTransform& predicted, const RigidTransform& ground_truth);

/// Symmetric mean of squared nearest-neighbor distances.
double chamfer_distance(const PointCloud& a, const PointCloud& b);
/// Variant reusing prebuilt indices over `a` and `b`.
double chamfer_distance(const PointCloud& a, const KdTree& a_index, const PointCloud& b, const KdTree& b_index);

/// One-directional half: mean over `from` of the squared distance to the
/// nearest point of `to_index`.
double mean_sq_nn_distance(const PointCloud& from, const KdTree& to_index);

}  // namespace regfuse
