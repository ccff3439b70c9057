#include "regfuse/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "regfuse/error.hpp"
#include "regfuse/nn_index.hpp"

namespace regfuse {

double error_rot_isotropic(const Mat3& r_pred, const Mat3& r_gt) {
    return rotation_angle_deg(r_gt.transpose() * r_pred);
}

double error_trans_isotropic(const Vec3& t_pred, const Mat3& r_gt, const Vec3& t_gt) {
    return (r_gt.transpose() * (t_pred - t_gt)).lpNorm<1>();
}

EulerMae mae_euler(const Mat3& r_pred, const Mat3& r_gt) {
    const EulerZYX a = euler_from_rotation(r_pred);
    const EulerZYX b = euler_from_rotation(r_gt);
    const double sum = std::abs(a.yaw - b.yaw) + std::abs(a.pitch - b.pitch) + std::abs(a.roll - b.roll);
    return {sum / 3.0, a.gimbal_lock || b.gimbal_lock};
}

double mae_trans(const Vec3& t_pred, const Vec3& t_gt) { return (t_pred - t_gt).cwiseAbs().mean(); }

double challenge_mse(double error_r_deg, double error_t) { return deg2rad(error_r_deg) + error_t; }

PairMetrics evaluate_pair(const RigidTransform& predicted, const RigidTransform& ground_truth) {
    PairMetrics m;
    m.error_r_deg = error_rot_isotropic(predicted.rotation(), ground_truth.rotation());
    m.error_t = error_trans_isotropic(predicted.translation(), ground_truth.rotation(), ground_truth.translation());
    const auto euler = mae_euler(predicted.rotation(), ground_truth.rotation());
    m.mae_r_deg = euler.value;
    m.gimbal_lock = euler.gimbal_lock;
    m.mae_t = mae_trans(predicted.translation(), ground_truth.translation());
    m.mse = challenge_mse(m.error_r_deg, m.error_t);
    return m;
}

double mean_sq_nn_distance(const PointCloud& from, const KdTree& to_index) {
    if (from.empty() || to_index.size() == 0) throw InvalidInput("chamfer distance of an empty cloud");
    double sum = 0.0;
    for (const auto& p : from) sum += to_index.nearest(p).sq_distance;
    return sum / static_cast<double>(from.size());
}

double chamfer_distance(const PointCloud& a, const KdTree& a_index, const PointCloud& b, const KdTree& b_index) {
    return mean_sq_nn_distance(a, b_index) + mean_sq_nn_distance(b, a_index);
}

double chamfer_distance(const PointCloud& a, const PointCloud& b) {
    if (a.empty() || b.empty()) throw InvalidInput("chamfer distance of an empty cloud");
    return chamfer_distance(a, KdTree(a), b, KdTree(b));
}

}  // namespace regfuse
