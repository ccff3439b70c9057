#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "regfuse/geometry.hpp"

namespace regfuse {

struct Neighbor {
    std::size_t index = 0;
    double sq_distance = std::numeric_limits<double>::infinity();
};

/// Exact k-d tree over a fixed set of points of any dimension. Immutable
/// after construction, so one instance can serve concurrent queries.
/// Equidistant candidates resolve to the lower index, matching a linear scan.
class KdTree {
public:
    KdTree() = default;
    /// `data` is row-major, `count * dim` values.
    KdTree(std::vector<double> data, std::size_t dim);
    explicit KdTree(const PointCloud& cloud);

    std::size_t size() const { return count_; }
    std::size_t dim() const { return dim_; }
    const double* point(std::size_t i) const { return data_.data() + i * dim_; }

    Neighbor nearest(const double* query) const;
    Neighbor nearest(const Vec3& query) const { return nearest(query.data()); }
    /// The k nearest neighbors, ascending by distance then index.
    std::vector<Neighbor> knn(const double* query, std::size_t k) const;
    std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const { return knn(query.data(), k); }
    /// All points within `radius` (inclusive), ascending by index.
    std::vector<std::size_t> radius_search(const double* query, double radius) const;
    std::vector<std::size_t> radius_search(const Vec3& query, double radius) const {
        return radius_search(query.data(), radius);
    }

private:
    struct Node {
        std::size_t begin = 0;
        std::size_t end = 0;
        std::size_t split_dim = 0;
        double split_value = 0.0;
        int left = -1;
        int right = -1;
    };

    int build(std::size_t begin, std::size_t end);
    double sq_dist(const double* q, std::size_t i) const;
    template <class Visitor>
    void search(int node, const double* q, Visitor& visit, double& bound) const;

    std::vector<double> data_;
    std::size_t dim_ = 0;
    std::size_t count_ = 0;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
};

/// Reference linear scan with the same tie rule as KdTree::nearest.
Neighbor brute_force_nearest(std::span<const double> data, std::size_t dim, const double* query);

}  // namespace regfuse
