#include "regfuse/nn_index.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

#include "regfuse/error.hpp"

namespace regfuse {
namespace {

constexpr std::size_t kLeafSize = 10;

bool closer(const Neighbor& a, const Neighbor& b) {
    return a.sq_distance < b.sq_distance || (a.sq_distance == b.sq_distance && a.index < b.index);
}

}  // namespace

KdTree::KdTree(std::vector<double> data, std::size_t dim) : data_(std::move(data)), dim_(dim) {
    if (dim_ == 0) throw InvalidInput("k-d tree dimension must be positive");
    if (data_.size() % dim_ != 0) throw InvalidInput("k-d tree data size is not a multiple of the dimension");
    count_ = data_.size() / dim_;
    order_.resize(count_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (count_ > 0) {
        nodes_.reserve(2 * count_ / kLeafSize + 2);
        build(0, count_);
    }
}

KdTree::KdTree(const PointCloud& cloud) : KdTree([&] {
    std::vector<double> d;
    d.reserve(cloud.size() * 3);
    for (const auto& p : cloud) d.insert(d.end(), {p.x(), p.y(), p.z()});
    return d;
}(), 3) {}

int KdTree::build(std::size_t begin, std::size_t end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    std::size_t best_dim = 0;
    double best_spread = -1.0;
    for (std::size_t d = 0; d < dim_; ++d) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t i = begin; i < end; ++i) {
            const double v = data_[order_[i] * dim_ + d];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo > best_spread) {
            best_spread = hi - lo;
            best_dim = d;
        }
    }
    if (best_spread <= 0.0) return id;  // all points coincide: keep as a leaf

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                         const double va = data_[a * dim_ + best_dim];
                         const double vb = data_[b * dim_ + best_dim];
                         return va < vb || (va == vb && a < b);
                     });
    const double split = data_[order_[mid] * dim_ + best_dim];
    nodes_[id].split_dim = best_dim;
    nodes_[id].split_value = split;
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

double KdTree::sq_dist(const double* q, std::size_t i) const {
    const double* p = point(i);
    double s = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
        const double diff = p[d] - q[d];
        s += diff * diff;
    }
    return s;
}

// Left subtree holds values <= split, right holds values >= split. A subtree
// is skipped only when its lower bound strictly exceeds `bound`, so
// equidistant points are always visited and the tie rule stays exact.
template <class Visitor>
void KdTree::search(int node_id, const double* q, Visitor& visit, double& bound) const {
    const Node& node = nodes_[node_id];
    if (node.left < 0) {
        for (std::size_t i = node.begin; i < node.end; ++i) {
            const std::size_t idx = order_[i];
            visit(idx, sq_dist(q, idx));
        }
        return;
    }
    const double diff = q[node.split_dim] - node.split_value;
    const int near = diff <= 0.0 ? node.left : node.right;
    const int far = diff <= 0.0 ? node.right : node.left;
    search(near, q, visit, bound);
    if (diff * diff <= bound) search(far, q, visit, bound);
}

Neighbor KdTree::nearest(const double* query) const {
    if (count_ == 0) throw InvalidInput("nearest-neighbor query on an empty index");
    Neighbor best;
    double bound = std::numeric_limits<double>::infinity();
    auto visit = [&](std::size_t idx, double d) {
        const Neighbor cand{idx, d};
        if (closer(cand, best)) {
            best = cand;
            bound = d;
        }
    };
    search(0, query, visit, bound);
    return best;
}

std::vector<Neighbor> KdTree::knn(const double* query, std::size_t k) const {
    if (count_ == 0) throw InvalidInput("nearest-neighbor query on an empty index");
    k = std::min(k, count_);
    if (k == 0) return {};
    // Max-heap on (distance, index): the top is the current worst kept.
    std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(&closer)> heap(&closer);
    double bound = std::numeric_limits<double>::infinity();
    auto visit = [&](std::size_t idx, double d) {
        const Neighbor cand{idx, d};
        if (heap.size() < k) {
            heap.push(cand);
        } else if (closer(cand, heap.top())) {
            heap.pop();
            heap.push(cand);
        } else {
            return;
        }
        if (heap.size() == k) bound = heap.top().sq_distance;
    };
    search(0, query, visit, bound);
    std::vector<Neighbor> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
        out.push_back(heap.top());
        heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> KdTree::radius_search(const double* query, double radius) const {
    std::vector<std::size_t> out;
    if (count_ == 0) return out;
    double bound = radius * radius;
    auto visit = [&](std::size_t idx, double d) {
        if (d <= bound) out.push_back(idx);
    };
    search(0, query, visit, bound);
    std::sort(out.begin(), out.end());
    return out;
}

Neighbor brute_force_nearest(std::span<const double> data, std::size_t dim, const double* query) {
    Neighbor best;
    const std::size_t n = data.size() / dim;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = data[i * dim + d] - query[d];
            s += diff * diff;
        }
        if (closer(Neighbor{i, s}, best)) best = Neighbor{i, s};
    }
    return best;
}

}  // namespace regfuse
