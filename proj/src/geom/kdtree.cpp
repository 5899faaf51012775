#include "refracta/geom/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace refracta {

PointIndex::PointIndex(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(points_.size());
    root_ = build(0, static_cast<int>(order_.size()));
}

int PointIndex::build(int begin, int end) {
    if (begin >= end) return -1;
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (int i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis;
    (hi - lo).maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
        const double pa = points_[a][axis], pb = points_[b][axis];
        return pa < pb || (pa == pb && a < b);
    });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({order_[mid], axis, -1, -1});
    const int l = build(begin, mid);
    const int r = build(mid + 1, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
}

void PointIndex::search(int node, const Vec3& q, Neighbor& best) const {
    if (node < 0) return;
    const Node& n = nodes_[node];
    const double d2 = (points_[n.point] - q).squaredNorm();
    if (d2 < best.distance_sq || (d2 == best.distance_sq && n.point < best.index)) best = {n.point, d2};
    const double diff = q[n.axis] - points_[n.point][n.axis];
    const int near = diff < 0.0 ? n.left : n.right, far = diff < 0.0 ? n.right : n.left;
    search(near, q, best);
    // <= keeps equal-distance candidates on the far side reachable for the tie rule
    if (diff * diff <= best.distance_sq) search(far, q, best);
}

Neighbor PointIndex::nearest(const Vec3& q) const {
    if (points_.empty()) throw ArgumentError("nearest neighbor query on an empty point index");
    Neighbor best{-1, std::numeric_limits<double>::infinity()};
    search(root_, q, best);
    return best;
}

Neighbor nearest_brute_force(const std::vector<Vec3>& points, const Vec3& q) {
    if (points.empty()) throw ArgumentError("nearest neighbor query on an empty point set");
    Neighbor best{-1, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double d2 = (points[i] - q).squaredNorm();
        if (d2 < best.distance_sq) best = {static_cast<int>(i), d2};
    }
    return best;
}

}  // namespace refracta
