#pragma once

#include "refracta/common.hpp"

#include <vector>

namespace refracta {

struct Neighbor {
    int index = -1;
    double distance_sq = 0.0;
};

/// Static 3-d tree over a point set. Nearest-neighbor ties resolve to the lower index.
class PointIndex {
public:
    PointIndex() = default;
    explicit PointIndex(std::vector<Vec3> points);

    const std::vector<Vec3>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }

    /// Throws ArgumentError on an empty index.
    Neighbor nearest(const Vec3& q) const;

private:
    struct Node {
        int point = -1;  // index into points_
        int axis = 0;
        int left = -1, right = -1;
    };
    int build(int begin, int end);
    void search(int node, const Vec3& q, Neighbor& best) const;

    std::vector<Vec3> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

/// O(n) scan with the same tie rule.
Neighbor nearest_brute_force(const std::vector<Vec3>& points, const Vec3& q);

}  // namespace refracta
