#pragma once

#include "refracta/geom/camera.hpp"
#include "refracta/geom/mesh.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace refracta {

struct Hit {
    double t = 0.0;
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();  // barycentric-interpolated, renormalized
    int face = -1;
    double b1 = 0.0, b2 = 0.0;  // barycentrics of vertices 1 and 2
};

struct ClosestPoint {
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    double distance_sq = 0.0;
    int face = -1;
};

/// Möller-Trumbore; returns t and barycentrics when the ray hits the triangle
/// with t in (t_min, t_max).
bool intersect_triangle(const Vec3& a, const Vec3& b, const Vec3& c, const Ray& ray, double t_min, double t_max,
                        double& t, double& b1, double& b2);

/// Closest point on triangle (a, b, c) to p, with barycentrics of b and c.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, double& b1, double& b2);

/// Bounding-volume hierarchy over the triangles of one mesh. Owns a copy of
/// the mesh; immutable after construction, queries are thread-safe.
class AccelIndex {
public:
    explicit AccelIndex(TriangleMesh mesh);

    const TriangleMesh& mesh() const { return mesh_; }
    const Aabb& bounds() const { return nodes_.front().box; }
    double diagonal() const { return bounds().diagonal(); }

    /// Nearest hit with t in (t_min, t_max). Equal-t ties resolve to the lower face id.
    std::optional<Hit> intersect(const Ray& ray, double t_min,
                                 double t_max = std::numeric_limits<double>::infinity()) const;
    bool occluded(const Ray& ray, double t_min, double t_max) const;
    ClosestPoint closest_point(const Vec3& p) const;

    /// Structural check used by tests: every triangle appears in exactly one
    /// leaf and every node box contains its children.
    bool check_structure() const;

private:
    struct Node {
        Aabb box;
        int left = -1;   // interior: index of first child (second is left + 1)
        int first = 0;   // leaf: offset into order_
        int count = 0;   // leaf when > 0
    };

    int build(int begin, int end, std::vector<Aabb>& tri_boxes, std::vector<Vec3>& centroids);
    Hit make_hit(const Ray& ray, int face, double t, double b1, double b2) const;

    TriangleMesh mesh_;
    std::vector<Node> nodes_;
    std::vector<int> order_;
};

/// Exhaustive all-triangle scan with the same tie rule as AccelIndex.
std::optional<Hit> intersect_brute_force(const TriangleMesh& mesh, const Ray& ray, double t_min);
ClosestPoint closest_point_brute_force(const TriangleMesh& mesh, const Vec3& p);

/// Closed surface that can be ray traced: either a mesh or an analytic sphere.
class Surface {
public:
    virtual ~Surface() = default;
    virtual std::optional<Hit> intersect(const Ray& ray, double t_min) const = 0;
    virtual double diagonal() const = 0;
};

class MeshSurface final : public Surface {
public:
    explicit MeshSurface(std::shared_ptr<const AccelIndex> index) : index_(std::move(index)) {}
    explicit MeshSurface(TriangleMesh mesh) : index_(std::make_shared<AccelIndex>(std::move(mesh))) {}
    std::optional<Hit> intersect(const Ray& ray, double t_min) const override { return index_->intersect(ray, t_min); }
    double diagonal() const override { return index_->diagonal(); }
    const AccelIndex& index() const { return *index_; }

private:
    std::shared_ptr<const AccelIndex> index_;
};

class SphereSurface final : public Surface {
public:
    SphereSurface(Vec3 center, double radius) : center_(std::move(center)), radius_(radius) {}
    std::optional<Hit> intersect(const Ray& ray, double t_min) const override;
    double diagonal() const override { return 2.0 * std::sqrt(3.0) * radius_; }
    const Vec3& center() const { return center_; }
    double radius() const { return radius_; }

private:
    Vec3 center_;
    double radius_;
};

}  // namespace refracta
