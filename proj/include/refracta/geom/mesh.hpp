#pragma once

#include "refracta/common.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace refracta {

/// Indexed triangle surface with per-vertex unit normals.
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<Vec3> normals;
    std::vector<Tri> triangles;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t triangle_count() const { return triangles.size(); }
    bool empty() const { return triangles.empty(); }

    Vec3 face_normal(std::size_t f) const;
    double face_area(std::size_t f) const;

    friend bool operator==(const TriangleMesh&, const TriangleMesh&) = default;
};

struct Aabb {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void extend(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void extend(const Aabb& b) {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
    bool valid() const { return (lo.array() <= hi.array()).all(); }
    Vec3 center() const { return 0.5 * (lo + hi); }
    Vec3 extent() const { return hi - lo; }
    double diagonal() const { return valid() ? extent().norm() : 0.0; }
    bool contains(const Vec3& p) const { return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all(); }
};

Aabb bounds(const TriangleMesh& mesh);

/// Area-weighted vertex normals from the current geometry.
void compute_vertex_normals(TriangleMesh& mesh);

/// Throws ArgumentError on out-of-range indices or mismatched normal count.
void validate_mesh(const TriangleMesh& mesh);

double signed_volume(const TriangleMesh& mesh);
double surface_area(const TriangleMesh& mesh);

/// Every undirected edge is shared by exactly two triangles, traversed in
/// opposite directions.
bool is_watertight(const TriangleMesh& mesh);

/// V - E + F over the referenced vertices.
long euler_characteristic(const TriangleMesh& mesh);

/// Reverses the winding of every triangle and negates normals.
void flip_orientation(TriangleMesh& mesh);

/// Unit-sphere triangulation by subdividing an icosahedron `level` times.
TriangleMesh make_icosphere(int level, double radius = 1.0, const Vec3& center = Vec3::Zero());
TriangleMesh make_octahedron(double radius = 1.0);

/// Merges vertices with identical positions (exact match).
void weld_vertices(TriangleMesh& mesh);

}  // namespace refracta

namespace refracta {

struct SurfaceSamples {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<int> faces;
};

/// Area-weighted uniform samples; sample i depends only on (seed, i).
/// Normals are interpolated vertex normals when `interpolate` and the mesh has
/// them, face normals otherwise. Throws ArgumentError on a zero-area mesh.
SurfaceSamples sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed, bool interpolate = true);

}  // namespace refracta
