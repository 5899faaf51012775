#include "refracta/geom/mesh.hpp"

#include "refracta/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <unordered_map>

namespace refracta {

Vec3 TriangleMesh::face_normal(std::size_t f) const {
    const Tri& t = triangles[f];
    return (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).normalized();
}

double TriangleMesh::face_area(std::size_t f) const {
    const Tri& t = triangles[f];
    return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

Aabb bounds(const TriangleMesh& mesh) {
    Aabb b;
    for (const Vec3& v : mesh.vertices) b.extend(v);
    return b;
}

void compute_vertex_normals(TriangleMesh& mesh) {
    std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
    for (const Tri& t : mesh.triangles) {
        const Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        for (int k = 0; k < 3; ++k) acc[t[k]] += n;
    }
    mesh.normals.resize(mesh.vertices.size());
    for (std::size_t i = 0; i < acc.size(); ++i) {
        const double n = acc[i].norm();
        mesh.normals[i] = n > 0.0 ? Vec3(acc[i] / n) : Vec3::UnitZ();
    }
}

void validate_mesh(const TriangleMesh& mesh) {
    const auto nv = static_cast<int>(mesh.vertices.size());
    for (const Tri& t : mesh.triangles)
        for (int k : t)
            if (k < 0 || k >= nv) throw ArgumentError("mesh: triangle index out of range");
    if (!mesh.normals.empty() && mesh.normals.size() != mesh.vertices.size())
        throw ArgumentError("mesh: normal count differs from vertex count");
}

double signed_volume(const TriangleMesh& mesh) {
    double v = 0.0;
    for (const Tri& t : mesh.triangles)
        v += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
    return v / 6.0;
}

double surface_area(const TriangleMesh& mesh) {
    double a = 0.0;
    for (std::size_t f = 0; f < mesh.triangles.size(); ++f) a += mesh.face_area(f);
    return a;
}

namespace {

std::uint64_t edge_key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

bool is_watertight(const TriangleMesh& mesh) {
    if (mesh.triangles.empty()) return false;
    std::unordered_map<std::uint64_t, int> directed;
    directed.reserve(mesh.triangles.size() * 3);
    for (const Tri& t : mesh.triangles)
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            if (a == b) return false;
            if (++directed[edge_key(a, b)] > 1) return false;
        }
    for (const auto& [key, count] : directed) {
        const int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
        if (!directed.count(edge_key(b, a))) return false;
    }
    return true;
}

long euler_characteristic(const TriangleMesh& mesh) {
    std::vector<char> used(mesh.vertices.size(), 0);
    std::unordered_map<std::uint64_t, int> edges;
    for (const Tri& t : mesh.triangles)
        for (int k = 0; k < 3; ++k) {
            used[t[k]] = 1;
            const int a = std::min(t[k], t[(k + 1) % 3]), b = std::max(t[k], t[(k + 1) % 3]);
            edges[edge_key(a, b)] = 1;
        }
    const long v = std::count(used.begin(), used.end(), 1);
    return v - static_cast<long>(edges.size()) + static_cast<long>(mesh.triangles.size());
}

void flip_orientation(TriangleMesh& mesh) {
    for (Tri& t : mesh.triangles) std::swap(t[1], t[2]);
    for (Vec3& n : mesh.normals) n = -n;
}

TriangleMesh make_octahedron(double radius) {
    TriangleMesh m;
    m.vertices = {Vec3(radius, 0, 0), Vec3(-radius, 0, 0), Vec3(0, radius, 0),
                  Vec3(0, -radius, 0), Vec3(0, 0, radius), Vec3(0, 0, -radius)};
    m.triangles = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    compute_vertex_normals(m);
    return m;
}

TriangleMesh make_icosphere(int level, double radius, const Vec3& center) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (Vec3& p : v) p.normalize();
    std::vector<Tri> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                          {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                          {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            v.push_back((v[a] + v[b]).normalized());
            const int id = static_cast<int>(v.size()) - 1;
            mid.emplace(key, id);
            return id;
        };
        std::vector<Tri> next;
        next.reserve(f.size() * 4);
        for (const Tri& tri : f) {
            const int a = midpoint(tri[0], tri[1]), b = midpoint(tri[1], tri[2]), c = midpoint(tri[2], tri[0]);
            next.push_back({tri[0], a, c});
            next.push_back({tri[1], b, a});
            next.push_back({tri[2], c, b});
            next.push_back({a, b, c});
        }
        f = std::move(next);
    }
    TriangleMesh m;
    m.normals = v;
    for (Vec3& p : v) p = center + radius * p;
    m.vertices = std::move(v);
    m.triangles = std::move(f);
    return m;
}

void weld_vertices(TriangleMesh& mesh) {
    std::map<std::array<double, 3>, int> index;
    std::vector<int> remap(mesh.vertices.size());
    TriangleMesh out;
    const bool has_normals = mesh.normals.size() == mesh.vertices.size();
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& p = mesh.vertices[i];
        auto [it, inserted] = index.emplace(std::array<double, 3>{p.x(), p.y(), p.z()}, 0);
        if (inserted) {
            it->second = static_cast<int>(out.vertices.size());
            out.vertices.push_back(p);
            if (has_normals) out.normals.push_back(mesh.normals[i]);
        }
        remap[i] = it->second;
    }
    for (const Tri& t : mesh.triangles) {
        Tri r{remap[t[0]], remap[t[1]], remap[t[2]]};
        if (r[0] != r[1] && r[1] != r[2] && r[0] != r[2]) out.triangles.push_back(r);
    }
    mesh = std::move(out);
}

}  // namespace refracta

namespace refracta {

SurfaceSamples sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed, bool interpolate) {
    validate_mesh(mesh);
    std::vector<double> cdf(mesh.triangle_count());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.triangle_count(); ++f) {
        total += mesh.face_area(f);
        cdf[f] = total;
    }
    if (!(total > 0.0)) throw ArgumentError("sample_surface: mesh has zero area");
    const bool smooth = interpolate && mesh.normals.size() == mesh.vertices.size();
    SurfaceSamples s;
    s.points.resize(n);
    s.normals.resize(n);
    s.faces.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(seed, i);
        const double pick = rng.uniform() * total;
        std::size_t f = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), pick) - cdf.begin());
        f = std::min(f, cdf.size() - 1);
        while (mesh.face_area(f) <= 0.0 && f > 0) --f;
        const double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
        const double a = 1.0 - r1, b = r1 * (1.0 - r2), c = r1 * r2;
        const Tri& t = mesh.triangles[f];
        s.points[i] = a * mesh.vertices[t[0]] + b * mesh.vertices[t[1]] + c * mesh.vertices[t[2]];
        Vec3 nrm = smooth ? Vec3(a * mesh.normals[t[0]] + b * mesh.normals[t[1]] + c * mesh.normals[t[2]]) : Vec3::Zero();
        s.normals[i] = nrm.norm() > 1e-12 ? nrm.normalized() : mesh.face_normal(f);
        s.faces[i] = static_cast<int>(f);
    }
    return s;
}

}  // namespace refracta
