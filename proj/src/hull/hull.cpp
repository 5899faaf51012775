#include "refracta/hull/hull.hpp"

#include "refracta/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

namespace refracta {

// ------------------------------------------------------------ OccupancyVolume

Aabb OccupancyVolume::bounds() const {
    Aabb b;
    b.extend(lo);
    b.extend(lo + h * Vec3(nx, ny, nz));
    return b;
}

std::size_t OccupancyVolume::occupied() const {
    return static_cast<std::size_t>(std::count_if(occ.begin(), occ.end(), [](std::uint8_t v) { return v != 0; }));
}

double OccupancyVolume::volume() const { return static_cast<double>(occupied()) * h * h * h; }

bool OccupancyVolume::contains(const Vec3& p, double tolerance) const {
    const Vec3 q = (p - lo) / h;
    const double r = tolerance / h;
    const int i0 = std::max(0, static_cast<int>(std::floor(q.x() - r)));
    const int j0 = std::max(0, static_cast<int>(std::floor(q.y() - r)));
    const int k0 = std::max(0, static_cast<int>(std::floor(q.z() - r)));
    const int i1 = std::min(nx - 1, static_cast<int>(std::floor(q.x() + r)));
    const int j1 = std::min(ny - 1, static_cast<int>(std::floor(q.y() + r)));
    const int k1 = std::min(nz - 1, static_cast<int>(std::floor(q.z() + r)));
    for (int k = k0; k <= k1; ++k)
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                if (!at(i, j, k)) continue;
                const Vec3 below = (Vec3(i, j, k) - q).cwiseMax(Vec3::Zero());
                const Vec3 above = (q - Vec3(i + 1, j + 1, k + 1)).cwiseMax(Vec3::Zero());
                if ((below + above).norm() <= r) return true;
            }
    return false;
}

// ------------------------------------------------------------ carving

namespace {

/// Summed-area table of a mask for O(1) rectangle queries.
class MaskIntegral {
public:
    explicit MaskIntegral(const MaskBuffer& m) : w_(m.width()), h_(m.height()), s_((w_ + 1) * (h_ + 1), 0) {
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x)
                s_[(y + 1) * (w_ + 1) + x + 1] = (m(x, y) ? 1 : 0) + s_[y * (w_ + 1) + x + 1] +
                                                 s_[(y + 1) * (w_ + 1) + x] - s_[y * (w_ + 1) + x];
    }
    /// Any set pixel in the inclusive pixel rectangle.
    bool any(int x0, int y0, int x1, int y1) const {
        x0 = std::max(x0, 0);
        y0 = std::max(y0, 0);
        x1 = std::min(x1, w_ - 1);
        y1 = std::min(y1, h_ - 1);
        if (x0 > x1 || y0 > y1) return false;
        const long v = s_[(y1 + 1) * (w_ + 1) + x1 + 1] - s_[y0 * (w_ + 1) + x1 + 1] - s_[(y1 + 1) * (w_ + 1) + x0] +
                       s_[y0 * (w_ + 1) + x0];
        return v > 0;
    }

private:
    int w_, h_;
    std::vector<long> s_;
};

/// Conservative test: can any point of the box project into the mask (or out of frame)?
/// `seen` is incremented when some point of the box may project onto a mask pixel.
bool box_survives(const Aabb& box, const Camera& cam, const MaskIntegral& mask, int& seen) {
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    const Mat3 Rt = cam.rotation.transpose();
    int behind = 0;
    for (int c = 0; c < 8; ++c) {
        const Vec3 p((c & 1) ? box.hi.x() : box.lo.x(), (c & 2) ? box.hi.y() : box.lo.y(),
                     (c & 4) ? box.hi.z() : box.lo.z());
        const Vec3 q = Rt * (p - cam.center);
        if (q.z() <= 1e-12) {
            ++behind;
            continue;
        }
        const double u = cam.fx * q.x() / q.z() + cam.cx, v = cam.fy * q.y() / q.z() + cam.cy;
        x0 = std::min(x0, u);
        x1 = std::max(x1, u);
        y0 = std::min(y0, v);
        y1 = std::max(y1, v);
    }
    if (behind > 0) return true;
    const bool hit = mask.any(static_cast<int>(std::floor(x0)), static_cast<int>(std::floor(y0)),
                              static_cast<int>(std::floor(x1)), static_cast<int>(std::floor(y1)));
    seen += hit;
    if (x0 < 0 || y0 < 0 || x1 >= cam.width || y1 >= cam.height) return true;
    return hit;
}

void check_views(const std::vector<MaskBuffer>& masks, const std::vector<Camera>& cameras) {
    if (masks.size() != cameras.size()) throw ArgumentError("carve: mask and camera counts differ");
    if (masks.empty()) throw ArgumentError("carve: at least one view is required");
    for (std::size_t v = 0; v < masks.size(); ++v) {
        cameras[v].validate();
        if (masks[v].width() != cameras[v].width || masks[v].height() != cameras[v].height)
            throw ArgumentError("carve: mask " + std::to_string(v) + " does not match its camera");
    }
}

}  // namespace

Aabb fit_bounds(const std::vector<MaskBuffer>& masks, const std::vector<Camera>& cameras) {
    check_views(masks, cameras);
    double span = 0.0;
    for (const Camera& a : cameras)
        for (const Camera& b : cameras) span = std::max(span, (a.center - b.center).norm());
    if (span <= 0.0) span = 1.0;
    Aabb box;
    for (std::size_t v = 0; v < cameras.size(); ++v) {
        const Camera& c = cameras[v];
        box.extend(c.center);
        for (const Vec2& px : {Vec2(0, 0), Vec2(c.width, 0), Vec2(0, c.height), Vec2(c.width, c.height)}) {
            const Ray r = camera_ray(c, px);
            box.extend(r.origin + 2.0 * span * r.dir / r.dir.dot(c.forward()));
        }
    }
    std::vector<MaskIntegral> integrals;
    integrals.reserve(masks.size());
    for (const MaskBuffer& m : masks) integrals.emplace_back(m);

    const int quorum = static_cast<int>((cameras.size() + 1) / 2);
    constexpr int kCells = 48;
    for (int pass = 0; pass < 4; ++pass) {
        const Vec3 ext = box.extent();
        const Vec3 cell = ext / kCells;
        std::vector<std::uint8_t> keep(static_cast<std::size_t>(kCells) * kCells * kCells, 0);
        parallel_for(keep.size(), [&](std::size_t n) {
            const int i = static_cast<int>(n % kCells), j = static_cast<int>((n / kCells) % kCells),
                      k = static_cast<int>(n / (kCells * kCells));
            Aabb b;
            b.lo = box.lo + cell.cwiseProduct(Vec3(i, j, k));
            b.hi = b.lo + cell;
            int seen = 0;
            for (std::size_t v = 0; v < cameras.size(); ++v)
                if (!box_survives(b, cameras[v], integrals[v], seen)) return;
            keep[n] = seen >= quorum;
        }, 64);
        Aabb next;
        for (std::size_t n = 0; n < keep.size(); ++n) {
            if (!keep[n]) continue;
            const int i = static_cast<int>(n % kCells), j = static_cast<int>((n / kCells) % kCells),
                      k = static_cast<int>(n / (kCells * kCells));
            next.extend(box.lo + cell.cwiseProduct(Vec3(i - 1, j - 1, k - 1)));
            next.extend(box.lo + cell.cwiseProduct(Vec3(i + 2, j + 2, k + 2)));
        }
        if (!next.valid()) throw DataError("empty hull");
        box = next;
    }
    return box;
}

OccupancyVolume carve(const std::vector<MaskBuffer>& masks, const std::vector<Camera>& cameras, int resolution,
                      std::optional<Aabb> bounds) {
    check_views(masks, cameras);
    if (resolution < 16) throw ArgumentError("carve: resolution must be at least 16");
    const Aabb box = bounds ? *bounds : fit_bounds(masks, cameras);
    if (!box.valid() || box.extent().minCoeff() <= 0.0) throw ArgumentError("carve: bounds are empty");
    OccupancyVolume vol;
    vol.h = box.extent().maxCoeff() / resolution;
    vol.nx = std::max(1, static_cast<int>(std::ceil(box.extent().x() / vol.h - 1e-9)));
    vol.ny = std::max(1, static_cast<int>(std::ceil(box.extent().y() / vol.h - 1e-9)));
    vol.nz = std::max(1, static_cast<int>(std::ceil(box.extent().z() / vol.h - 1e-9)));
    vol.lo = box.center() - 0.5 * vol.h * Vec3(vol.nx, vol.ny, vol.nz);
    vol.occ.assign(static_cast<std::size_t>(vol.nx) * vol.ny * vol.nz, 0);
    parallel_for(vol.occ.size(), [&](std::size_t n) {
        const int i = static_cast<int>(n % vol.nx), j = static_cast<int>((n / vol.nx) % vol.ny),
                  k = static_cast<int>(n / (static_cast<std::size_t>(vol.nx) * vol.ny));
        const Vec3 p = vol.center(i, j, k);
        for (std::size_t v = 0; v < cameras.size(); ++v) {
            auto proj = project(cameras[v], p);
            if (!proj) continue;
            const int x = static_cast<int>(proj->pixel.x()), y = static_cast<int>(proj->pixel.y());
            if (!masks[v](x, y)) return;
        }
        vol.occ[n] = 1;
    }, 1024);
    if (vol.occupied() == 0) throw DataError("empty hull");
    return vol;
}

std::size_t keep_largest_component(OccupancyVolume& vol) {
    std::vector<int> label(vol.occ.size(), -1);
    std::vector<std::size_t> sizes;
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < vol.occ.size(); ++s) {
        if (!vol.occ[s] || label[s] >= 0) continue;
        const int id = static_cast<int>(sizes.size());
        std::size_t count = 0;
        label[s] = id;
        stack.push_back(s);
        while (!stack.empty()) {
            const std::size_t n = stack.back();
            stack.pop_back();
            ++count;
            const int i = static_cast<int>(n % vol.nx), j = static_cast<int>((n / vol.nx) % vol.ny),
                      k = static_cast<int>(n / (static_cast<std::size_t>(vol.nx) * vol.ny));
            const int nb[6][3] = {{i - 1, j, k}, {i + 1, j, k}, {i, j - 1, k}, {i, j + 1, k}, {i, j, k - 1}, {i, j, k + 1}};
            for (const auto& q : nb) {
                if (q[0] < 0 || q[1] < 0 || q[2] < 0 || q[0] >= vol.nx || q[1] >= vol.ny || q[2] >= vol.nz) continue;
                const std::size_t m = vol.index(q[0], q[1], q[2]);
                if (vol.occ[m] && label[m] < 0) {
                    label[m] = id;
                    stack.push_back(m);
                }
            }
        }
        sizes.push_back(count);
    }
    if (sizes.size() <= 1) return 0;
    const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    std::size_t removed = 0;
    for (std::size_t n = 0; n < vol.occ.size(); ++n)
        if (vol.occ[n] && label[n] != best) {
            vol.occ[n] = 0;
            ++removed;
        }
    return removed;
}

// ------------------------------------------------------------ marching cubes

namespace {

struct McCase {
    std::vector<std::vector<int>> loops;  // edge ids in traversal order
    std::vector<std::array<int, 3>> tris; // edge id, or 12 + loop index for a loop centroid
};

struct McTable {
    std::array<std::array<int, 2>, 12> edge_corners{};
    std::array<int, 12> edge_axis{};
    std::array<McCase, 256> cases;

    static Vec3 corner_pos(int c) { return Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1); }

    McTable() {
        int e = 0;
        for (int axis = 0; axis < 3; ++axis)
            for (int c = 0; c < 8; ++c)
                if (!((c >> axis) & 1)) {
                    edge_corners[e] = {c, c | (1 << axis)};
                    edge_axis[e] = axis;
                    ++e;
                }
        for (int cfg = 0; cfg < 256; ++cfg) build_case(cfg);
    }

    int edge_between(int a, int b) const {
        for (int e = 0; e < 12; ++e)
            if ((edge_corners[e][0] == a && edge_corners[e][1] == b) || (edge_corners[e][0] == b && edge_corners[e][1] == a))
                return e;
        throw NumericalError("marching cubes: corners do not share an edge");
    }

    Vec3 edge_mid(int e) const { return 0.5 * (corner_pos(edge_corners[e][0]) + corner_pos(edge_corners[e][1])); }

    bool share_face(int e0, int e1) const {
        for (int axis = 0; axis < 3; ++axis)
            for (int side = 0; side < 2; ++side) {
                auto on = [&](int e) {
                    return ((edge_corners[e][0] >> axis) & 1) == side && ((edge_corners[e][1] >> axis) & 1) == side;
                };
                if (on(e0) && on(e1)) return true;
            }
        return false;
    }

    void build_case(int cfg) {
        std::array<int, 12> next;
        next.fill(-1);
        auto inside = [&](int c) { return ((cfg >> c) & 1) != 0; };
        for (int axis = 0; axis < 3; ++axis)
            for (int side = 0; side < 2; ++side) {
                const int u = (axis + 1) % 3, v = (axis + 2) % 3;
                const int base = side << axis;
                const std::array<int, 4> q = {base, base | (1 << u), base | (1 << u) | (1 << v), base | (1 << v)};
                const Vec3 nf = (side ? 1.0 : -1.0) * Vec3::Unit(axis);
                std::vector<std::pair<std::array<int, 2>, Vec3>> segs;  // edges and in->out direction
                int n_in = 0;
                for (int c : q) n_in += inside(c);
                if (n_in == 0 || n_in == 4) continue;
                const bool ambiguous = n_in == 2 && inside(q[0]) == inside(q[2]);
                if (ambiguous) {
                    for (int k = 0; k < 4; ++k) {
                        if (!inside(q[k])) continue;
                        const int ea = edge_between(q[(k + 3) % 4], q[k]), eb = edge_between(q[k], q[(k + 1) % 4]);
                        const Vec3 mid = 0.5 * (edge_mid(ea) + edge_mid(eb));
                        segs.push_back({{ea, eb}, mid - corner_pos(q[k])});
                    }
                } else {
                    std::vector<int> cross;
                    Vec3 in_mean = Vec3::Zero(), out_mean = Vec3::Zero();
                    for (int k = 0; k < 4; ++k) {
                        if (inside(q[k]) != inside(q[(k + 1) % 4])) cross.push_back(edge_between(q[k], q[(k + 1) % 4]));
                        (inside(q[k]) ? in_mean : out_mean) += corner_pos(q[k]);
                    }
                    segs.push_back({{cross[0], cross[1]}, out_mean / (4 - n_in) - in_mean / n_in});
                }
                for (auto& [ab, mp] : segs) {
                    int a = ab[0], b = ab[1];
                    if ((edge_mid(b) - edge_mid(a)).dot(mp.cross(nf)) < 0) std::swap(a, b);
                    if (next[a] != -1) throw NumericalError("marching cubes: inconsistent face segments");
                    next[a] = b;
                }
            }
        McCase& out = cases[cfg];
        std::array<bool, 12> seen{};
        for (int e = 0; e < 12; ++e) {
            if (next[e] == -1 || seen[e]) continue;
            std::vector<int> loop;
            for (int cur = e; !seen[cur]; cur = next[cur]) {
                if (next[cur] == -1) throw NumericalError("marching cubes: open loop");
                seen[cur] = true;
                loop.push_back(cur);
            }
            out.loops.push_back(loop);
        }
        for (std::size_t li = 0; li < out.loops.size(); ++li) {
            const std::vector<int>& loop = out.loops[li];
            const int n = static_cast<int>(loop.size());
            int start = -1;
            for (int s = 0; s < n && start < 0; ++s) {
                bool ok = true;
                for (int j = 2; j < n - 1 && ok; ++j) ok = !share_face(loop[s], loop[(s + j) % n]);
                if (ok) start = s;
            }
            if (start >= 0) {
                for (int j = 1; j + 1 < n; ++j)
                    out.tris.push_back({loop[start], loop[(start + j) % n], loop[(start + j + 1) % n]});
            } else {
                for (int j = 0; j < n; ++j) out.tris.push_back({12 + static_cast<int>(li), loop[j], loop[(j + 1) % n]});
            }
        }
    }
};

const McTable& mc_table() {
    static const McTable table;
    return table;
}

TriangleMesh run_marching_cubes(const ScalarGrid& g, double iso) {
    const McTable& T = mc_table();
    TriangleMesh mesh;
    std::unordered_map<std::uint64_t, int> edge_vertex;
    auto node = [&](int c, int i, int j, int k) {
        return std::array<int, 3>{i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)};
    };
    for (int k = 0; k + 1 < g.nz; ++k)
        for (int j = 0; j + 1 < g.ny; ++j)
            for (int i = 0; i + 1 < g.nx; ++i) {
                int cfg = 0;
                std::array<double, 8> val;
                for (int c = 0; c < 8; ++c) {
                    const auto n = node(c, i, j, k);
                    val[c] = g(n[0], n[1], n[2]);
                    if (val[c] > iso) cfg |= 1 << c;
                }
                if (cfg == 0 || cfg == 255) continue;
                const McCase& cs = T.cases[cfg];
                std::array<int, 12> vid;
                vid.fill(-1);
                for (const auto& loop : cs.loops)
                    for (int e : loop) {
                        const int a = T.edge_corners[e][0], b = T.edge_corners[e][1];
                        const auto na = node(a, i, j, k);
                        const std::uint64_t key = g.index(na[0], na[1], na[2]) * 3 + T.edge_axis[e];
                        auto [it, fresh] = edge_vertex.try_emplace(key, static_cast<int>(mesh.vertices.size()));
                        if (fresh) {
                            const double t = (iso - val[a]) / (val[b] - val[a]);
                            const Vec3 pa = g.origin + g.h * Vec3(na[0], na[1], na[2]);
                            mesh.vertices.push_back(pa + t * g.h * Vec3::Unit(T.edge_axis[e]));
                        }
                        vid[e] = it->second;
                    }
                std::vector<int> centroid(cs.loops.size(), -1);
                for (const auto& tri : cs.tris) {
                    Tri out;
                    for (int m = 0; m < 3; ++m) {
                        const int code = tri[m];
                        if (code < 12) {
                            out[m] = vid[code];
                            continue;
                        }
                        const int li = code - 12;
                        if (centroid[li] < 0) {
                            Vec3 c = Vec3::Zero();
                            for (int e : cs.loops[li]) c += mesh.vertices[vid[e]];
                            centroid[li] = static_cast<int>(mesh.vertices.size());
                            mesh.vertices.push_back(c / static_cast<double>(cs.loops[li].size()));
                        }
                        out[m] = centroid[li];
                    }
                    mesh.triangles.push_back(out);
                }
            }
    return mesh;
}

/// +1 when the table winds outward, -1 otherwise; fixed by a single-node probe.
int table_orientation() {
    static const int sign = [] {
        ScalarGrid g(3, 3, 3, Vec3::Zero(), 1.0);
        g(1, 1, 1) = 1.0;
        return signed_volume(run_marching_cubes(g, 0.5)) > 0 ? 1 : -1;
    }();
    return sign;
}

}  // namespace

TriangleMesh marching_cubes(const ScalarGrid& grid, double iso) {
    if (grid.nx < 2 || grid.ny < 2 || grid.nz < 2) throw ArgumentError("marching_cubes: grid needs at least 2 nodes per axis");
    if (grid.values.size() != static_cast<std::size_t>(grid.nx) * grid.ny * grid.nz)
        throw ArgumentError("marching_cubes: value count does not match the grid");
    TriangleMesh mesh = run_marching_cubes(grid, iso);
    if (table_orientation() < 0)
        for (Tri& t : mesh.triangles) std::swap(t[1], t[2]);
    compute_vertex_normals(mesh);
    return mesh;
}

TriangleMesh marching_cubes(const OccupancyVolume& vol, bool smooth) {
    if (vol.occupied() == 0) throw ArgumentError("marching_cubes: empty volume");
    constexpr int pad = 2;
    ScalarGrid g(vol.nx + 2 * pad, vol.ny + 2 * pad, vol.nz + 2 * pad, vol.lo + vol.h * Vec3::Constant(0.5 - pad), vol.h);
    for (int k = 0; k < vol.nz; ++k)
        for (int j = 0; j < vol.ny; ++j)
            for (int i = 0; i < vol.nx; ++i)
                if (vol.at(i, j, k)) g(i + pad, j + pad, k + pad) = 1.0;
    if (smooth) {
        ScalarGrid s = g;
        parallel_for(s.values.size(), [&](std::size_t n) {
            const int i = static_cast<int>(n % g.nx), j = static_cast<int>((n / g.nx) % g.ny),
                      k = static_cast<int>(n / (static_cast<std::size_t>(g.nx) * g.ny));
            int count = 0;
            for (int dk = -1; dk <= 1; ++dk)
                for (int dj = -1; dj <= 1; ++dj)
                    for (int di = -1; di <= 1; ++di) {
                        const int a = i + di, b = j + dj, c = k + dk;
                        if (a < 0 || b < 0 || c < 0 || a >= g.nx || b >= g.ny || c >= g.nz) continue;
                        count += g(a, b, c) > 0.5;
                    }
            s.values[n] = count / 27.0;
        }, 4096);
        g = std::move(s);
    }
    return marching_cubes(g, 0.5);
}

// ------------------------------------------------------------ Loop subdivision

TriangleMesh loop_subdivide(const TriangleMesh& input, int iterations) {
    if (iterations < 0) throw ArgumentError("loop_subdivide: iterations must be non-negative");
    validate_mesh(input);
    TriangleMesh mesh = input;
    for (int it = 0; it < iterations; ++it) {
        const std::size_t nv = mesh.vertices.size(), nf = mesh.triangles.size();
        struct Directed {
            int a, b, opp;
            std::size_t tri;
            int local;
        };
        std::vector<Directed> edges;
        edges.reserve(3 * nf);
        for (std::size_t f = 0; f < nf; ++f)
            for (int m = 0; m < 3; ++m)
                edges.push_back({mesh.triangles[f][m], mesh.triangles[f][(m + 1) % 3], mesh.triangles[f][(m + 2) % 3], f, m});
        auto ukey = [](const Directed& d) { return std::pair(std::min(d.a, d.b), std::max(d.a, d.b)); };
        std::sort(edges.begin(), edges.end(), [&](const Directed& x, const Directed& y) {
            return ukey(x) != ukey(y) ? ukey(x) < ukey(y) : x.a < y.a;
        });
        if (edges.size() % 2) throw ArgumentError("loop_subdivide: mesh is not closed");
        std::vector<Vec3> verts(nv + edges.size() / 2);
        std::vector<std::array<int, 3>> tri_edge(nf);
        for (std::size_t e = 0; e < edges.size(); e += 2) {
            const Directed &p = edges[e], &q = edges[e + 1];
            if (ukey(p) != ukey(q) || p.a != q.b || p.b != q.a || (e + 2 < edges.size() && ukey(edges[e + 2]) == ukey(p)))
                throw ArgumentError("loop_subdivide: non-manifold or inconsistently oriented edge (" +
                                    std::to_string(p.a) + ", " + std::to_string(p.b) + ")");
            const int id = static_cast<int>(nv + e / 2);
            verts[id] = 0.375 * (mesh.vertices[p.a] + mesh.vertices[p.b]) +
                        0.125 * (mesh.vertices[p.opp] + mesh.vertices[q.opp]);
            tri_edge[p.tri][p.local] = id;
            tri_edge[q.tri][q.local] = id;
        }
        std::vector<Vec3> ring(nv, Vec3::Zero());
        std::vector<int> valence(nv, 0);
        for (const Directed& d : edges) {
            ring[d.a] += mesh.vertices[d.b];
            ++valence[d.a];
        }
        for (std::size_t v = 0; v < nv; ++v) {
            const int n = valence[v];
            if (n == 0) {
                verts[v] = mesh.vertices[v];
                continue;
            }
            const double beta = n == 3 ? 3.0 / 16.0 : 3.0 / (8.0 * n);
            verts[v] = (1.0 - n * beta) * mesh.vertices[v] + beta * ring[v];
        }
        std::vector<Tri> tris;
        tris.reserve(4 * nf);
        for (std::size_t f = 0; f < nf; ++f) {
            const Tri& t = mesh.triangles[f];
            const int ab = tri_edge[f][0], bc = tri_edge[f][1], ca = tri_edge[f][2];
            tris.push_back({t[0], ab, ca});
            tris.push_back({t[1], bc, ab});
            tris.push_back({t[2], ca, bc});
            tris.push_back({ab, bc, ca});
        }
        mesh.vertices = std::move(verts);
        mesh.triangles = std::move(tris);
        mesh.normals.clear();
    }
    compute_vertex_normals(mesh);
    return mesh;
}

// ------------------------------------------------------------ hull normals

NormalMapPair hull_normal_maps(const Surface& hull, const Camera& camera, double ior) {
    if (!(ior > 1.0)) throw ArgumentError("hull_normal_maps: ior must exceed 1");
    camera.validate();
    NormalMapPair np(camera.width, camera.height);
    const double eps = 1e-7 * std::max(1.0, hull.diagonal());
    parallel_for(np.valid.size(), [&](std::size_t i) {
        const int x = static_cast<int>(i % camera.width), y = static_cast<int>(i / camera.width);
        const Ray ray = pixel_center_ray(camera, x, y);
        auto h1 = hull.intersect(ray, 0.0);
        if (!h1) return;
        if (std::abs(ray.dir.dot(h1->normal)) < 1e-6) return;
        auto lm = refract(ray.dir, h1->normal, 1.0 / ior);
        if (!lm) return;
        auto h2 = hull.intersect(Ray{h1->point, *lm}, eps);
        if (!h2) return;
        if (std::abs(lm->dot(h2->normal)) < 1e-6) return;
        np.n1[i] = h1->normal;
        np.n2[i] = h2->normal;
        np.valid[i] = 1;
        np.tir[i] = refract(*lm, h2->normal, ior) ? 0 : 1;
    }, 64);
    return np;
}

}  // namespace refracta
