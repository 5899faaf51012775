#include "refracta/surface/surface.hpp"

#include "refracta/geom/kdtree.hpp"
#include "refracta/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace refracta {

namespace {

void check_pairs(const std::vector<Vec3>& p, const std::vector<Vec3>& n, const char* what) {
    if (p.size() != n.size()) throw ArgumentError(std::string(what) + ": point and normal counts differ");
}

double nearest_term(const Vec3& p, const Vec3& n, const AccelIndex& gt, const LossWeights& w) {
    const ClosestPoint c = gt.closest_point(p);
    return w.position * c.distance_sq + w.normal * (n - c.normal).squaredNorm();
}

}  // namespace

double loss_nearest(const std::vector<Vec3>& points, const std::vector<Vec3>& normals, const AccelIndex& gt,
                    const LossWeights& w) {
    check_pairs(points, normals, "loss_nearest");
    std::vector<double> terms(points.size());
    parallel_for(points.size(), [&](std::size_t i) { terms[i] = nearest_term(points[i], normals[i], gt, w); }, 64);
    return deterministic_sum(terms.size(), [&](std::size_t i) { return terms[i]; }, 0.0);
}

FirstSurfaceMaps first_surface_maps(const Surface& surface, const Camera& camera) {
    FirstSurfaceMaps m{ImageBuffer(camera.width, camera.height, Vec3::Zero()),
                       ImageBuffer(camera.width, camera.height, Vec3::Zero()),
                       MaskBuffer(camera.width, camera.height, 0)};
    parallel_for(m.valid.size(), [&](std::size_t i) {
        const Ray r = pixel_center_ray(camera, static_cast<int>(i % camera.width), static_cast<int>(i / camera.width));
        if (auto hit = surface.intersect(r, 0.0)) {
            m.position[i] = hit->point;
            m.normal[i] = hit->normal.dot(r.dir) > 0.0 ? Vec3(-hit->normal) : hit->normal;
            m.valid[i] = 1;
        }
    }, 64);
    return m;
}

double loss_view(const std::vector<Vec3>& points, const std::vector<Vec3>& normals, const std::vector<int>& view,
                 const std::vector<FirstSurfaceMaps>& gt_maps, const std::vector<Camera>& cameras,
                 const AccelIndex& gt, const LossWeights& w) {
    check_pairs(points, normals, "loss_view");
    if (view.size() != points.size()) throw ArgumentError("loss_view: view id count differs from point count");
    if (gt_maps.size() != cameras.size()) throw ArgumentError("loss_view: one gt map set per camera is required");
    std::vector<double> terms(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        const int v = view[i];
        if (v < 0 || v > static_cast<int>(cameras.size())) throw ArgumentError("loss_view: view id out of range");
        if (v > 0) {
            const FirstSurfaceMaps& m = gt_maps[v - 1];
            if (const auto pr = project(cameras[v - 1], points[i])) {
                Vec3 tp, tn;
                if (sample_bilinear_masked(m.position, m.valid, pr->pixel.x(), pr->pixel.y(), tp) &&
                    sample_bilinear_masked(m.normal, m.valid, pr->pixel.x(), pr->pixel.y(), tn) && tn.norm() > 1e-12) {
                    terms[i] = w.position * (points[i] - tp).squaredNorm() +
                               w.normal * (normals[i] - tn.normalized()).squaredNorm();
                    return;
                }
            }
        }
        terms[i] = nearest_term(points[i], normals[i], gt, w);
    }, 64);
    return deterministic_sum(terms.size(), [&](std::size_t i) { return terms[i]; }, 0.0);
}

double loss_chamfer(const std::vector<Vec3>& pa, const std::vector<Vec3>& na, const std::vector<Vec3>& pb,
                    const std::vector<Vec3>& nb, const LossWeights& w) {
    check_pairs(pa, na, "loss_chamfer");
    check_pairs(pb, nb, "loss_chamfer");
    if (pa.empty() || pb.empty()) throw ArgumentError("loss_chamfer: empty point cloud");
    auto one_way = [&](const std::vector<Vec3>& p, const std::vector<Vec3>& n, const std::vector<Vec3>& q,
                       const std::vector<Vec3>& m) {
        const PointIndex index(q);
        std::vector<double> terms(p.size());
        parallel_for(p.size(), [&](std::size_t i) {
            const Neighbor nn = index.nearest(p[i]);
            terms[i] = 0.5 * w.position * std::sqrt(nn.distance_sq) + 0.5 * w.normal * (n[i] - m[nn.index]).norm();
        }, 64);
        return deterministic_sum(terms.size(), [&](std::size_t i) { return terms[i]; }, 0.0);
    };
    return one_way(pa, na, pb, nb) + one_way(pb, nb, pa, na);
}

// ------------------------------------------------------------ Poisson

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return deterministic_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; }, 0.0, 4096);
}

struct GridShape {
    int nx, ny, nz;
    std::size_t size() const { return static_cast<std::size_t>(nx) * ny * nz; }
    std::size_t index(int i, int j, int k) const { return (static_cast<std::size_t>(k) * ny + j) * nx + i; }
    bool boundary(int i, int j, int k) const {
        return i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1;
    }
};

void laplacian_apply(const GridShape& g, const std::vector<double>& x, std::vector<double>& y) {
    const std::size_t sx = 1, sy = static_cast<std::size_t>(g.nx), sz = static_cast<std::size_t>(g.nx) * g.ny;
    parallel_for(static_cast<std::size_t>(g.ny) * g.nz, [&](std::size_t row) {
        const int j = static_cast<int>(row % g.ny), k = static_cast<int>(row / g.ny);
        for (int i = 0; i < g.nx; ++i) {
            const std::size_t id = g.index(i, j, k);
            if (g.boundary(i, j, k)) {
                y[id] = 0.0;
                continue;
            }
            // boundary neighbors hold zero
            auto at = [&](std::size_t q, bool edge) { return edge ? 0.0 : x[q]; };
            y[id] = 6.0 * x[id] - at(id - sx, i - 1 == 0) - at(id + sx, i + 1 == g.nx - 1) - at(id - sy, j - 1 == 0) -
                    at(id + sy, j + 1 == g.ny - 1) - at(id - sz, k - 1 == 0) - at(id + sz, k + 1 == g.nz - 1);
        }
    }, 4);
}

std::vector<double> conjugate_gradient(const std::function<void(const std::vector<double>&, std::vector<double>&)>& A,
                                       const std::vector<double>& b, std::vector<double> x, double tol, int max_iters,
                                       std::vector<double>& residuals) {
    const std::size_t n = b.size();
    std::vector<double> r(n), Ap(n);
    A(x, Ap);
    parallel_for(n, [&](std::size_t i) { r[i] = b[i] - Ap[i]; }, 4096);
    const double bnorm = std::sqrt(dot(b, b));
    residuals.clear();
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return x;
    }
    std::vector<double> p = r;
    double rr = dot(r, r);
    residuals.push_back(std::sqrt(rr) / bnorm);
    for (int it = 0; it < max_iters && residuals.back() >= tol; ++it) {
        A(p, Ap);
        const double pAp = dot(p, Ap);
        if (!(pAp > 0.0)) throw SolverError("conjugate gradient breakdown (p.Ap <= 0)", residuals);
        const double alpha = rr / pAp;
        parallel_for(n, [&](std::size_t i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }, 4096);
        const double rr_new = dot(r, r);
        const double beta = rr_new / rr;
        rr = rr_new;
        parallel_for(n, [&](std::size_t i) { p[i] = r[i] + beta * p[i]; }, 4096);
        residuals.push_back(std::sqrt(rr) / bnorm);
    }
    if (!(residuals.back() < tol))
        throw SolverError("conjugate gradient did not reach relative residual " + std::to_string(tol) + " in " +
                              std::to_string(max_iters) + " iterations (last " + std::to_string(residuals.back()) + ")",
                          residuals);
    return x;
}

/// 1-d Gaussian blur along `axis` with zero outside the array.
void blur_axis(std::vector<double>& v, const GridShape& g, int axis, const std::vector<double>& kernel) {
    const int n = axis == 0 ? g.nx : axis == 1 ? g.ny : g.nz;
    const std::size_t stride = axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(g.nx) : static_cast<std::size_t>(g.nx) * g.ny;
    const int rad = static_cast<int>(kernel.size() / 2);
    const std::size_t lines = g.size() / n;
    std::vector<double> out(v.size());
    parallel_for(lines, [&](std::size_t l) {
        std::size_t base;
        if (axis == 0) base = l * g.nx;
        else if (axis == 1) base = (l / g.nx) * g.nx * g.ny + l % g.nx;
        else base = l;
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int t = -rad; t <= rad; ++t) {
                const int q = i + t;
                if (q < 0 || q >= n) continue;
                s += kernel[t + rad] * v[base + q * stride];
            }
            out[base + i * stride] = s;
        }
    }, 16);
    v.swap(out);
}

struct Trilinear {
    std::size_t idx[8];
    double w[8];
    bool ok = false;
};

/// Trilinear stencil of continuous grid coordinate g in a grid of the given shape.
Trilinear stencil(const GridShape& s, const Vec3& g) {
    Trilinear t;
    const int i = static_cast<int>(std::floor(g.x())), j = static_cast<int>(std::floor(g.y())),
              k = static_cast<int>(std::floor(g.z()));
    if (i < 0 || j < 0 || k < 0 || i + 1 >= s.nx || j + 1 >= s.ny || k + 1 >= s.nz) return t;
    const double fx = g.x() - i, fy = g.y() - j, fz = g.z() - k;
    int c = 0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx, ++c) {
                t.idx[c] = s.index(i + dx, j + dy, k + dz);
                t.w[c] = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
            }
    t.ok = true;
    return t;
}

struct PoissonLevel {
    GridShape shape;
    Vec3 origin;
    double h;
};

PoissonLevel make_level(const Aabb& box, int resolution) {
    const Vec3 ext = box.extent();
    const double h = ext.maxCoeff() / resolution;
    PoissonLevel L;
    L.h = h;
    L.shape = {static_cast<int>(std::ceil(ext.x() / h - 1e-9)) + 1, static_cast<int>(std::ceil(ext.y() / h - 1e-9)) + 1,
               static_cast<int>(std::ceil(ext.z() / h - 1e-9)) + 1};
    L.origin = box.center() - 0.5 * h * Vec3(L.shape.nx - 1, L.shape.ny - 1, L.shape.nz - 1);
    return L;
}

/// Right-hand side -h^2 div V of one level (V = -normals, splatted with weight 1/(N h^3)).
std::vector<double> poisson_rhs(const PoissonLevel& L, const std::vector<Vec3>& points, const std::vector<Vec3>& normals,
                                double sigma_cells) {
    const GridShape& g = L.shape;
    const GridShape sh[3] = {{g.nx - 1, g.ny, g.nz}, {g.nx, g.ny - 1, g.nz}, {g.nx, g.ny, g.nz - 1}};
    std::vector<double> comp[3];
    for (int a = 0; a < 3; ++a) comp[a].assign(sh[a].size(), 0.0);
    const double wgt = 1.0 / (static_cast<double>(points.size()) * L.h * L.h * L.h);
    for (std::size_t s = 0; s < points.size(); ++s) {
        const Vec3 gp = (points[s] - L.origin) / L.h;
        for (int a = 0; a < 3; ++a) {
            Vec3 q = gp;
            q[a] -= 0.5;
            const Trilinear t = stencil(sh[a], q);
            if (!t.ok) continue;
            for (int c = 0; c < 8; ++c) comp[a][t.idx[c]] -= wgt * t.w[c] * normals[s][a];
        }
    }
    if (sigma_cells > 0.0) {
        const int rad = static_cast<int>(std::ceil(3.0 * sigma_cells));
        std::vector<double> kernel(2 * rad + 1);
        double ks = 0.0;
        for (int t = -rad; t <= rad; ++t) ks += kernel[t + rad] = std::exp(-0.5 * t * t / (sigma_cells * sigma_cells));
        for (double& kv : kernel) kv /= ks;
        for (int a = 0; a < 3; ++a)
            for (int ax = 0; ax < 3; ++ax) blur_axis(comp[a], sh[a], ax, kernel);
    }
    std::vector<double> rhs(g.size(), 0.0);
    parallel_for(g.size(), [&](std::size_t id) {
        const int i = static_cast<int>(id % g.nx), j = static_cast<int>((id / g.nx) % g.ny),
                  k = static_cast<int>(id / (static_cast<std::size_t>(g.nx) * g.ny));
        if (g.boundary(i, j, k)) return;
        const double div = comp[0][sh[0].index(i, j, k)] - comp[0][sh[0].index(i - 1, j, k)] +
                           comp[1][sh[1].index(i, j, k)] - comp[1][sh[1].index(i, j - 1, k)] +
                           comp[2][sh[2].index(i, j, k)] - comp[2][sh[2].index(i, j, k - 1)];
        rhs[id] = -L.h * div;
    }, 4096);
    return rhs;
}

double sample_field(const PoissonLevel& L, const std::vector<double>& x, const Vec3& p) {
    const Trilinear t = stencil(L.shape, (p - L.origin) / L.h);
    if (!t.ok) return 0.0;
    double v = 0.0;
    for (int c = 0; c < 8; ++c) v += t.w[c] * x[t.idx[c]];
    return v;
}

}  // namespace

std::vector<double> solve_grid_poisson(int nx, int ny, int nz, const std::vector<double>& rhs, double tolerance,
                                       int max_iters, std::vector<double>& residuals,
                                       const std::vector<double>* warm_start) {
    const GridShape g{nx, ny, nz};
    if (nx < 3 || ny < 3 || nz < 3 || rhs.size() != g.size()) throw ArgumentError("solve_grid_poisson: bad grid");
    std::vector<double> b = rhs;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                if (g.boundary(i, j, k)) b[g.index(i, j, k)] = 0.0;
    std::vector<double> x0 = warm_start && warm_start->size() == g.size() ? *warm_start : std::vector<double>(g.size(), 0.0);
    return conjugate_gradient([&](const std::vector<double>& x, std::vector<double>& y) { laplacian_apply(g, x, y); },
                              b, std::move(x0), tolerance, max_iters, residuals);
}

PoissonResult poisson_reconstruct(const std::vector<Vec3>& points, const std::vector<Vec3>& normals,
                                  const PoissonConfig& config) {
    check_pairs(points, normals, "poisson_reconstruct");
    if (points.empty()) throw ArgumentError("poisson_reconstruct: no samples");
    if (config.resolution < 8) throw ArgumentError("poisson_reconstruct: resolution must be at least 8");
    double norm_sum = 0.0;
    for (const Vec3& n : normals) norm_sum += n.norm();
    if (norm_sum == 0.0) throw DataError("poisson_reconstruct: zero normal field, no surface");

    Aabb box;
    for (const Vec3& p : points) box.extend(p);
    const double margin = config.padding * std::max(box.diagonal(), 1e-9);
    box.lo -= Vec3::Constant(margin);
    box.hi += Vec3::Constant(margin);
    // widen so the blur footprint stays inside the zero boundary
    const double extra = (3.0 * config.sigma_cells + 2.0) * box.extent().maxCoeff() / config.resolution;
    box.lo -= Vec3::Constant(extra);
    box.hi += Vec3::Constant(extra);

    // coarse-to-fine: each level starts from the interpolated coarser solution
    std::vector<int> resolutions{config.resolution};
    while (resolutions.back() / 2 >= 16) resolutions.push_back(resolutions.back() / 2);
    std::reverse(resolutions.begin(), resolutions.end());

    PoissonResult res;
    PoissonLevel prev{};
    std::vector<double> x;
    for (std::size_t li = 0; li < resolutions.size(); ++li) {
        const PoissonLevel L = make_level(box, resolutions[li]);
        const std::vector<double> rhs = poisson_rhs(L, points, normals, config.sigma_cells);
        std::vector<double> warm(L.shape.size(), 0.0);
        if (!x.empty())
            parallel_for(L.shape.size(), [&](std::size_t id) {
                const int i = static_cast<int>(id % L.shape.nx), j = static_cast<int>((id / L.shape.nx) % L.shape.ny),
                          k = static_cast<int>(id / (static_cast<std::size_t>(L.shape.nx) * L.shape.ny));
                warm[id] = sample_field(prev, x, L.origin + L.h * Vec3(i, j, k));
            }, 4096);
        const bool last = li + 1 == resolutions.size();
        std::vector<double> residuals;
        const GridShape& g = L.shape;
        if (config.screening > 0.0 && last) {
            std::vector<Trilinear> st(points.size());
            for (std::size_t s = 0; s < points.size(); ++s) st[s] = stencil(g, (points[s] - L.origin) / L.h);
            const double alpha = config.screening / static_cast<double>(points.size());
            // screening target: the iso value of the unscreened warm start
            double iso0 = 0.0;
            for (std::size_t s = 0; s < points.size(); ++s) iso0 += sample_field(L, warm, points[s]);
            iso0 /= static_cast<double>(points.size());
            std::vector<double> b = rhs;
            for (const Trilinear& t : st)
                if (t.ok)
                    for (int c = 0; c < 8; ++c) b[t.idx[c]] += alpha * iso0 * t.w[c];
            for (std::size_t id = 0; id < g.size(); ++id) {
                const int i = static_cast<int>(id % g.nx), j = static_cast<int>((id / g.nx) % g.ny),
                          k = static_cast<int>(id / (static_cast<std::size_t>(g.nx) * g.ny));
                if (g.boundary(i, j, k)) b[id] = 0.0;
            }
            auto A = [&](const std::vector<double>& in, std::vector<double>& out) {
                laplacian_apply(g, in, out);
                for (const Trilinear& t : st) {
                    if (!t.ok) continue;
                    double v = 0.0;
                    for (int c = 0; c < 8; ++c) v += t.w[c] * in[t.idx[c]];
                    for (int c = 0; c < 8; ++c) {
                        const std::size_t q = t.idx[c];
                        const int i = static_cast<int>(q % g.nx), j = static_cast<int>((q / g.nx) % g.ny),
                                  k = static_cast<int>(q / (static_cast<std::size_t>(g.nx) * g.ny));
                        if (!g.boundary(i, j, k)) out[q] += alpha * t.w[c] * v;
                    }
                }
            };
            x = conjugate_gradient(A, b, warm, config.tolerance, config.max_iters, residuals);
        } else {
            x = solve_grid_poisson(g.nx, g.ny, g.nz, rhs, config.tolerance, config.max_iters, residuals, &warm);
        }
        res.residuals = residuals;
        prev = L;
    }

    double iso = 0.0;
    for (const Vec3& p : points) iso += sample_field(prev, x, p);
    iso /= static_cast<double>(points.size());
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (peak == 0.0) throw DataError("poisson_reconstruct: indicator is identically zero, no surface");

    res.indicator = ScalarGrid(prev.shape.nx, prev.shape.ny, prev.shape.nz, prev.origin, prev.h);
    res.indicator.values = std::move(x);
    res.iso = iso;
    res.mesh = marching_cubes(res.indicator, iso);
    if (res.mesh.empty()) throw DataError("poisson_reconstruct: iso-surface is empty");
    return res;
}

// ------------------------------------------------------------ deformation

namespace {

struct MeshTopology {
    std::vector<std::vector<int>> vertex_faces;
    std::vector<std::vector<int>> neighbors;
};

MeshTopology topology(const TriangleMesh& m) {
    MeshTopology t;
    t.vertex_faces.resize(m.vertex_count());
    t.neighbors.resize(m.vertex_count());
    for (std::size_t f = 0; f < m.triangle_count(); ++f)
        for (int c = 0; c < 3; ++c) {
            const int v = m.triangles[f][c];
            t.vertex_faces[v].push_back(static_cast<int>(f));
            t.neighbors[v].push_back(m.triangles[f][(c + 1) % 3]);
            t.neighbors[v].push_back(m.triangles[f][(c + 2) % 3]);
        }
    for (auto& n : t.neighbors) {
        std::sort(n.begin(), n.end());
        n.erase(std::unique(n.begin(), n.end()), n.end());
    }
    return t;
}

std::vector<Vec3> displaced(const TriangleMesh& base, const std::vector<double>& d) {
    std::vector<Vec3> p(base.vertex_count());
    for (std::size_t v = 0; v < p.size(); ++v) p[v] = base.vertices[v] + d[v] * base.normals[v];
    return p;
}

/// Unnormalized area-weighted vertex normals: sum of (b - a) x (c - a) over incident faces.
std::vector<Vec3> normal_sums(const TriangleMesh& m, const std::vector<Vec3>& p, const MeshTopology& topo) {
    std::vector<Vec3> s(p.size(), Vec3::Zero());
    parallel_for(p.size(), [&](std::size_t v) {
        for (int f : topo.vertex_faces[v]) {
            const Tri& t = m.triangles[f];
            s[v] += (p[t[1]] - p[t[0]]).cross(p[t[2]] - p[t[0]]);
        }
    }, 256);
    return s;
}

std::vector<double> laplacian(const std::vector<double>& d, const MeshTopology& topo) {
    std::vector<double> out(d.size(), 0.0);
    for (std::size_t v = 0; v < d.size(); ++v) {
        if (topo.neighbors[v].empty()) continue;
        double m = 0.0;
        for (int u : topo.neighbors[v]) m += d[u];
        out[v] = d[v] - m / static_cast<double>(topo.neighbors[v].size());
    }
    return out;
}

double energy_impl(const TriangleMesh& base, const std::vector<double>& d, const std::vector<Vec3>& targets,
                   const std::vector<double>& weights, const DeformConfig& cfg, const MeshTopology& topo) {
    const std::vector<Vec3> p = displaced(base, d);
    const std::vector<Vec3> s = normal_sums(base, p, topo);
    const std::vector<double> lap = laplacian(d, topo);
    return deterministic_sum(d.size(), [&](std::size_t v) {
        double e = cfg.w_prox * d[v] * d[v] + cfg.w_lap * lap[v] * lap[v];
        const double sn = s[v].norm();
        if (sn > 0.0) e += cfg.w_normal * weights[v] * (s[v] / sn - targets[v]).squaredNorm();
        return e;
    }, 0.0);
}

std::vector<double> energy_grad(const TriangleMesh& base, const std::vector<double>& d, const std::vector<Vec3>& targets,
                                const std::vector<double>& weights, const DeformConfig& cfg, const MeshTopology& topo) {
    const std::size_t n = d.size();
    const std::vector<Vec3> p = displaced(base, d);
    const std::vector<Vec3> s = normal_sums(base, p, topo);
    // dE/ds per vertex
    std::vector<Vec3> gs(n, Vec3::Zero());
    for (std::size_t v = 0; v < n; ++v) {
        const double sn = s[v].norm();
        if (sn == 0.0 || weights[v] == 0.0) continue;
        const Vec3 u = s[v] / sn, r = u - targets[v];
        gs[v] = cfg.w_normal * weights[v] * (2.0 / sn) * (r - u * u.dot(r));
    }
    // each face cross product feeds all three corner sums
    std::vector<Vec3> gf(base.triangle_count());
    for (std::size_t f = 0; f < gf.size(); ++f) {
        const Tri& t = base.triangles[f];
        gf[f] = gs[t[0]] + gs[t[1]] + gs[t[2]];
    }
    std::vector<double> g(n, 0.0);
    const std::vector<double> lap = laplacian(d, topo);
    // L^T L d
    std::vector<double> ltl(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
        ltl[v] += lap[v];
        if (topo.neighbors[v].empty()) continue;
        const double share = lap[v] / static_cast<double>(topo.neighbors[v].size());
        for (int u : topo.neighbors[v]) ltl[u] -= share;
    }
    parallel_for(n, [&](std::size_t v) {
        Vec3 gp = Vec3::Zero();
        for (int f : topo.vertex_faces[v]) {
            const Tri& t = base.triangles[f];
            const int c = t[0] == static_cast<int>(v) ? 0 : t[1] == static_cast<int>(v) ? 1 : 2;
            const Vec3& a = p[t[(c + 1) % 3]];
            const Vec3& b = p[t[(c + 2) % 3]];
            // d/dx of g . ((a - x) x (b - x)) = g x (b - a)
            gp += gf[f].cross(b - a);
        }
        g[v] = gp.dot(base.normals[v]) + 2.0 * cfg.w_prox * d[v] + 2.0 * cfg.w_lap * ltl[v];
    }, 256);
    return g;
}

}  // namespace

double deform_energy(const TriangleMesh& base, const std::vector<double>& offsets, const std::vector<Vec3>& targets,
                     const std::vector<double>& weights, const DeformConfig& config) {
    if (offsets.size() != base.vertex_count() || targets.size() != base.vertex_count() ||
        weights.size() != base.vertex_count() || base.normals.size() != base.vertex_count())
        throw ArgumentError("deform_energy: per-vertex array sizes differ");
    return energy_impl(base, offsets, targets, weights, config, topology(base));
}

DeformResult deform_vertices(const TriangleMesh& hull, const OrientedPointCloud& cloud, const DeformConfig& config) {
    validate_mesh(hull);
    if (cloud.size() == 0) throw ArgumentError("deform_vertices: empty point cloud");
    if (cloud.normals.size() != cloud.size() || cloud.tir.size() != cloud.size())
        throw ArgumentError("deform_vertices: point cloud has no fused features");
    TriangleMesh base = hull;
    compute_vertex_normals(base);
    const std::size_t n = base.vertex_count();
    const MeshTopology topo = topology(base);

    const PointIndex index(cloud.points);
    std::vector<Vec3> targets(n);
    std::vector<double> weights(n);
    for (std::size_t v = 0; v < n; ++v) {
        const int k = index.nearest(base.vertices[v]).index;
        targets[v] = cloud.normals[k].normalized();
        weights[v] = std::clamp(1.0 - cloud.tir[k], 0.0, 1.0);
    }

    DeformResult res;
    res.offsets.assign(n, 0.0);
    double e = energy_impl(base, res.offsets, targets, weights, config, topo);
    res.energy.push_back(e);
    const double step0 = config.step_fraction * bounds(base).diagonal();
    // Polak-Ribiere+ conjugate directions; each step moves the furthest vertex by at most step0
    std::vector<double> g_prev, dir(n, 0.0);
    for (int it = 0; it < config.iterations; ++it) {
        const std::vector<double> g = energy_grad(base, res.offsets, targets, weights, config, topo);
        double beta = 0.0;
        if (!g_prev.empty()) {
            double num = 0.0, den = 0.0;
            for (std::size_t v = 0; v < n; ++v) {
                num += g[v] * (g[v] - g_prev[v]);
                den += g_prev[v] * g_prev[v];
            }
            beta = den > 0.0 ? std::max(0.0, num / den) : 0.0;
        }
        double slope = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            dir[v] = -g[v] + beta * dir[v];
            slope += dir[v] * g[v];
        }
        if (!(slope < 0.0)) {
            for (std::size_t v = 0; v < n; ++v) dir[v] = -g[v];
        }
        double dmax = 0.0;
        for (double v : dir) dmax = std::max(dmax, std::abs(v));
        if (dmax == 0.0) break;
        g_prev = g;
        bool accepted = false;
        double step = step0;
        std::vector<double> cand(n);
        for (int b = 0; b <= config.max_backtracks && !accepted; ++b, step *= 0.5) {
            for (std::size_t v = 0; v < n; ++v) cand[v] = res.offsets[v] + step * dir[v] / dmax;
            const double ec = energy_impl(base, cand, targets, weights, config, topo);
            if (ec < e) {
                accepted = true;
                e = ec;
                res.offsets.swap(cand);
            }
        }
        if (!accepted) {
            if (beta == 0.0) break;
            // retry from steepest descent
            g_prev.clear();
            std::fill(dir.begin(), dir.end(), 0.0);
            continue;
        }
        res.energy.push_back(e);
    }
    res.mesh = base;
    res.mesh.vertices = displaced(base, res.offsets);
    compute_vertex_normals(res.mesh);
    return res;
}

}  // namespace refracta
