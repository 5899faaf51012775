#include "refracta/fuse/fuse.hpp"

#include "refracta/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace refracta {

void OrientedPointCloud::reset_features() {
    normals = hull_normals;
    error.assign(points.size(), kErrorSentinel);
    tir.assign(points.size(), 1.0);
    cosine.assign(points.size(), 0.0);
    view.assign(points.size(), 0);
}

OrientedPointCloud sample_hull_points(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
    SurfaceSamples s = sample_surface(mesh, n, seed, true);
    OrientedPointCloud c;
    c.points = std::move(s.points);
    c.hull_normals = std::move(s.normals);
    c.reset_features();
    return c;
}

ViewPrediction make_view_prediction(const ImageBuffer& image, const EnvironmentMap& env, const NormalMapPair& normals,
                                    const Camera& camera, double ior) {
    const RenderOutput out = render_layer(env, normals, camera, ior);
    const ImageBuffer err = error_map(image, out, normals.valid);
    ViewPrediction v{camera, normals.n1, ScalarImage(camera.width, camera.height, 0.0),
                     ScalarImage(camera.width, camera.height, 0.0), normals.valid};
    for (std::size_t i = 0; i < err.size(); ++i) {
        v.error[i] = luminance(err[i]);
        v.tir[i] = normals.valid[i] && out.tir[i] ? 1.0 : 0.0;
    }
    return v;
}

double visibility_epsilon(const AccelIndex& hull) { return 1e-4 * std::max(hull.diagonal(), 1e-12); }

bool visibility(const AccelIndex& hull, const Camera& camera, const Vec3& p, double eps) {
    if (!project(camera, p)) return false;
    const Vec3 d = p - camera.center;
    const double dist = d.norm();
    if (dist <= eps) return false;
    return !hull.occluded(Ray{camera.center, d / dist}, 0.0, dist - eps);
}

bool visibility(const AccelIndex& hull, const Camera& camera, const Vec3& p) {
    return visibility(hull, camera, p, visibility_epsilon(hull));
}

std::optional<ViewSample> sample_view(const AccelIndex& hull, const ViewPrediction& view, const Vec3& p, double eps) {
    const auto proj = project(view.camera, p);
    if (!proj || !visibility(hull, view.camera, p, eps)) return std::nullopt;
    ViewSample s;
    const double u = proj->pixel.x(), v = proj->pixel.y();
    if (!sample_bilinear_masked(view.n1, view.valid, u, v, s.normal)) return std::nullopt;
    if (s.normal.norm() < 1e-12) return std::nullopt;
    s.normal.normalize();
    sample_bilinear_masked(view.error, view.valid, u, v, s.error);
    sample_bilinear_masked(view.tir, view.valid, u, v, s.tir);
    s.cosine = view_cosine(view.camera, p);
    return s;
}

SampleTable sample_views(const AccelIndex& hull, const std::vector<ViewPrediction>& views,
                         const std::vector<Vec3>& points) {
    const double eps = visibility_epsilon(hull);
    SampleTable t(points.size(), std::vector<std::optional<ViewSample>>(views.size()));
    parallel_for(points.size(), [&](std::size_t i) {
        for (std::size_t v = 0; v < views.size(); ++v) t[i][v] = sample_view(hull, views[v], points[i], eps);
    }, 64);
    return t;
}

namespace {

void check_table(const OrientedPointCloud& cloud, const SampleTable& samples) {
    if (samples.size() != cloud.size()) throw ArgumentError("fuse: sample table does not match the point cloud");
    if (cloud.hull_normals.size() != cloud.size()) throw ArgumentError("fuse: point cloud has no hull normals");
}

void copy_sample(OrientedPointCloud& c, std::size_t i, const ViewSample& s, std::size_t v) {
    c.normals[i] = s.normal;
    c.error[i] = s.error;
    c.tir[i] = s.tir;
    c.cosine[i] = s.cosine;
    c.view[i] = static_cast<int>(v) + 1;
}

}  // namespace

void map_features_re(OrientedPointCloud& cloud, const SampleTable& samples) {
    check_table(cloud, samples);
    cloud.reset_features();
    parallel_for(cloud.size(), [&](std::size_t i) {
        for (std::size_t v = 0; v < samples[i].size(); ++v) {
            const auto& s = samples[i][v];
            if (!s) continue;
            const bool cand_tir = is_tir(s->tir), inc_tir = is_tir(cloud.tir[i]);
            const bool update = (!cand_tir && inc_tir) || (!cand_tir && !inc_tir && s->error < cloud.error[i]) ||
                                (cand_tir && inc_tir && s->cosine > cloud.cosine[i]);
            if (update) copy_sample(cloud, i, *s, v);
        }
    });
}

void map_features_avg(OrientedPointCloud& cloud, const SampleTable& samples) {
    check_table(cloud, samples);
    cloud.reset_features();
    parallel_for(cloud.size(), [&](std::size_t i) {
        Vec3 n = Vec3::Zero();
        double e = 0.0, m = 0.0, c = 0.0, best_cos = -1.0;
        int count = 0, best_view = 0;
        for (std::size_t v = 0; v < samples[i].size(); ++v) {
            const auto& s = samples[i][v];
            if (!s) continue;
            n += s->normal;
            e += s->error;
            m += s->tir;
            c += s->cosine;
            ++count;
            if (s->cosine > best_cos) {
                best_cos = s->cosine;
                best_view = static_cast<int>(v) + 1;
            }
        }
        if (count == 0) return;
        if (n.norm() > 1e-12) cloud.normals[i] = n.normalized();
        cloud.error[i] = e / count;
        cloud.tir[i] = m / count;
        cloud.cosine[i] = c / count;
        cloud.view[i] = best_view;
    });
}

void map_features_nearest(OrientedPointCloud& cloud, const SampleTable& samples) {
    check_table(cloud, samples);
    cloud.reset_features();
    parallel_for(cloud.size(), [&](std::size_t i) {
        int best = -1;
        for (std::size_t v = 0; v < samples[i].size(); ++v) {
            const auto& s = samples[i][v];
            if (s && (best < 0 || s->cosine > samples[i][best]->cosine)) best = static_cast<int>(v);
        }
        if (best >= 0) copy_sample(cloud, i, *samples[i][best], best);
    });
}

void map_features_re(OrientedPointCloud& cloud, const AccelIndex& hull, const std::vector<ViewPrediction>& views) {
    map_features_re(cloud, sample_views(hull, views, cloud.points));
}
void map_features_avg(OrientedPointCloud& cloud, const AccelIndex& hull, const std::vector<ViewPrediction>& views) {
    map_features_avg(cloud, sample_views(hull, views, cloud.points));
}
void map_features_nearest(OrientedPointCloud& cloud, const AccelIndex& hull, const std::vector<ViewPrediction>& views) {
    map_features_nearest(cloud, sample_views(hull, views, cloud.points));
}

void save_point_cloud(const fs::path& path, const OrientedPointCloud& cloud) {
    PointTable t;
    t.names = {"x", "y", "z", "nx", "ny", "nz", "err", "tir", "cos", "view", "hnx", "hny", "hnz"};
    t.columns.assign(t.names.size(), std::vector<double>(cloud.size()));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double row[] = {cloud.points[i].x(),  cloud.points[i].y(),  cloud.points[i].z(),
                              cloud.normals[i].x(), cloud.normals[i].y(), cloud.normals[i].z(),
                              cloud.error[i],       cloud.tir[i],         cloud.cosine[i],
                              double(cloud.view[i]), cloud.hull_normals[i].x(), cloud.hull_normals[i].y(),
                              cloud.hull_normals[i].z()};
        for (std::size_t k = 0; k < t.names.size(); ++k) t.columns[k][i] = row[k];
    }
    save_point_ply(path, t);
}

OrientedPointCloud load_point_cloud(const fs::path& path) {
    const PointTable t = load_point_ply(path);
    OrientedPointCloud c;
    const std::size_t n = t.rows();
    auto col = [&](const char* name) -> const std::vector<double>& { return t.column(name); };
    const auto &x = col("x"), &y = col("y"), &z = col("z"), &nx = col("nx"), &ny = col("ny"), &nz = col("nz");
    const bool has_hull = std::find(t.names.begin(), t.names.end(), "hnx") != t.names.end();
    for (std::size_t i = 0; i < n; ++i) {
        c.points.emplace_back(x[i], y[i], z[i]);
        c.normals.emplace_back(nx[i], ny[i], nz[i]);
        c.hull_normals.push_back(has_hull ? Vec3(col("hnx")[i], col("hny")[i], col("hnz")[i]) : c.normals.back());
    }
    c.error = col("err");
    c.tir = col("tir");
    c.cosine = col("cos");
    for (double v : col("view")) c.view.push_back(static_cast<int>(v));
    return c;
}

}  // namespace refracta
