#include "doctest.h"
#include "test_util.hpp"

#include "refracta/fuse/fuse.hpp"
#include "refracta/geom/kdtree.hpp"
#include "refracta/parallel.hpp"
#include "refracta/synth/synth.hpp"

using namespace refracta;
using namespace refracta::testing;

namespace {

/// Depth-test oracle without rays: the point is visible when no projected
/// triangle covering its image location is nearer (camera z) than the point.
bool zbuffer_visible(const TriangleMesh& mesh, const Camera& cam, const Vec3& p, double tol) {
    const auto pr = project(cam, p);
    if (!pr) return false;
    const Vec3 qp = cam.rotation.transpose() * (p - cam.center);
    const Vec2 c(qp.x() / qp.z(), qp.y() / qp.z());
    for (const Tri& t : mesh.triangles) {
        Vec3 q[3];
        Vec2 s[3];
        bool front = true;
        for (int k = 0; k < 3; ++k) {
            q[k] = cam.rotation.transpose() * (mesh.vertices[t[k]] - cam.center);
            if (q[k].z() <= 0) front = false;
            s[k] = Vec2(q[k].x() / q[k].z(), q[k].y() / q[k].z());
        }
        if (!front) continue;
        const double area = (s[1] - s[0]).x() * (s[2] - s[0]).y() - (s[1] - s[0]).y() * (s[2] - s[0]).x();
        if (std::abs(area) < 1e-300) continue;
        double b[3];
        for (int k = 0; k < 3; ++k) {
            const Vec2 a = s[(k + 1) % 3], e = s[(k + 2) % 3];
            b[k] = ((e - a).x() * (c - a).y() - (e - a).y() * (c - a).x()) / area;
        }
        if (b[0] < 0 || b[1] < 0 || b[2] < 0) continue;
        // perspective-correct depth: 1/z interpolates linearly in screen space
        const double inv_z = b[0] / q[0].z() + b[1] / q[1].z() + b[2] / q[2].z();
        if (1.0 / inv_z < qp.z() - tol) return false;
    }
    return true;
}

ViewPrediction constant_view(const Camera& cam, const Vec3& n, double err, double tir) {
    return {cam, ImageBuffer(cam.width, cam.height, n), ScalarImage(cam.width, cam.height, err),
            ScalarImage(cam.width, cam.height, tir), MaskBuffer(cam.width, cam.height, 1)};
}

ViewPrediction random_view(const Camera& cam, std::uint64_t seed) {
    ViewPrediction v = constant_view(cam, Vec3::UnitZ(), 0.0, 0.0);
    CounterRng rng(seed, 77);
    for (std::size_t i = 0; i < v.valid.size(); ++i) {
        v.n1[i] = random_unit(rng);
        v.error[i] = rng.uniform(0.0, 1.0);
        v.tir[i] = rng.uniform() < 0.3 ? 1.0 : 0.0;
        v.valid[i] = rng.uniform() < 0.95;
    }
    return v;
}

}  // namespace

TEST_SUITE("fuse") {

TEST_CASE("kd-tree agrees with brute force") {
    CounterRng rng(4, 4);
    std::vector<Vec3> pts;
    for (int i = 0; i < 3000; ++i) pts.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    // duplicates and a lattice for ties
    for (int i = 0; i < 50; ++i) pts.push_back(pts[i]);
    for (int x = 0; x < 5; ++x)
        for (int y = 0; y < 5; ++y) pts.emplace_back(x * 0.5, y * 0.5, 3.0);
    const PointIndex idx(pts);
    for (int i = 0; i < 2000; ++i) {
        const Vec3 q = i < 1500 ? Vec3(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
                                : Vec3(0.25 * (i % 9), 0.25 * (i % 7), 3.0);
        const Neighbor a = idx.nearest(q), b = nearest_brute_force(pts, q);
        CHECK(a.index == b.index);
        CHECK(a.distance_sq == b.distance_sq);
    }
    CHECK_THROWS_AS(PointIndex(std::vector<Vec3>{}).nearest(Vec3::Zero()), ArgumentError);
}

TEST_CASE("hull sampling: count, statistics, determinism") {
    const TriangleMesh sphere = make_icosphere(4);
    const std::size_t n = 20000;
    const OrientedPointCloud a = sample_hull_points(sphere, n, 7), b = sample_hull_points(sphere, n, 7);
    CHECK(a.size() == n);
    CHECK(a.points == b.points);
    Vec3 mean = Vec3::Zero();
    double rmin = 2, rmax = 0;
    for (const Vec3& p : a.points) {
        mean += p / double(n);
        rmin = std::min(rmin, p.norm());
        rmax = std::max(rmax, p.norm());
    }
    // coordinates of a uniform sphere sample have variance 1/3
    const double sigma = std::sqrt(1.0 / 3.0);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(mean[k]) < 3 * sigma / std::sqrt(double(n)));
    CHECK(rmax <= 1.0 + 1e-12);
    CHECK(rmin > 0.99);
    CHECK(a.view == std::vector<int>(n, 0));
    CHECK(a.error == std::vector<double>(n, 2.0));
    for (std::size_t i = 0; i < n; ++i) CHECK(a.hull_normals[i].dot(a.points[i]) > 0.99);
}

TEST_CASE("hull sampling is area weighted") {
    TriangleMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(10, 0, 0), Vec3(13, 0, 0), Vec3(10, 1, 0)};
    m.triangles = {{0, 1, 2}, {3, 4, 5}};  // areas 0.5 and 1.5
    const std::size_t n = 40000;
    const SurfaceSamples s = sample_surface(m, n, 1);
    std::size_t second = 0;
    for (int f : s.faces) second += f == 1;
    const double p = 0.75, sd = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(double(second) / n - p) < 3 * sd);
}

TEST_CASE("visibility: sphere self-occlusion and frustum") {
    const AccelIndex hull(make_icosphere(4));
    const Camera cam = test_camera(64, 64, Vec3(0, 0, -4));
    CHECK(visibility(hull, cam, Vec3(0, 0, -1)));
    CHECK_FALSE(visibility(hull, cam, Vec3(0, 0, 1)));
    CHECK_FALSE(visibility(hull, cam, Vec3(0, 0, -5)));
    const Camera side = test_camera(64, 64, Vec3(0, 0, -4), Vec3(5, 0, 0), 20);
    CHECK_FALSE(visibility(hull, side, Vec3(0, 0, -1)));
}

TEST_CASE("visibility agrees with a depth-test oracle") {
    const TriangleMesh mesh = gen_shape(3, ShapeParams{3, 5, 48, 0, 0.12, {}});
    const AccelIndex hull(mesh);
    const OrientedPointCloud pts = sample_hull_points(mesh, 1000, 2);
    const auto cams = fibonacci_rig(3, 3.0, 64, 45);
    std::size_t agree = 0, total = 0, vis = 0;
    for (const Camera& cam : cams)
        for (const Vec3& p : pts.points) {
            const bool a = visibility(hull, cam, p), b = zbuffer_visible(mesh, cam, p, visibility_epsilon(hull));
            agree += a == b;
            vis += a;
            ++total;
        }
    MESSAGE("agreement " << agree << " / " << total << ", visible " << vis);
    CHECK(vis > total / 4);
    CHECK(double(agree) / total >= 0.99);
}

TEST_CASE("best-view fusion: single view and TIR branches") {
    const AccelIndex hull(make_icosphere(3));
    OrientedPointCloud c;
    c.points = {Vec3(0, 0, -1)};
    c.hull_normals = {Vec3(0, 0, -1)};
    const Camera cam = test_camera(32, 32, Vec3(0, 0, -4));
    const Vec3 n = Vec3(0.1, 0.2, -1).normalized();
    map_features_re(c, hull, {constant_view(cam, n, 0.3, 0.0)});
    CHECK(c.view[0] == 1);
    CHECK((c.normals[0] - n).norm() < 1e-12);
    CHECK(c.error[0] == doctest::Approx(0.3));
    CHECK(c.tir[0] == 0.0);
    CHECK(c.cosine[0] == doctest::Approx(1.0));

    // view 1 TIR with a tiny error, view 2 TIR-free with a large one
    const Camera cam2 = test_camera(32, 32, Vec3(0.5, 0, -4));
    map_features_re(c, hull, {constant_view(cam, n, 0.01, 1.0), constant_view(cam2, -n, 0.9, 0.0)});
    CHECK(c.view[0] == 2);
    CHECK(c.error[0] == doctest::Approx(0.9));
    // both TIR: larger cosine wins
    map_features_re(c, hull, {constant_view(cam2, n, 0.01, 1.0), constant_view(cam, -n, 0.9, 1.0)});
    CHECK(c.view[0] == 2);
    // error ties: first view wins
    map_features_re(c, hull, {constant_view(cam2, n, 0.5, 0.0), constant_view(cam, -n, 0.5, 0.0)});
    CHECK(c.view[0] == 1);
    // not visible anywhere: initialization kept
    c.points = {Vec3(0, 0, 1)};
    c.hull_normals = {Vec3(0, 0, 1)};
    map_features_re(c, hull, {constant_view(cam, n, 0.3, 0.0)});
    CHECK(c.view[0] == 0);
    CHECK(c.error[0] == 2.0);
    CHECK(c.tir[0] == 1.0);
    CHECK(c.cosine[0] == 0.0);
    CHECK(c.normals[0] == Vec3(0, 0, 1));
}

TEST_CASE("best-view fusion equals a brute-force search") {
    const TriangleMesh mesh = make_icosphere(3);
    const AccelIndex hull(mesh);
    const auto cams = fibonacci_rig(10, 3.0, 48, 45);
    std::vector<ViewPrediction> views;
    for (std::size_t v = 0; v < cams.size(); ++v) views.push_back(random_view(cams[v], v));
    OrientedPointCloud c = sample_hull_points(mesh, 1000, 11);
    map_features_re(c, hull, views);
    const double eps = visibility_epsilon(hull);
    std::size_t match = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const Vec3& p = c.points[i];
        // independent sampling: brute-force ray scan, direct bilinear taps
        int best_free = -1, best_tir = -1;
        double best_err = 0, best_cos = 0;
        std::vector<ViewSample> s(views.size());
        for (std::size_t v = 0; v < views.size(); ++v) {
            const auto pr = project(views[v].camera, p);
            if (!pr) continue;
            const Vec3 d = p - views[v].camera.center;
            const auto hit = intersect_brute_force(mesh, Ray{views[v].camera.center, d.normalized()}, 0.0);
            if (hit && hit->t < d.norm() - eps) continue;
            ViewSample& vs = s[v];
            if (!sample_bilinear_masked(views[v].n1, views[v].valid, pr->pixel.x(), pr->pixel.y(), vs.normal)) continue;
            sample_bilinear_masked(views[v].error, views[v].valid, pr->pixel.x(), pr->pixel.y(), vs.error);
            sample_bilinear_masked(views[v].tir, views[v].valid, pr->pixel.x(), pr->pixel.y(), vs.tir);
            vs.cosine = view_cosine(views[v].camera, p);
            if (vs.tir < 0.5) {
                if (best_free < 0 || vs.error < best_err) best_free = int(v), best_err = vs.error;
            } else if (vs.cosine > best_cos) {
                best_tir = int(v), best_cos = vs.cosine;
            }
        }
        const int expect = best_free >= 0 ? best_free + 1 : best_tir + 1;
        bool ok = c.view[i] == expect;
        if (ok && expect > 0) ok = (c.normals[i] - s[expect - 1].normal.normalized()).norm() < 1e-12 &&
                                   c.error[i] == s[expect - 1].error;
        match += ok;
    }
    CHECK(match == c.size());
}

TEST_CASE("averaging and nearest-view fusion") {
    const AccelIndex hull(make_icosphere(3));
    OrientedPointCloud c;
    c.points = {Vec3(0, 0, -1)};
    c.hull_normals = {Vec3(0, 0, -1)};
    const Camera a = test_camera(32, 32, Vec3(0, 0, -4)), b = test_camera(32, 32, Vec3(0.4, 0, -4));
    const Vec3 n = Vec3(0.3, -0.2, -1).normalized();
    map_features_avg(c, hull, {constant_view(a, n, 0.2, 0.0), constant_view(b, n, 0.2, 0.0)});
    CHECK((c.normals[0] - n).norm() < 1e-12);
    CHECK(c.error[0] == doctest::Approx(0.2));
    CHECK(c.tir[0] == 0.0);
    const double alpha = deg2rad(20);
    const Vec3 bis(0, 0, -1), n1(std::sin(alpha), 0, -std::cos(alpha)), n2(-std::sin(alpha), 0, -std::cos(alpha));
    map_features_avg(c, hull, {constant_view(a, n1, 0.1, 1.0), constant_view(b, n2, 0.3, 0.0)});
    CHECK((c.normals[0] - bis).norm() < 1e-12);
    CHECK(c.error[0] == doctest::Approx(0.2));
    CHECK(c.tir[0] == doctest::Approx(0.5));
    CHECK(c.view[0] == 1);

    map_features_nearest(c, hull, {constant_view(b, n2, 0.3, 0.0), constant_view(a, n1, 0.1, 1.0)});
    CHECK(c.view[0] == 2);
    CHECK(c.cosine[0] == doctest::Approx(1.0));
    map_features_nearest(c, hull, {constant_view(a, n2, 0.3, 0.0), constant_view(a, n1, 0.1, 1.0)});
    CHECK(c.view[0] == 1);

    c.points = {Vec3(0, 0, 1)};
    c.hull_normals = {Vec3(0, 0, 1)};
    map_features_avg(c, hull, {constant_view(a, n, 0.2, 0.0)});
    CHECK(c.view[0] == 0);
    CHECK(c.error[0] == 2.0);
    CHECK(c.normals[0] == Vec3(0, 0, 1));
}

TEST_CASE("nearest-view fusion equals an exhaustive cosine maximum") {
    const TriangleMesh mesh = make_icosphere(3);
    const AccelIndex hull(mesh);
    const auto cams = fibonacci_rig(8, 3.0, 32, 50);
    std::vector<ViewPrediction> views;
    for (std::size_t v = 0; v < cams.size(); ++v) views.push_back(random_view(cams[v], 100 + v));
    OrientedPointCloud c = sample_hull_points(mesh, 500, 5);
    const SampleTable t = sample_views(hull, views, c.points);
    map_features_nearest(c, t);
    for (std::size_t i = 0; i < c.size(); ++i) {
        double best = -1;
        int id = 0;
        for (std::size_t v = 0; v < views.size(); ++v)
            if (t[i][v] && t[i][v]->cosine > best) best = t[i][v]->cosine, id = int(v) + 1;
        CHECK(c.view[i] == id);
    }
}

TEST_CASE("fusion is thread-count independent and round-trips through PLY") {
    const TriangleMesh mesh = make_icosphere(3);
    const AccelIndex hull(mesh);
    const auto cams = fibonacci_rig(6, 3.0, 32, 50);
    std::vector<ViewPrediction> views;
    for (std::size_t v = 0; v < cams.size(); ++v) views.push_back(random_view(cams[v], 200 + v));
    OrientedPointCloud a = sample_hull_points(mesh, 400, 5), b = a;
    set_thread_count(1);
    map_features_re(a, hull, views);
    set_thread_count(8);
    map_features_re(b, hull, views);
    set_thread_count(0);
    CHECK(a.normals == b.normals);
    CHECK(a.view == b.view);
    const auto dir = temp_dir("fuse");
    save_point_cloud(dir / "cloud.ply", a);
    const OrientedPointCloud r = load_point_cloud(dir / "cloud.ply");
    CHECK(r.points == a.points);
    CHECK(r.normals == a.normals);
    CHECK(r.hull_normals == a.hull_normals);
    CHECK(r.error == a.error);
    CHECK(r.tir == a.tir);
    CHECK(r.cosine == a.cosine);
    CHECK(r.view == a.view);
}

TEST_CASE("view prediction from exact normals has zero error") {
    const Camera cam = test_camera(32, 32, Vec3(0, 0, -3.2));
    const EnvironmentMap env = procedural_envmap(1, 32);
    const NormalMapPair np = analytic_sphere_normals(cam, Vec3::Zero(), 1.0, 1.5);
    const ImageBuffer img = render_layer(env, np, cam, 1.5).sum();
    const ViewPrediction v = make_view_prediction(img, env, np, cam, 1.5);
    for (std::size_t i = 0; i < img.size(); ++i) {
        CHECK(v.error[i] < 1e-12);
        CHECK(v.tir[i] == (np.valid[i] && np.tir[i] ? 1.0 : 0.0));
    }
}

}
