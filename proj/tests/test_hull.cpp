#include "refracta/hull/hull.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <map>
#include <set>

using namespace refracta;
using namespace refracta::testing;

namespace {

std::vector<MaskBuffer> sphere_masks(const std::vector<Camera>& cams, double r) {
    std::vector<MaskBuffer> masks;
    SphereSurface s(Vec3::Zero(), r);
    for (const Camera& c : cams) {
        MaskBuffer m(c.width, c.height, 0);
        for (int y = 0; y < c.height; ++y)
            for (int x = 0; x < c.width; ++x) m(x, y) = s.intersect(pixel_center_ray(c, x, y), 0.0) ? 1 : 0;
        masks.push_back(std::move(m));
    }
    return masks;
}

double max_sphere_deviation(const TriangleMesh& m) {
    double worst = 0;
    for (std::size_t f = 0; f < m.triangles.size(); ++f)
        for (double a : {0.0, 1.0 / 3, 0.5})
            for (double b : {0.0, 1.0 / 3, 0.5}) {
                if (a + b > 1) continue;
                const Tri& t = m.triangles[f];
                const Vec3 p = (1 - a - b) * m.vertices[t[0]] + a * m.vertices[t[1]] + b * m.vertices[t[2]];
                worst = std::max(worst, std::abs(p.norm() - 1.0));
            }
    return worst;
}

}  // namespace

TEST_SUITE("hull") {

TEST_CASE("marching cubes: single occupied voxel") {
    OccupancyVolume vol;
    vol.nx = vol.ny = vol.nz = 1;
    vol.h = 0.25;
    vol.lo = Vec3(1, 2, 3);
    vol.occ = {1};
    TriangleMesh m = marching_cubes(vol, false);
    // the six edge crossings around the lone inside node lie half a voxel away along each axis
    const Vec3 c = vol.center(0, 0, 0);
    std::set<std::array<double, 3>> expect, got;
    for (int a = 0; a < 3; ++a)
        for (double s : {-0.5, 0.5}) {
            const Vec3 p = c + s * vol.h * Vec3::Unit(a);
            expect.insert({p.x(), p.y(), p.z()});
        }
    for (const Vec3& p : m.vertices) got.insert({p.x(), p.y(), p.z()});
    CHECK(got == expect);
    CHECK(m.triangles.size() == 8);
    CHECK(is_watertight(m));
    CHECK(std::abs(signed_volume(m) - vol.h * vol.h * vol.h / 6.0) < 1e-15);
    TriangleMesh sm = marching_cubes(vol, true);
    CHECK(sm.empty());
}

TEST_CASE("marching cubes: random fields give closed, consistently oriented meshes") {
    CounterRng rng(99, 0);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 6 + trial % 5;
        ScalarGrid g(n, n, n, Vec3(-1, 0.5, 2), 0.3);
        for (int k = 1; k + 1 < n; ++k)
            for (int j = 1; j + 1 < n; ++j)
                for (int i = 1; i + 1 < n; ++i) g(i, j, k) = rng.uniform() < (0.3 + 0.01 * trial) ? 1.0 : rng.uniform(0, 0.4);
        TriangleMesh m = marching_cubes(g, 0.5);
        if (m.empty()) continue;
        REQUIRE(is_watertight(m));
        CHECK(signed_volume(m) > 0);
        for (std::size_t f = 0; f < m.triangles.size(); ++f) {
            const Tri& t = m.triangles[f];
            CHECK(t[0] != t[1]);
            CHECK(t[1] != t[2]);
            CHECK(t[0] != t[2]);
        }
    }
}

TEST_CASE("marching cubes: sphere field") {
    const int n = 40;
    const double h = 2.6 / (n - 1);
    ScalarGrid g(n, n, n, Vec3::Constant(-1.3), h);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) g(i, j, k) = 1.0 - (g.origin + h * Vec3(i, j, k)).norm();
    TriangleMesh m = marching_cubes(g, 0.0);
    CHECK(is_watertight(m));
    CHECK(euler_characteristic(m) == 2);
    for (const Vec3& v : m.vertices) CHECK(std::abs(v.norm() - 1.0) < 0.5 * h);
    CHECK(std::abs(signed_volume(m) - 4.0 / 3.0 * kPi) < 0.05 * 4.0 / 3.0 * kPi);
    for (std::size_t v = 0; v < m.vertices.size(); v += 37) CHECK(m.normals[v].dot(m.vertices[v].normalized()) > 0.9);
}

TEST_CASE("loop subdivision: counts and closed-form vertex rules") {
    TriangleMesh oct = make_octahedron();
    CHECK(loop_subdivide(oct, 3).triangles.size() == 512);
    TriangleMesh one = loop_subdivide(oct, 1);
    // old octahedron vertices have valence 4: beta = 3/32
    const Vec3 v0 = oct.vertices[0];
    Vec3 ring = Vec3::Zero();
    std::set<int> nbrs;
    for (const Tri& t : oct.triangles)
        for (int k = 0; k < 3; ++k)
            if (t[k] == 0) {
                nbrs.insert(t[(k + 1) % 3]);
                nbrs.insert(t[(k + 2) % 3]);
            }
    REQUIRE(nbrs.size() == 4);
    for (int n : nbrs) ring += oct.vertices[n];
    CHECK((one.vertices[0] - ((1 - 4 * 3.0 / 32) * v0 + 3.0 / 32 * ring)).norm() < 1e-14);

    // in `one`, edge vertices are regular (valence 6): beta = 1/16
    TriangleMesh two = loop_subdivide(one, 1);
    std::map<int, std::set<int>> adj;
    for (const Tri& t : one.triangles)
        for (int k = 0; k < 3; ++k) adj[t[k]].insert(t[(k + 1) % 3]);
    int checked = 0;
    for (auto& [v, ns] : adj) {
        if (ns.size() != 6) continue;
        Vec3 s = Vec3::Zero();
        for (int n : ns) s += one.vertices[n];
        CHECK((two.vertices[v] - ((1 - 6.0 / 16) * one.vertices[v] + s / 16.0)).norm() < 1e-14);
        ++checked;
    }
    CHECK(checked == 12);

    // edge vertex rule on the first edge of the first triangle
    const Tri t0 = oct.triangles[0];
    int opp = -1;
    for (const Tri& t : oct.triangles)
        for (int k = 0; k < 3; ++k)
            if (t[k] == t0[1] && t[(k + 1) % 3] == t0[0]) opp = t[(k + 2) % 3];
    REQUIRE(opp >= 0);
    const Vec3 ev = 0.375 * (oct.vertices[t0[0]] + oct.vertices[t0[1]]) + 0.125 * (oct.vertices[t0[2]] + oct.vertices[opp]);
    bool found = false;
    for (std::size_t v = oct.vertices.size(); v < one.vertices.size(); ++v) found |= (one.vertices[v] - ev).norm() < 1e-14;
    CHECK(found);
    CHECK(is_watertight(two));
    CHECK(euler_characteristic(two) == 2);
}

TEST_CASE("loop subdivision reduces deviation of a fine noisy sphere") {
    TriangleMesh ico = make_icosphere(5);
    CounterRng rng(1, 1);
    for (Vec3& v : ico.vertices) v *= 1 + rng.uniform(-0.01, 0.01);
    const double before = max_sphere_deviation(ico);
    const double after = max_sphere_deviation(loop_subdivide(ico, 1));
    CHECK(after < before);
}

TEST_CASE("loop subdivision rejects open or non-manifold input") {
    TriangleMesh m = make_octahedron();
    m.triangles.pop_back();
    CHECK_THROWS_AS(loop_subdivide(m, 1), ArgumentError);
    TriangleMesh f = make_octahedron();
    std::swap(f.triangles[0][0], f.triangles[0][1]);
    CHECK_THROWS_AS(loop_subdivide(f, 1), ArgumentError);
}

TEST_CASE("carve: single view is a generalized cone") {
    Camera cam = test_camera(32, 32, Vec3(0, 0, -4));
    MaskBuffer m(32, 32, 0);
    for (int y = 8; y < 24; ++y)
        for (int x = 10; x < 20; ++x) m(x, y) = 1;
    Aabb box;
    box.extend(Vec3(-1.5, -1.5, -1.5));
    box.extend(Vec3(1.5, 1.5, 1.5));
    OccupancyVolume vol = carve({m}, {cam}, 32, box);
    for (int k = 0; k < vol.nz; ++k)
        for (int j = 0; j < vol.ny; ++j)
            for (int i = 0; i < vol.nx; ++i) {
                auto p = project(cam, vol.center(i, j, k));
                const bool expect = !p || m(int(p->pixel.x()), int(p->pixel.y()));
                CHECK(vol.at(i, j, k) == expect);
            }
    // points along interior pixel rays are occupied
    CounterRng rng(1, 2);
    for (int s = 0; s < 200; ++s) {
        const Ray r = camera_ray(cam, Vec2(rng.uniform(12, 18), rng.uniform(10, 22)));
        const double t = rng.uniform(2.8, 5.2);
        CHECK(vol.contains(r.origin + t * r.dir, 0.5 * vol.h));
    }
}

TEST_CASE("carve: empty intersection is an error") {
    auto cams = fibonacci_rig(3, 3.0, 16);
    std::vector<MaskBuffer> masks(3, MaskBuffer(16, 16, 0));
    CHECK_THROWS_AS(carve(masks, cams, 16), DataError);
    try {
        carve(masks, cams, 16);
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("empty hull") != std::string::npos);
    }
}

TEST_CASE("carve: sphere hull is conservative and shrinks with views") {
    auto cams = fibonacci_rig(12, 3.0, 96, 50);
    auto masks = sphere_masks(cams, 1.0);
    const Aabb box = fit_bounds(masks, cams);
    CHECK(box.lo.maxCoeff() < -1.0);
    CHECK(box.hi.minCoeff() > 1.0);
    CHECK(box.extent().maxCoeff() < 4.0);
    double prev = 1e300;
    for (int v = 2; v <= 12; ++v) {
        std::vector<MaskBuffer> ms(masks.begin(), masks.begin() + v);
        std::vector<Camera> cs(cams.begin(), cams.begin() + v);
        OccupancyVolume vol = carve(ms, cs, 48, box);
        CHECK(vol.volume() <= prev);
        prev = vol.volume();
    }
    OccupancyVolume vol = carve(masks, cams, 48, box);
    CounterRng rng(3, 3);
    int inside = 0;
    for (int s = 0; s < 5000; ++s) {
        Vec3 p = random_unit(rng) * std::cbrt(rng.uniform());
        inside += vol.contains(p, 0.5 * vol.h);
    }
    CHECK(inside == 5000);
    const std::size_t before = vol.occupied();
    keep_largest_component(vol);
    CHECK(vol.occupied() <= before);
    TriangleMesh m = marching_cubes(vol);
    CHECK(is_watertight(m));
    CHECK(euler_characteristic(m) == 2);
    CHECK(signed_volume(m) > 4.0 / 3.0 * kPi * 0.95);
}

TEST_CASE("keep_largest_component") {
    OccupancyVolume vol;
    vol.nx = 6;
    vol.ny = vol.nz = 3;
    vol.h = 1;
    vol.occ.assign(54, 0);
    vol.occ[vol.index(0, 1, 1)] = 1;
    vol.occ[vol.index(3, 1, 1)] = vol.occ[vol.index(4, 1, 1)] = vol.occ[vol.index(4, 2, 1)] = 1;
    vol.occ[vol.index(5, 0, 0)] = 1;  // touches the big part only diagonally
    CHECK(keep_largest_component(vol) == 2);
    CHECK(vol.occupied() == 3);
    CHECK(vol.at(4, 2, 1));
}

TEST_CASE("hull normal maps on a sphere") {
    Camera cam = test_camera(63, 63, Vec3(0, 0, -3.5));
    TriangleMesh ico = make_icosphere(5);
    MeshSurface surf(ico);
    NormalMapPair np = hull_normal_maps(surf, cam, kDefaultIor);
    const std::size_t c = np.valid.index(31, 31);
    REQUIRE(np.valid[c]);
    const Vec3 view = pixel_center_ray(cam, 31, 31).dir;
    CHECK((np.n1[c] + view).norm() < 1e-2);
    CHECK((np.n2[c] - view).norm() < 1e-2);
    CHECK(mask_iou(np.valid, rasterize_silhouette(ico, cam)) > 0.99);

    NormalMapPair exact = hull_normal_maps(SphereSurface(Vec3::Zero(), 1.0), cam, kDefaultIor);
    NormalMapPair closed = analytic_sphere_normals(cam, Vec3::Zero(), 1.0, kDefaultIor);
    std::size_t n = 0, tir = 0;
    for (std::size_t i = 0; i < exact.valid.size(); ++i) {
        if (!exact.valid[i]) continue;
        ++n;
        tir += exact.tir[i];
        CHECK((exact.n1[i] - closed.n1[i]).norm() < 1e-9);
        CHECK((exact.n2[i] - closed.n2[i]).norm() < 1e-9);
    }
    CHECK(n > 500);
    // the exit angle inside a sphere equals the entry refraction angle, which is below critical
    CHECK(tir == 0);
    // mesh facets can only push a thin rim band over the critical angle
    const double r_img = cam.fx / std::sqrt(3.5 * 3.5 - 1.0);
    for (std::size_t i = 0; i < np.valid.size(); ++i)
        if (np.tir[i]) {
            const double d = Vec2(i % 63 + 0.5 - cam.cx, i / 63 + 0.5 - cam.cy).norm();
            CHECK(d > 0.9 * r_img);
        }
}

TEST_CASE("hull normal maps are unit length and TIR is within the valid mask") {
    auto cams = fibonacci_rig(4, 3.0, 40);
    TriangleMesh mesh = loop_subdivide(make_octahedron(), 2);
    MeshSurface surf(mesh);
    for (const Camera& cam : cams) {
        NormalMapPair np = hull_normal_maps(surf, cam, kDefaultIor);
        for (std::size_t i = 0; i < np.valid.size(); ++i) {
            if (np.tir[i]) CHECK(np.valid[i]);
            if (!np.valid[i]) continue;
            CHECK(std::abs(np.n1[i].norm() - 1) < 1e-6);
            CHECK(std::abs(np.n2[i].norm() - 1) < 1e-6);
        }
    }
}

}  // TEST_SUITE
