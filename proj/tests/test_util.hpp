#pragma once

#include "refracta/common.hpp"
#include "refracta/geom/camera.hpp"
#include "refracta/geom/envmap.hpp"
#include "refracta/geom/mesh.hpp"
#include "refracta/optics/optics.hpp"
#include "refracta/rng.hpp"

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <vector>

namespace refracta::testing {

inline Vec3 random_unit(CounterRng& rng) {
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return Vec3(r * std::cos(phi), r * std::sin(phi), z);
}

/// Smooth colorful map with features at several frequencies.
inline EnvironmentMap smooth_env(int height = 64, double freq = 3.0) {
    ImageBuffer img(2 * height, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < 2 * height; ++x) {
            const double u = (x + 0.5) / (2.0 * height), v = (y + 0.5) / height;
            img(x, y) = Vec3(0.6 + 0.4 * std::sin(2 * kPi * freq * u) * std::sin(kPi * v),
                             0.5 + 0.3 * std::cos(2 * kPi * (freq - 1) * u + 1.3 * kPi * freq * v),
                             0.4 + 0.35 * std::sin(kPi * freq * v + 0.7));
        }
    return EnvironmentMap(std::move(img));
}

inline Camera test_camera(int w, int h, const Vec3& eye, const Vec3& target = Vec3::Zero(), double fov = 40.0) {
    return look_at(eye, target, Vec3::UnitY(), w, h, fov);
}

/// Closed-form two-bounce normals of a sphere seen through `cam`.
inline NormalMapPair analytic_sphere_normals(const Camera& cam, const Vec3& c, double r, double ior) {
    NormalMapPair np(cam.width, cam.height);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const Ray ray = pixel_center_ray(cam, x, y);
            const Vec3 oc = ray.origin - c;
            const double b = oc.dot(ray.dir), disc = b * b - (oc.squaredNorm() - r * r);
            if (disc <= 0) continue;
            const double t = -b - std::sqrt(disc);
            const Vec3 p1 = ray.origin + t * ray.dir;
            const Vec3 n1 = (p1 - c) / r;
            auto lm = refract(ray.dir, n1, 1.0 / ior);
            if (!lm) continue;
            // second intersection from inside: chord along lm
            const Vec3 o2 = p1 - c;
            const double b2 = o2.dot(*lm);
            const double t2 = -2.0 * b2;
            const Vec3 p2 = p1 + t2 * *lm;
            const std::size_t i = np.valid.index(x, y);
            np.n1[i] = n1;
            np.n2[i] = (p2 - c) / r;
            np.valid[i] = 1;
            np.tir[i] = refract(*lm, np.n2[i], ior) ? 0 : 1;
        }
    return np;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("refracta_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace refracta::testing

namespace refracta::testing {

/// Cameras on Fibonacci-sphere directions looking at the origin.
inline std::vector<Camera> fibonacci_rig(int n, double distance, int res, double fov = 40.0) {
    std::vector<Camera> cams;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double y = 1.0 - 2.0 * (i + 0.5) / n;
        const double r = std::sqrt(1.0 - y * y);
        const Vec3 d(r * std::cos(golden * i), y, r * std::sin(golden * i));
        cams.push_back(look_at(distance * d, Vec3::Zero(), Vec3::UnitY(), res, res, fov));
    }
    return cams;
}

/// Silhouette by projecting triangles and testing pixel centers (no ray tracing).
inline MaskBuffer rasterize_silhouette(const TriangleMesh& mesh, const Camera& cam) {
    MaskBuffer m(cam.width, cam.height, 0);
    for (const Tri& t : mesh.triangles) {
        Vec2 p[3];
        bool ok = true;
        for (int k = 0; k < 3; ++k) {
            const Vec3 q = cam.rotation.transpose() * (mesh.vertices[t[k]] - cam.center);
            if (q.z() <= 0) ok = false;
            p[k] = Vec2(cam.fx * q.x() / q.z() + cam.cx, cam.fy * q.y() / q.z() + cam.cy);
        }
        if (!ok) continue;
        const double area = (p[1] - p[0]).x() * (p[2] - p[0]).y() - (p[1] - p[0]).y() * (p[2] - p[0]).x();
        if (area == 0) continue;
        const int x0 = std::max(0, (int)std::floor(std::min({p[0].x(), p[1].x(), p[2].x()})));
        const int x1 = std::min(cam.width - 1, (int)std::ceil(std::max({p[0].x(), p[1].x(), p[2].x()})));
        const int y0 = std::max(0, (int)std::floor(std::min({p[0].y(), p[1].y(), p[2].y()})));
        const int y1 = std::min(cam.height - 1, (int)std::ceil(std::max({p[0].y(), p[1].y(), p[2].y()})));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const Vec2 c(x + 0.5, y + 0.5);
                double s[3];
                for (int k = 0; k < 3; ++k) {
                    const Vec2 a = p[k], b = p[(k + 1) % 3];
                    s[k] = ((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x()) / area;
                }
                if (s[0] >= 0 && s[1] >= 0 && s[2] >= 0) m(x, y) = 1;
            }
    }
    return m;
}

inline double mask_iou(const MaskBuffer& a, const MaskBuffer& b) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        inter += a[i] && b[i];
        uni += a[i] || b[i];
    }
    return uni ? double(inter) / double(uni) : 1.0;
}

}  // namespace refracta::testing
