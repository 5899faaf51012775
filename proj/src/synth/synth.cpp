#include "refracta/synth/synth.hpp"

#include "refracta/hull/hull.hpp"
#include "refracta/parallel.hpp"
#include "refracta/rng.hpp"

#include <algorithm>
#include <cmath>

namespace refracta {

namespace {

Vec3 random_direction(CounterRng& rng) {
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return Vec3(r * std::cos(phi), r * std::sin(phi), z);
}

Mat3 random_rotation(CounterRng& rng, double max_angle) {
    const Vec3 axis = random_direction(rng);
    return Eigen::AngleAxisd(rng.uniform(0.0, max_angle), axis).toRotationMatrix();
}

double smooth_min(double a, double b, double k) {
    if (k <= 0.0) return std::min(a, b);
    const double h = std::max(k - std::abs(a - b), 0.0) / k;
    return std::min(a, b) - h * h * k * 0.25;
}

double min_radius(const Primitive& p) {
    switch (p.kind) {
        case Primitive::Kind::Sphere: return p.radii.x();
        case Primitive::Kind::Ellipsoid: return p.radii.minCoeff();
        case Primitive::Kind::Capsule: return p.radii.x();
    }
    return p.radii.x();
}

double reach(const Primitive& p, const Vec3& from) {
    switch (p.kind) {
        case Primitive::Kind::Sphere: return (p.center - from).norm() + p.radii.x();
        case Primitive::Kind::Ellipsoid: return (p.center - from).norm() + p.radii.maxCoeff();
        case Primitive::Kind::Capsule:
            return std::max((p.center - from).norm(), (p.end - from).norm()) + p.radii.x();
    }
    return 0.0;
}

double field(const std::vector<Primitive>& prims, double blend, const Vec3& p) {
    double d = prims.front().distance(p);
    for (std::size_t i = 1; i < prims.size(); ++i) d = smooth_min(d, prims[i].distance(p), blend);
    return d;
}

}  // namespace

double Primitive::distance(const Vec3& p) const {
    switch (kind) {
        case Kind::Sphere: return (p - center).norm() - radii.x();
        case Kind::Ellipsoid: {
            const Vec3 q = rotation.transpose() * (p - center);
            const double k0 = q.cwiseQuotient(radii).norm();
            const double k1 = q.cwiseQuotient(radii.cwiseProduct(radii)).norm();
            if (k1 == 0.0) return -radii.minCoeff();
            return k0 * (k0 - 1.0) / k1;
        }
        case Kind::Capsule: {
            const Vec3 ab = end - center;
            const double len2 = ab.squaredNorm();
            const double t = len2 > 0.0 ? std::clamp((p - center).dot(ab) / len2, 0.0, 1.0) : 0.0;
            return (p - (center + t * ab)).norm() - radii.x();
        }
    }
    return 0.0;
}

std::vector<Primitive> random_primitives(std::uint64_t seed, const ShapeParams& params) {
    if (params.min_primitives < 1 || params.max_primitives < params.min_primitives)
        throw ArgumentError("random_primitives: invalid primitive count range");
    CounterRng rng(seed, 0x5348415045ULL);
    const int span = params.max_primitives - params.min_primitives + 1;
    const int n = params.min_primitives + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(span));
    std::vector<Primitive> prims;
    for (int i = 0; i < n; ++i) {
        Primitive p;
        const int kind = static_cast<int>(rng.next_u64() % 3);
        p.kind = static_cast<Primitive::Kind>(kind);
        if (i > 0) {
            const Primitive& parent = prims[rng.next_u64() % prims.size()];
            p.center = parent.center + random_direction(rng) * min_radius(parent) * rng.uniform(0.5, 0.9);
        }
        switch (p.kind) {
            case Primitive::Kind::Sphere: p.radii = Vec3::Constant(rng.uniform(0.25, 0.45)); break;
            case Primitive::Kind::Ellipsoid:
                p.radii = Vec3(rng.uniform(0.18, 0.45), rng.uniform(0.18, 0.45), rng.uniform(0.18, 0.45));
                p.rotation = random_rotation(rng, kPi);
                break;
            case Primitive::Kind::Capsule:
                p.radii = Vec3::Constant(rng.uniform(0.12, 0.22));
                p.end = p.center + random_direction(rng) * rng.uniform(0.3, 0.6);
                break;
        }
        prims.push_back(p);
    }
    Aabb box;
    for (const Primitive& p : prims) {
        const double r = reach(p, p.center);
        box.extend(p.center - Vec3::Constant(r));
        box.extend(p.center + Vec3::Constant(r));
    }
    const Vec3 shift = box.center();
    double radius = 0.0;
    for (Primitive& p : prims) {
        p.center -= shift;
        p.end -= shift;
        radius = std::max(radius, reach(p, Vec3::Zero()));
    }
    const double s = 0.9 / radius;
    for (Primitive& p : prims) {
        p.center *= s;
        p.end *= s;
        p.radii *= s;
    }
    return prims;
}

TriangleMesh gen_shape(std::uint64_t seed, const ShapeParams& params) {
    if (params.resolution < 16) throw ArgumentError("gen_shape: resolution must be at least 16");
    const std::vector<Primitive> prims = params.primitives.empty() ? random_primitives(seed, params) : params.primitives;
    double radius = 0.0;
    for (const Primitive& p : prims) radius = std::max(radius, reach(p, Vec3::Zero()));
    const double half = radius + params.blend + 0.1 * radius;
    const double h = 2.0 * half / params.resolution;
    const int n = params.resolution + 1;
    ScalarGrid grid(n, n, n, Vec3::Constant(-half), h);
    parallel_for(grid.values.size(), [&](std::size_t idx) {
        const int i = static_cast<int>(idx % n), j = static_cast<int>((idx / n) % n), k = static_cast<int>(idx / (n * n));
        grid.values[idx] = -field(prims, params.blend, grid.origin + h * Vec3(i, j, k));
    }, 4096);
    TriangleMesh mesh = marching_cubes(grid, 0.0);
    if (!is_watertight(mesh)) throw NumericalError("gen_shape: polygonization is not closed");
    return loop_subdivide(mesh, params.subdivisions);
}

NormalMapPair gt_normal_maps(const Surface& gt, const Camera& camera, double ior) {
    return hull_normal_maps(gt, camera, ior);
}

MaskBuffer render_mask(const Surface& surface, const Camera& camera) {
    camera.validate();
    MaskBuffer m(camera.width, camera.height, 0);
    parallel_for(m.size(), [&](std::size_t i) {
        const Ray r = pixel_center_ray(camera, static_cast<int>(i % camera.width), static_cast<int>(i / camera.width));
        m[i] = surface.intersect(r, 0.0) ? 1 : 0;
    }, 64);
    return m;
}

namespace {

struct Tracer {
    const Surface& surface;
    const EnvironmentMap& env;
    double ior;
    int max_bounces;
    bool branch;
    double eps;

    // `inside` tracks the medium rather than the normal's sign, which
    // interpolated normals can get wrong near silhouettes.
    Vec3 trace(const Ray& ray, int bounces, bool inside, CounterRng& rng) const {
        auto hit = surface.intersect(ray, bounces == 0 ? 0.0 : eps);
        if (!hit) return env.sample(ray.dir);
        if (bounces + 1 > max_bounces) return Vec3::Zero();
        const Vec3& n = hit->normal;
        const double eta = inside ? ior : 1.0 / ior;
        auto lt = refract(ray.dir, n, eta);
        const double f = lt ? fresnel(ray.dir, *lt, n, eta) : 1.0;
        const Ray reflected{hit->point, reflect(ray.dir, n)};
        if (!lt) return trace(reflected, bounces + 1, inside, rng);
        const Ray transmitted{hit->point, *lt};
        if (branch) {
            Vec3 out = Vec3::Zero();
            if (f > 0.0) out += f * trace(reflected, bounces + 1, inside, rng);
            if (f < 1.0) out += (1.0 - f) * trace(transmitted, bounces + 1, !inside, rng);
            return out;
        }
        return rng.uniform() < f ? trace(reflected, bounces + 1, inside, rng)
                                 : trace(transmitted, bounces + 1, !inside, rng);
    }
};

}  // namespace

ImageBuffer path_trace_reference(const Surface& surface, const EnvironmentMap& env, const Camera& camera, double ior,
                                 const TraceOptions& options) {
    camera.validate();
    if (!(ior > 0.0)) throw ArgumentError("path_trace_reference: ior must be positive");
    if (options.max_bounces < 0 || options.samples_per_pixel < 1)
        throw ArgumentError("path_trace_reference: invalid bounce or sample count");
    const Tracer tracer{surface, env, ior, options.max_bounces, options.max_bounces <= options.branch_limit,
                        1e-7 * std::max(1.0, surface.diagonal())};
    ImageBuffer img(camera.width, camera.height, Vec3::Zero());
    const bool stochastic = options.jitter || !tracer.branch;
    parallel_for(img.size(), [&](std::size_t i) {
        const int x = static_cast<int>(i % camera.width), y = static_cast<int>(i / camera.width);
        CounterRng rng(options.seed, i);
        if (!stochastic) {
            img[i] = tracer.trace(pixel_center_ray(camera, x, y), 0, false, rng);
            return;
        }
        Vec3 sum = Vec3::Zero();
        for (int s = 0; s < options.samples_per_pixel; ++s) {
            const Vec2 px = options.jitter ? Vec2(x + rng.uniform(), y + rng.uniform()) : Vec2(x + 0.5, y + 0.5);
            sum += tracer.trace(camera_ray(camera, px), 0, false, rng);
        }
        img[i] = sum / options.samples_per_pixel;
    }, 16);
    return img;
}

EnvironmentMap procedural_envmap(std::uint64_t seed, int height, double frequency) {
    if (height < 2) throw ArgumentError("procedural_envmap: height must be at least 2");
    CounterRng rng(seed, 0x454e56ULL);
    struct Wave {
        Vec3 dir;
        double freq, phase;
        Vec3 color;
    };
    std::vector<Wave> waves;
    for (int k = 0; k < 8; ++k)
        waves.push_back({random_direction(rng), rng.uniform(0.5, 1.0) * frequency, rng.uniform(0.0, 2.0 * kPi),
                         Vec3(rng.uniform(0.05, 0.25), rng.uniform(0.05, 0.25), rng.uniform(0.05, 0.25))});
    struct Blob {
        Vec3 dir;
        double sharpness;
        Vec3 color;
    };
    std::vector<Blob> blobs;
    for (int k = 0; k < 3; ++k)
        blobs.push_back({random_direction(rng), rng.uniform(8.0, 30.0),
                         Vec3(rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5))});
    const Vec3 sky(rng.uniform(0.3, 0.6), rng.uniform(0.3, 0.6), rng.uniform(0.4, 0.8));
    const Vec3 ground(rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3), rng.uniform(0.05, 0.2));
    EnvironmentMap probe = EnvironmentMap::constant(Vec3::Zero(), height);
    ImageBuffer tex(2 * height, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < 2 * height; ++x) {
            const Vec3 d = probe.texel_direction(x, y);
            const double up = 0.5 * (1.0 - d.y());  // +Y is down
            Vec3 c = up * sky + (1.0 - up) * ground;
            for (const Wave& w : waves) c += w.color * std::sin(w.freq * kPi * d.dot(w.dir) + w.phase);
            for (const Blob& b : blobs) c += b.color * std::exp(b.sharpness * (d.dot(b.dir) - 1.0));
            tex(x, y) = c.cwiseMax(Vec3::Constant(0.01));
        }
    return EnvironmentMap(std::move(tex));
}

std::vector<Camera> sphere_rig(int views, const Vec3& target, double distance, int width, int height, double fov_deg,
                               double jitter_deg, std::uint64_t seed) {
    if (views < 1) throw ArgumentError("sphere_rig: need at least one view");
    CounterRng rng(seed, 0x524947ULL);
    std::vector<Camera> cams;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < views; ++i) {
        const double y = 1.0 - 2.0 * (i + 0.5) / views;
        const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        const Vec3 d(r * std::cos(golden * i), y, r * std::sin(golden * i));
        Camera c = look_at(target + distance * d, target, Vec3::UnitY(), width, height, fov_deg);
        if (jitter_deg > 0.0) c.rotation = random_rotation(rng, deg2rad(jitter_deg)) * c.rotation;
        cams.push_back(c);
    }
    return cams;
}

// ------------------------------------------------------------ manifests

json manifest_to_json(const SceneManifest& m) {
    json views = json::array();
    for (const SceneView& v : m.views)
        views.push_back({{"camera", camera_to_json(v.camera)},
                         {"image", v.image.generic_string()},
                         {"mask", v.mask.generic_string()},
                         {"n1", v.n1.generic_string()},
                         {"n2", v.n2.generic_string()}});
    return {{"mesh", m.mesh.generic_string()}, {"ior", m.ior}, {"env", m.env.generic_string()}, {"views", views}};
}

namespace {

std::string require_string(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_string()) throw DataError(where + ": missing string field '" + key + "'");
    return j[key].get<std::string>();
}

}  // namespace

SceneManifest manifest_from_json(const json& j, const fs::path& dir) {
    if (!j.is_object()) throw DataError("scene manifest must be a JSON object");
    SceneManifest m;
    m.dir = dir;
    m.mesh = j.contains("mesh") && j["mesh"].is_string() ? fs::path(j["mesh"].get<std::string>()) : fs::path();
    m.env = require_string(j, "env", "scene manifest");
    if (!j.contains("ior") || !j["ior"].is_number()) throw DataError("scene manifest: missing number field 'ior'");
    m.ior = j["ior"].get<double>();
    if (!j.contains("views") || !j["views"].is_array()) throw DataError("scene manifest: missing array field 'views'");
    for (std::size_t i = 0; i < j["views"].size(); ++i) {
        const json& v = j["views"][i];
        const std::string where = "scene manifest view " + std::to_string(i);
        if (!v.contains("camera")) throw DataError(where + ": missing field 'camera'");
        SceneView sv;
        sv.camera = camera_from_json(v["camera"]);
        sv.image = require_string(v, "image", where);
        sv.mask = require_string(v, "mask", where);
        if (v.contains("n1") && v["n1"].is_string()) sv.n1 = v["n1"].get<std::string>();
        if (v.contains("n2") && v["n2"].is_string()) sv.n2 = v["n2"].get<std::string>();
        m.views.push_back(sv);
    }
    return m;
}

SceneManifest load_manifest(const fs::path& manifest_path) {
    return manifest_from_json(read_json(manifest_path), manifest_path.parent_path());
}

std::vector<SceneManifest> make_dataset(const DatasetParams& params, const fs::path& out_dir) {
    if (params.views < 1) throw ArgumentError("make_dataset: views must be positive");
    if (params.image_size < 8) throw ArgumentError("make_dataset: image size must be at least 8");
    std::vector<SceneManifest> out;
    for (std::size_t s = 0; s < params.shape_seeds.size(); ++s) {
        const std::uint64_t seed = params.shape_seeds[s];
        SceneManifest m;
        m.dir = out_dir / ("scene_" + std::to_string(seed));
        fs::create_directories(m.dir);
        const TriangleMesh mesh = gen_shape(seed, params.shape);
        m.mesh = "gt.ply";
        save_ply(m.dir / m.mesh, mesh);
        const EnvironmentMap env = params.env_files.empty()
                                       ? procedural_envmap(mix64(seed ^ 0xe1e1e1ULL), params.env_height)
                                       : load_envmap(params.env_files[s % params.env_files.size()]);
        m.env = "env.pfm";
        save_pfm(m.dir / m.env, env.texels());
        CounterRng rng(seed, 0x494f52ULL);
        m.ior = params.sample_ior ? rng.uniform(1.3, 1.7) : params.ior;

        const Aabb box = bounds(mesh);
        double radius = 0.0;
        for (const Vec3& v : mesh.vertices) radius = std::max(radius, (v - box.center()).norm());
        const std::vector<Camera> cams = sphere_rig(params.views, box.center(), params.distance_factor * radius,
                                                    params.image_size, params.image_size, params.fov_deg,
                                                    params.jitter_deg, seed);
        MeshSurface surface(mesh);
        TraceOptions opts;
        opts.max_bounces = params.max_bounces;
        opts.samples_per_pixel = params.samples_per_pixel;
        for (int v = 0; v < params.views; ++v) {
            char stem[32];
            std::snprintf(stem, sizeof stem, "view_%02d", v);
            SceneView sv;
            sv.camera = cams[v];
            opts.seed = mix64(seed * 1000003ULL + static_cast<std::uint64_t>(v));
            const ImageBuffer img = path_trace_reference(surface, env, cams[v], m.ior, opts);
            const MaskBuffer mask = render_mask(surface, cams[v]);
            const NormalMapPair gt = gt_normal_maps(surface, cams[v], m.ior);
            ImageBuffer n1(gt.width(), gt.height(), Vec3::Zero()), n2 = n1;
            for (std::size_t i = 0; i < gt.valid.size(); ++i)
                if (gt.valid[i]) {
                    n1[i] = gt.n1[i];
                    n2[i] = gt.n2[i];
                }
            sv.image = std::string(stem) + "_image.pfm";
            sv.mask = std::string(stem) + "_mask.png";
            sv.n1 = std::string(stem) + "_n1.pfm";
            sv.n2 = std::string(stem) + "_n2.pfm";
            save_pfm(m.dir / sv.image, img);
            save_mask_png(m.dir / sv.mask, mask);
            save_pfm(m.dir / sv.n1, n1);
            save_pfm(m.dir / sv.n2, n2);
            m.views.push_back(sv);
        }
        write_json(m.dir / "manifest.json", manifest_to_json(m));
        out.push_back(m);
    }
    return out;
}

SceneData load_scene(const SceneManifest& m, bool with_mesh) {
    SceneData d;
    d.ior = m.ior;
    if (with_mesh && !m.mesh.empty()) d.mesh = load_mesh(m.dir / m.mesh);
    d.env = load_envmap(m.dir / m.env);
    for (const SceneView& v : m.views) {
        d.cameras.push_back(v.camera);
        d.images.push_back(load_pfm_rgb(m.dir / v.image));
        d.masks.push_back(load_mask_png(m.dir / v.mask));
        if (!d.images.back().same_shape(d.masks.back()) || d.images.back().width() != v.camera.width ||
            d.images.back().height() != v.camera.height)
            throw DataError(v.image.generic_string() + ": image, mask and camera sizes differ");
        NormalMapPair gt;
        if (!v.n1.empty() && !v.n2.empty()) {
            const ImageBuffer n1 = load_pfm_rgb(m.dir / v.n1), n2 = load_pfm_rgb(m.dir / v.n2);
            gt = NormalMapPair(n1.width(), n1.height());
            for (std::size_t i = 0; i < n1.size(); ++i) {
                if (n1[i].squaredNorm() == 0.0 || n2[i].squaredNorm() == 0.0) continue;
                gt.n1[i] = n1[i].normalized();
                gt.n2[i] = n2[i].normalized();
                gt.valid[i] = 1;
                const Vec3 li = pixel_center_ray(v.camera, static_cast<int>(i % n1.width()),
                                                 static_cast<int>(i / n1.width())).dir;
                auto lm = refract(li, gt.n1[i], 1.0 / m.ior);
                gt.tir[i] = lm && refract(*lm, gt.n2[i], m.ior) ? 0 : 1;
            }
        }
        d.gt.push_back(std::move(gt));
    }
    return d;
}

}  // namespace refracta
