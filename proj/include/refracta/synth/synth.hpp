#pragma once

#include "refracta/geom/bvh.hpp"
#include "refracta/geom/camera.hpp"
#include "refracta/geom/envmap.hpp"
#include "refracta/geom/io.hpp"
#include "refracta/geom/mesh.hpp"
#include "refracta/optics/optics.hpp"

#include <cstdint>
#include <vector>

namespace refracta {

struct Primitive {
    enum class Kind { Sphere, Ellipsoid, Capsule };
    Kind kind = Kind::Sphere;
    Vec3 center = Vec3::Zero();
    Vec3 radii = Vec3::Constant(0.5);  // sphere uses x; capsule uses x as radius
    Mat3 rotation = Mat3::Identity();  // ellipsoid axes
    Vec3 end = Vec3::Zero();           // capsule second endpoint

    /// Signed distance (exact for spheres and capsules, first-order for ellipsoids).
    double distance(const Vec3& p) const;
};

struct ShapeParams {
    int min_primitives = 3;
    int max_primitives = 8;
    int resolution = 128;
    int subdivisions = 1;
    double blend = 0.12;  // smooth-min radius
    /// When non-empty these are used verbatim and no normalization is applied.
    std::vector<Primitive> primitives;
};

/// Random primitive set for a seed, scaled so the union fits in the unit ball.
std::vector<Primitive> random_primitives(std::uint64_t seed, const ShapeParams& params = {});

/// Smooth-min union of the primitives, polygonized and Loop-subdivided.
/// Throws NumericalError if the result is not a closed mesh.
TriangleMesh gen_shape(std::uint64_t seed, const ShapeParams& params = {});

/// Ground-truth normal maps: the hull tracing procedure applied to the true surface.
NormalMapPair gt_normal_maps(const Surface& gt, const Camera& camera, double ior);

/// Silhouette: pixels whose primary ray hits the surface.
MaskBuffer render_mask(const Surface& surface, const Camera& camera);

struct TraceOptions {
    int max_bounces = 2;
    int samples_per_pixel = 1;
    std::uint64_t seed = 0;
    /// Uniform sub-pixel jitter; off means every sample goes through the pixel center.
    bool jitter = false;
    /// Full Fresnel branching when max_bounces <= branch_limit, Russian roulette otherwise.
    int branch_limit = 4;
};

/// Brute-force dielectric path tracer under distant environment lighting.
/// Paths that would need more than max_bounces surface interactions contribute zero.
/// Pixels whose primary ray misses see the environment directly.
ImageBuffer path_trace_reference(const Surface& surface, const EnvironmentMap& env, const Camera& camera, double ior,
                                 const TraceOptions& options);

/// Smooth, colorful environment with `frequency` controlling detail.
EnvironmentMap procedural_envmap(std::uint64_t seed, int height = 128, double frequency = 6.0);

/// Cameras on Fibonacci-sphere directions at `distance` from `target`, looking at
/// it, with a random orientation jitter of up to `jitter_deg`.
std::vector<Camera> sphere_rig(int views, const Vec3& target, double distance, int width, int height, double fov_deg,
                               double jitter_deg, std::uint64_t seed);

struct DatasetParams {
    std::vector<std::uint64_t> shape_seeds = {1};
    std::vector<fs::path> env_files;  // cycled over scenes; procedural when empty
    int views = 10;
    int image_size = 128;
    double ior = kDefaultIor;
    bool sample_ior = false;  // per-scene ior uniform in [1.3, 1.7]
    int max_bounces = 4;
    int samples_per_pixel = 1;
    double distance_factor = 2.5;
    double fov_deg = 60.0;
    double jitter_deg = 3.0;
    int env_height = 128;
    ShapeParams shape;
};

/// One scene bundle as described by its manifest.
struct SceneView {
    Camera camera;
    fs::path image, mask, n1, n2;
};
struct SceneManifest {
    fs::path dir;
    fs::path mesh;
    fs::path env;
    double ior = kDefaultIor;
    std::vector<SceneView> views;
};

json manifest_to_json(const SceneManifest& m);
/// Paths in the manifest are relative to `dir`. Throws DataError on schema problems.
SceneManifest manifest_from_json(const json& j, const fs::path& dir);
SceneManifest load_manifest(const fs::path& manifest_path);

/// Writes scene_<seed>/ bundles under `out_dir`; returns their manifests.
std::vector<SceneManifest> make_dataset(const DatasetParams& params, const fs::path& out_dir);

/// Loaded view data of a scene.
struct SceneData {
    TriangleMesh mesh;
    EnvironmentMap env;
    double ior = kDefaultIor;
    std::vector<Camera> cameras;
    std::vector<ImageBuffer> images;
    std::vector<MaskBuffer> masks;
    std::vector<NormalMapPair> gt;  // empty maps when the bundle has no normals
};
SceneData load_scene(const SceneManifest& manifest, bool with_mesh = true);

}  // namespace refracta
