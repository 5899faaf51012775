#pragma once

#include "refracta/geom/bvh.hpp"
#include "refracta/geom/camera.hpp"
#include "refracta/geom/io.hpp"
#include "refracta/geom/mesh.hpp"
#include "refracta/optics/optics.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace refracta {

/// Hull samples with fused per-point features. View ids are 1-based; 0 = none.
struct OrientedPointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> hull_normals;
    std::vector<Vec3> normals;  // fused N1
    std::vector<double> error;  // I^er, luminance
    std::vector<double> tir;    // M^tr in [0, 1]
    std::vector<double> cosine;
    std::vector<int> view;

    std::size_t size() const { return points.size(); }
    /// Initialization for every point: hull normal, error 2, M^tr 1, cosine 0, view 0.
    void reset_features();
};

inline constexpr double kErrorSentinel = 2.0;

/// Area-weighted uniform samples with the mesh's interpolated normals.
OrientedPointCloud sample_hull_points(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

/// Per-view maps consumed by the mapping operators (world-frame normals).
struct ViewPrediction {
    Camera camera;
    ImageBuffer n1;
    ScalarImage error;  // luminance of the rendering error
    ScalarImage tir;    // 0 / 1
    MaskBuffer valid;
};

/// I^er and M^tr of a normal-map pair against the captured image.
ViewPrediction make_view_prediction(const ImageBuffer& image, const EnvironmentMap& env, const NormalMapPair& normals,
                                    const Camera& camera, double ior);

/// Offset used to keep visibility segments off the surface they end on.
double visibility_epsilon(const AccelIndex& hull);

/// True when `p` projects inside the frame and the segment from the camera
/// center to `p` (shortened by `eps`) does not hit the hull.
bool visibility(const AccelIndex& hull, const Camera& camera, const Vec3& p, double eps);
bool visibility(const AccelIndex& hull, const Camera& camera, const Vec3& p);

/// Bilinear samples of one view at one point (S_v), or nothing when the point
/// is not visible or no valid map tap surrounds its projection.
struct ViewSample {
    Vec3 normal;
    double error = 0.0;
    double tir = 0.0;
    double cosine = 0.0;
};
std::optional<ViewSample> sample_view(const AccelIndex& hull, const ViewPrediction& view, const Vec3& p, double eps);

/// Precomputed samples of every view at every point: samples[point][view].
using SampleTable = std::vector<std::vector<std::optional<ViewSample>>>;
SampleTable sample_views(const AccelIndex& hull, const std::vector<ViewPrediction>& views,
                         const std::vector<Vec3>& points);

/// M^tr threshold for treating a sampled value as TIR.
inline bool is_tir(double m) { return m >= 0.5; }

/// Sequential best-view selection (error-based, TIR-aware).
void map_features_re(OrientedPointCloud& cloud, const AccelIndex& hull, const std::vector<ViewPrediction>& views);
/// Visibility-weighted averages; view id is the visible view with the largest cosine.
void map_features_avg(OrientedPointCloud& cloud, const AccelIndex& hull, const std::vector<ViewPrediction>& views);
/// Features of the visible view with the largest cosine (lowest index on ties).
void map_features_nearest(OrientedPointCloud& cloud, const AccelIndex& hull, const std::vector<ViewPrediction>& views);

/// Same operators on a precomputed sample table.
void map_features_re(OrientedPointCloud& cloud, const SampleTable& samples);
void map_features_avg(OrientedPointCloud& cloud, const SampleTable& samples);
void map_features_nearest(OrientedPointCloud& cloud, const SampleTable& samples);

/// PLY with x y z nx ny nz err tir cos view (plus hnx hny hnz hull normals).
void save_point_cloud(const fs::path& path, const OrientedPointCloud& cloud);
OrientedPointCloud load_point_cloud(const fs::path& path);

}  // namespace refracta
