#pragma once

#include "refracta/geom/io.hpp"
#include "refracta/geom/mesh.hpp"
#include "refracta/optics/optics.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace refracta {

inline constexpr std::size_t kEvalSamples = 20000;

struct ChamferMetrics {
    double cd = 0.0;            // 0.5 * (mean squared A->B + mean squared B->A) nearest distances
    double cdn_mean_deg = 0.0;  // angle to the nearest sample's normal, both directions pooled
    double cdn_med_deg = 0.0;
};

/// Uniform area-weighted samples (face normals) on both meshes from the same
/// seed, so a mesh compared with itself scores exactly zero. Nearest
/// neighbors via kd-tree. Throws DataError on a zero-area mesh.
ChamferMetrics chamfer_metrics(const TriangleMesh& a, const TriangleMesh& b, std::size_t samples = kEvalSamples,
                               std::uint64_t seed = 0);

/// The same quantities from explicit samples with an O(n^2) scan.
ChamferMetrics chamfer_metrics_brute_force(const SurfaceSamples& a, const SurfaceSamples& b);
ChamferMetrics chamfer_metrics_from_samples(const SurfaceSamples& a, const SurfaceSamples& b);

/// 0.5 * (mean distance of A's samples to B's surface + mean distance of B's samples to A's surface).
double metro(const TriangleMesh& a, const TriangleMesh& b, std::size_t samples = kEvalSamples, std::uint64_t seed = 0);

struct NormalErrorStats {
    AngleStats n1;
    AngleStats n2;
    double render_error = 0.0;  // mean error-map luminance over the silhouette
};

/// Angles over the intersection of both valid masks. `error_map`, when given,
/// supplies the rendering error averaged over the gt silhouette.
NormalErrorStats normal_error_stats(const NormalMapPair& pred, const NormalMapPair& gt,
                                    const ScalarImage* error_map = nullptr);

/// Metric values keyed group -> label -> name, plus run metadata.
struct MetricsReport {
    std::map<std::string, std::map<std::string, std::map<std::string, double>>> values;
    void set(const std::string& group, const std::string& label, const std::string& name, double v) {
        values[group][label][name] = v;
    }
};

struct RunMetadata {
    std::string version;
    std::string config_hash;
    std::map<std::string, std::uint64_t> seeds;
    std::map<std::string, double> timings_s;  // stage wall-clock seconds
    std::string timestamp;                     // ISO 8601, UTC
};

inline constexpr int kMetricsSchemaVersion = 1;

json report_to_json(const MetricsReport& report, const RunMetadata& meta);
MetricsReport report_from_json(const json& j);
/// Writes <dir>/metrics.json and <dir>/metrics.csv (group,label,metric,value).
void emit_report(const fs::path& dir, const MetricsReport& report, const RunMetadata& meta);

/// Current UTC time as ISO 8601.
std::string utc_timestamp();

}  // namespace refracta
