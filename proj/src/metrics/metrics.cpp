#include "refracta/metrics/metrics.hpp"

#include "refracta/geom/bvh.hpp"
#include "refracta/geom/kdtree.hpp"
#include "refracta/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

namespace refracta {

namespace {

SurfaceSamples eval_samples(const TriangleMesh& m, std::size_t n, std::uint64_t seed) {
    if (m.empty() || !(surface_area(m) > 0.0)) throw DataError("metrics: degenerate (zero-area) mesh");
    return sample_surface(m, n, seed, false);
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ChamferMetrics combine(const std::vector<double>& d2_ab, const std::vector<double>& d2_ba,
                       const std::vector<double>& ang_ab, const std::vector<double>& ang_ba) {
    const double ma = deterministic_sum(d2_ab.size(), [&](std::size_t i) { return d2_ab[i]; }, 0.0) / d2_ab.size();
    const double mb = deterministic_sum(d2_ba.size(), [&](std::size_t i) { return d2_ba[i]; }, 0.0) / d2_ba.size();
    std::vector<double> ang = ang_ab;
    ang.insert(ang.end(), ang_ba.begin(), ang_ba.end());
    ChamferMetrics m;
    m.cd = 0.5 * (ma + mb);
    m.cdn_mean_deg = deterministic_sum(ang.size(), [&](std::size_t i) { return ang[i]; }, 0.0) / ang.size();
    m.cdn_med_deg = median_of(ang);
    return m;
}

}  // namespace

ChamferMetrics chamfer_metrics_from_samples(const SurfaceSamples& a, const SurfaceSamples& b) {
    if (a.points.empty() || b.points.empty()) throw ArgumentError("chamfer_metrics: empty sample set");
    auto one_way = [](const SurfaceSamples& p, const SurfaceSamples& q, std::vector<double>& d2, std::vector<double>& ang) {
        const PointIndex index(q.points);
        d2.resize(p.points.size());
        ang.resize(p.points.size());
        parallel_for(p.points.size(), [&](std::size_t i) {
            const Neighbor nn = index.nearest(p.points[i]);
            d2[i] = nn.distance_sq;
            ang[i] = angle_deg(p.normals[i], q.normals[nn.index]);
        }, 128);
    };
    std::vector<double> d_ab, d_ba, a_ab, a_ba;
    one_way(a, b, d_ab, a_ab);
    one_way(b, a, d_ba, a_ba);
    return combine(d_ab, d_ba, a_ab, a_ba);
}

ChamferMetrics chamfer_metrics_brute_force(const SurfaceSamples& a, const SurfaceSamples& b) {
    if (a.points.empty() || b.points.empty()) throw ArgumentError("chamfer_metrics: empty sample set");
    auto one_way = [](const SurfaceSamples& p, const SurfaceSamples& q, std::vector<double>& d2, std::vector<double>& ang) {
        for (std::size_t i = 0; i < p.points.size(); ++i) {
            const Neighbor nn = nearest_brute_force(q.points, p.points[i]);
            d2.push_back(nn.distance_sq);
            ang.push_back(angle_deg(p.normals[i], q.normals[nn.index]));
        }
    };
    std::vector<double> d_ab, d_ba, a_ab, a_ba;
    one_way(a, b, d_ab, a_ab);
    one_way(b, a, d_ba, a_ba);
    return combine(d_ab, d_ba, a_ab, a_ba);
}

ChamferMetrics chamfer_metrics(const TriangleMesh& a, const TriangleMesh& b, std::size_t samples, std::uint64_t seed) {
    if (samples == 0) throw ArgumentError("chamfer_metrics: sample count must be positive");
    return chamfer_metrics_from_samples(eval_samples(a, samples, seed), eval_samples(b, samples, seed));
}

double metro(const TriangleMesh& a, const TriangleMesh& b, std::size_t samples, std::uint64_t seed) {
    if (samples == 0) throw ArgumentError("metro: sample count must be positive");
    const SurfaceSamples sa = eval_samples(a, samples, seed), sb = eval_samples(b, samples, seed);
    auto one_way = [](const SurfaceSamples& p, const TriangleMesh& target) {
        const AccelIndex index(target);
        std::vector<double> d(p.points.size());
        parallel_for(d.size(), [&](std::size_t i) { d[i] = std::sqrt(index.closest_point(p.points[i]).distance_sq); }, 128);
        return deterministic_sum(d.size(), [&](std::size_t i) { return d[i]; }, 0.0) / static_cast<double>(d.size());
    };
    return 0.5 * (one_way(sa, b) + one_way(sb, a));
}

NormalErrorStats normal_error_stats(const NormalMapPair& pred, const NormalMapPair& gt, const ScalarImage* error_map) {
    if (!pred.valid.same_shape(gt.valid)) throw ArgumentError("normal_error_stats: map sizes differ");
    if (error_map && !error_map->same_shape(gt.valid)) throw ArgumentError("normal_error_stats: error map size differs");
    MaskBuffer both(gt.width(), gt.height(), 0);
    for (std::size_t i = 0; i < both.size(); ++i) both[i] = pred.valid[i] && gt.valid[i];
    NormalErrorStats s;
    s.n1 = angle_stats(pred.n1, gt.n1, both);
    s.n2 = angle_stats(pred.n2, gt.n2, both);
    if (error_map) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < both.size(); ++i)
            if (gt.valid[i]) sum += (*error_map)[i], ++n;
        s.render_error = n ? sum / static_cast<double>(n) : 0.0;
    }
    return s;
}

json report_to_json(const MetricsReport& report, const RunMetadata& meta) {
    json j;
    j["schema_version"] = kMetricsSchemaVersion;
    j["version"] = meta.version;
    j["config_hash"] = meta.config_hash;
    j["seeds"] = json::object();
    for (const auto& [k, v] : meta.seeds) j["seeds"][k] = v;
    j["timings_s"] = json::object();
    for (const auto& [k, v] : meta.timings_s) j["timings_s"][k] = v;
    j["timestamp"] = meta.timestamp;
    j["metrics"] = json::object();
    for (const auto& [g, labels] : report.values)
        for (const auto& [l, names] : labels)
            for (const auto& [n, v] : names) {
                if (!std::isfinite(v)) throw NumericalError("metric " + g + "/" + l + "/" + n + " is not finite");
                j["metrics"][g][l][n] = v;
            }
    return j;
}

MetricsReport report_from_json(const json& j) {
    MetricsReport r;
    if (!j.contains("metrics") || !j["metrics"].is_object()) throw DataError("metrics report: missing 'metrics'");
    for (const auto& [g, labels] : j["metrics"].items())
        for (const auto& [l, names] : labels.items())
            for (const auto& [n, v] : names.items()) r.set(g, l, n, v.get<double>());
    return r;
}

void emit_report(const fs::path& dir, const MetricsReport& report, const RunMetadata& meta) {
    fs::create_directories(dir);
    write_json(dir / "metrics.json", report_to_json(report, meta));
    std::ostringstream csv;
    csv.precision(17);
    csv << "group,label,metric,value\n";
    for (const auto& [g, labels] : report.values)
        for (const auto& [l, names] : labels)
            for (const auto& [n, v] : names) csv << g << ',' << l << ',' << n << ',' << v << '\n';
    write_file_bytes(dir / "metrics.csv", csv.str());
}

std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace refracta
