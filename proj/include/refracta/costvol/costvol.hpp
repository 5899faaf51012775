#pragma once

#include "refracta/geom/camera.hpp"
#include "refracta/geom/envmap.hpp"
#include "refracta/geom/image.hpp"
#include "refracta/optics/optics.hpp"

#include <vector>

namespace refracta {

/// Polar offsets (degrees) of the K normal hypotheses around a hull normal.
struct AngleSchedule {
    std::vector<double> theta_deg;
    std::vector<double> phi_deg;

    int size() const { return static_cast<int>(theta_deg.size()); }
    double max_theta() const;
    /// theta = (0, spread, ..., spread), phi = (0, 0, 360/(K-1), ...).
    static AngleSchedule uniform(double spread_deg, int k = 4);
};

struct LocalFrame {
    Vec3 x, y, z;
    bool fallback = false;  // U was (nearly) parallel to the normal
};

/// Z = n, Y = U projected off n, X = Y x Z. Falls back to a fixed alternate
/// up vector when |U . n| > 1 - 1e-6.
LocalFrame local_frame(const Vec3& n, const Vec3& up);

/// X cos(phi) sin(theta) + Y sin(phi) sin(theta) + Z cos(theta) for each schedule entry.
std::vector<Vec3> sample_normals(const Vec3& n, const AngleSchedule& schedule, const Vec3& up);

/// Spread for V views: 25/15/10 degrees at V = 5/10/20, piecewise linear in 1/V
/// between (and clamped to [10, 25]) otherwise. With calibration errors
/// (degrees) the spread is their nearest-rank 85th percentile instead.
/// Throws ArgumentError for V < 2.
AngleSchedule angle_schedule_for_views(int views, const std::vector<double>& calibration_errors = {}, int k = 4);

/// Nearest-rank percentile (q in (0, 1]) of a non-empty list.
double nearest_rank_percentile(std::vector<double> values, double q);

struct SearchConfig {
    double tau = 0.05;          // soft-min temperature as a fraction of the per-pixel cost range; 0 = argmin
    double tv_weight = 0.1;
    int tv_iters = 30;
    double tir_penalty = 2.0;
};

struct SearchResult {
    NormalMapPair normals;
    ScalarImage cost;         // lowest candidate cost per pixel
    Image<int> best_pair;     // k * K + k' of the lowest-cost candidate, -1 outside the mask
};

/// Per-pixel evaluation of all K x K candidate pairs around the hull normals,
/// soft-min selection, then tangent-plane TV smoothing clamped to the
/// schedule's cone around the hull normals.
SearchResult search_normals(const ImageBuffer& image, const EnvironmentMap& env, const NormalMapPair& hull,
                            const Camera& camera, double ior, const AngleSchedule& schedule,
                            const SearchConfig& config = {});

/// L1 rendering cost of a single candidate pair at one pixel (penalty on TIR).
double candidate_cost(const Vec3& observed, const EnvironmentMap& env, const Vec3& incident, const Vec3& n1,
                      const Vec3& n2, double ior, double tir_penalty);

/// Smoothing pass on its own, exposed for tests: Charbonnier-weighted
/// neighbor averaging in red-black order, each normal kept within
/// `max_angle_deg` of its anchor.
void tv_smooth(ImageBuffer& normals, const MaskBuffer& valid, const ImageBuffer& anchor, double weight, int iterations,
               double max_angle_deg);

}  // namespace refracta
