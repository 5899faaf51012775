#include "refracta/costvol/costvol.hpp"

#include "refracta/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace refracta {

double AngleSchedule::max_theta() const {
    double m = 0.0;
    for (double t : theta_deg) m = std::max(m, t);
    return m;
}

AngleSchedule AngleSchedule::uniform(double spread_deg, int k) {
    if (k < 1) throw ArgumentError("angle schedule needs at least one sample");
    AngleSchedule s;
    s.theta_deg.push_back(0.0);
    s.phi_deg.push_back(0.0);
    for (int i = 1; i < k; ++i) {
        s.theta_deg.push_back(spread_deg);
        s.phi_deg.push_back(360.0 * (i - 1) / (k - 1));
    }
    return s;
}

LocalFrame local_frame(const Vec3& n, const Vec3& up) {
    LocalFrame f;
    f.z = n;
    Vec3 u = up;
    if (std::abs(u.dot(n)) > 1.0 - 1e-6) {
        u = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitZ();
        f.fallback = true;
    }
    f.y = (u - u.dot(n) * n).normalized();
    f.x = f.y.cross(f.z);
    return f;
}

std::vector<Vec3> sample_normals(const Vec3& n, const AngleSchedule& schedule, const Vec3& up) {
    const LocalFrame f = local_frame(n, up);
    std::vector<Vec3> out;
    out.reserve(schedule.theta_deg.size());
    for (int k = 0; k < schedule.size(); ++k) {
        const double t = deg2rad(schedule.theta_deg[k]), p = deg2rad(schedule.phi_deg[k]);
        if (t == 0.0) {
            out.push_back(n);
            continue;
        }
        out.push_back((f.x * std::cos(p) * std::sin(t) + f.y * std::sin(p) * std::sin(t) + f.z * std::cos(t)).normalized());
    }
    return out;
}

double nearest_rank_percentile(std::vector<double> values, double q) {
    if (values.empty()) throw ArgumentError("percentile of an empty list");
    if (!(q > 0.0 && q <= 1.0)) throw ArgumentError("percentile rank must lie in (0, 1]");
    std::sort(values.begin(), values.end());
    const std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size()) - 1e-12));
    return values[std::max<std::size_t>(rank, 1) - 1];
}

AngleSchedule angle_schedule_for_views(int views, const std::vector<double>& calibration_errors, int k) {
    if (views < 2) throw ArgumentError("angle_schedule_for_views: at least two views are required");
    if (!calibration_errors.empty()) return AngleSchedule::uniform(nearest_rank_percentile(calibration_errors, 0.85), k);
    // (1/V, spread) knots
    const double x = 1.0 / views;
    const double knots[3][2] = {{1.0 / 20, 10.0}, {1.0 / 10, 15.0}, {1.0 / 5, 25.0}};
    double spread;
    if (x <= knots[0][0]) spread = knots[0][1];
    else if (x >= knots[2][0]) spread = knots[2][1];
    else {
        const int seg = x <= knots[1][0] ? 0 : 1;
        const double a = (x - knots[seg][0]) / (knots[seg + 1][0] - knots[seg][0]);
        spread = knots[seg][1] + a * (knots[seg + 1][1] - knots[seg][1]);
    }
    return AngleSchedule::uniform(std::clamp(spread, 10.0, 25.0), k);
}

double candidate_cost(const Vec3& observed, const EnvironmentMap& env, const Vec3& incident, const Vec3& n1,
                      const Vec3& n2, double ior, double tir_penalty) {
    const TwoBounce<double> s = shade_two_bounce(env, incident, V3<double>(n1.x(), n1.y(), n1.z()),
                                                 V3<double>(n2.x(), n2.y(), n2.z()), ior);
    if (s.tir) return tir_penalty;
    return std::abs(observed.x() - s.reflected.x - s.transmitted.x) +
           std::abs(observed.y() - s.reflected.y - s.transmitted.y) +
           std::abs(observed.z() - s.reflected.z - s.transmitted.z);
}

namespace {

Vec3 clamp_to_cone(const Vec3& n, const Vec3& axis, double max_angle) {
    const double c = std::clamp(n.dot(axis), -1.0, 1.0);
    if (std::acos(c) <= max_angle) return n;
    Vec3 t = n - c * axis;
    if (t.norm() < 1e-12) t = local_frame(axis, Vec3::UnitY()).x;
    t.normalize();
    return std::cos(max_angle) * axis + std::sin(max_angle) * t;
}

}  // namespace

void tv_smooth(ImageBuffer& normals, const MaskBuffer& valid, const ImageBuffer& anchor, double weight, int iterations,
               double max_angle_deg) {
    if (!normals.same_shape(valid) || !normals.same_shape(anchor)) throw ArgumentError("tv_smooth: map sizes differ");
    if (weight <= 0.0 || iterations <= 0) return;
    const int w = normals.width(), h = normals.height();
    const double max_angle = deg2rad(max_angle_deg);
    constexpr double eps = 0.05;
    for (int it = 0; it < iterations; ++it)
        for (int color = 0; color < 2; ++color)
            parallel_for(normals.size(), [&](std::size_t i) {
                const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
                if (((x + y) & 1) != color || !valid[i]) return;
                const Vec3 n = normals[i];
                Vec3 pull = Vec3::Zero();
                const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
                for (const auto& q : nb) {
                    if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h || !valid(q[0], q[1])) continue;
                    const Vec3 d = normals(q[0], q[1]) - n;
                    pull += eps / std::sqrt(d.squaredNorm() + eps * eps) * d;
                }
                pull -= pull.dot(n) * n;
                normals[i] = clamp_to_cone((n + weight * pull).normalized(), anchor[i], max_angle);
            }, 256);
}

SearchResult search_normals(const ImageBuffer& image, const EnvironmentMap& env, const NormalMapPair& hull,
                            const Camera& camera, double ior, const AngleSchedule& schedule,
                            const SearchConfig& config) {
    if (!(ior > 1.0)) throw ArgumentError("search_normals: ior must exceed 1");
    if (!image.same_shape(hull.valid) || camera.width != image.width() || camera.height != image.height())
        throw ArgumentError("search_normals: image, hull maps and camera differ in size");
    if (schedule.size() < 1 || schedule.phi_deg.size() != schedule.theta_deg.size())
        throw ArgumentError("search_normals: malformed angle schedule");
    if (config.tau < 0.0) throw ArgumentError("search_normals: tau must be non-negative");
    const int w = image.width(), h = image.height(), K = schedule.size();
    const Vec3 up = camera.up();
    SearchResult res{hull, ScalarImage(w, h, 0.0), Image<int>(w, h, -1)};
    parallel_for(image.size(), [&](std::size_t i) {
        if (!hull.valid[i]) return;
        const Vec3 li = pixel_center_ray(camera, static_cast<int>(i % w), static_cast<int>(i / w)).dir;
        const std::vector<Vec3> c1 = sample_normals(hull.n1[i], schedule, up);
        const std::vector<Vec3> c2 = sample_normals(hull.n2[i], schedule, up);
        std::vector<double> cost(static_cast<std::size_t>(K) * K);
        for (int a = 0; a < K; ++a)
            for (int b = 0; b < K; ++b)
                cost[a * K + b] = candidate_cost(image[i], env, li, c1[a], c2[b], ior, config.tir_penalty);
        const auto [lo_it, hi_it] = std::minmax_element(cost.begin(), cost.end());
        const double cmin = *lo_it, range = *hi_it - *lo_it;
        const int best = static_cast<int>(lo_it - cost.begin());
        res.cost[i] = cmin;
        res.best_pair[i] = best;
        if (config.tau == 0.0) {
            res.normals.n1[i] = c1[best / K];
            res.normals.n2[i] = c2[best % K];
            return;
        }
        Vec3 s1 = Vec3::Zero(), s2 = Vec3::Zero();
        for (int a = 0; a < K; ++a)
            for (int b = 0; b < K; ++b) {
                const double wt = range > 0.0 ? std::exp(-(cost[a * K + b] - cmin) / (config.tau * range)) : 1.0;
                s1 += wt * c1[a];
                s2 += wt * c2[b];
            }
        res.normals.n1[i] = s1.norm() > 1e-12 ? s1.normalized() : c1[best / K];
        res.normals.n2[i] = s2.norm() > 1e-12 ? s2.normalized() : c2[best % K];
    }, 16);
    const double cone = schedule.max_theta();
    tv_smooth(res.normals.n1, hull.valid, hull.n1, config.tv_weight, config.tv_iters, cone);
    tv_smooth(res.normals.n2, hull.valid, hull.n2, config.tv_weight, config.tv_iters, cone);
    parallel_for(image.size(), [&](std::size_t i) {
        if (!hull.valid[i]) return;
        const Vec3 li = pixel_center_ray(camera, static_cast<int>(i % w), static_cast<int>(i / w)).dir;
        auto lm = refract(li, res.normals.n1[i], 1.0 / ior);
        res.normals.tir[i] = lm && refract(*lm, res.normals.n2[i], ior) ? 0 : 1;
    }, 256);
    return res;
}

}  // namespace refracta
