// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: refracta_acceptance [--work DIR] [--known-failure N]... [criterion numbers...]
// Exit status is 0 when the failing criteria are exactly the declared known failures.

#include "test_util.hpp"

#include "refracta/cli/pipeline.hpp"
#include "refracta/costvol/costvol.hpp"
#include "refracta/fuse/fuse.hpp"
#include "refracta/hull/hull.hpp"
#include "refracta/metrics/metrics.hpp"
#include "refracta/parallel.hpp"
#include "refracta/surface/surface.hpp"
#include "refracta/synth/synth.hpp"

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

using namespace refracta;
using namespace refracta::testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

fs::path g_work = "acceptance_work";

// ---------------------------------------------------------------- 1

Outcome optics_oracle() {
    set_thread_count(8);
    const int res = 256;
    const Camera cam = test_camera(res, res, Vec3(0.3, 0.2, -3.2), Vec3::Zero(), 40.0);
    const EnvironmentMap env = procedural_envmap(11, 128);
    const SphereSurface sphere(Vec3::Zero(), 1.0);
    const auto t0 = Clock::now();
    TraceOptions opts;
    opts.max_bounces = 2;
    opts.samples_per_pixel = 1024;
    opts.seed = 5;
    const ImageBuffer traced = path_trace_reference(sphere, env, cam, kDefaultIor, opts);
    const NormalMapPair np = analytic_sphere_normals(cam, Vec3::Zero(), 1.0, kDefaultIor);
    const RenderOutput out = render_layer(env, np, cam, kDefaultIor);
    const double secs = since(t0);
    double worst = 0.0;
    std::size_t silhouette = 0, compared = 0, tir_disagree = 0;
    for (std::size_t i = 0; i < traced.size(); ++i) {
        const Ray ray = pixel_center_ray(cam, static_cast<int>(i % res), static_cast<int>(i / res));
        const auto h1 = sphere.intersect(ray, 0.0);
        if (!h1) continue;
        ++silhouette;
        // TIR from the traced geometry: refract in, hit the far side, try to leave
        bool tir = true;
        if (auto lm = refract(ray.dir, h1->normal, 1.0 / kDefaultIor))
            if (auto h2 = sphere.intersect(Ray{h1->point, *lm}, 1e-9)) tir = !refract(*lm, h2->normal, kDefaultIor);
        if (tir != (np.valid[i] && out.tir[i])) ++tir_disagree;
        if (!np.valid[i] || out.tir[i]) continue;
        ++compared;
        worst = std::max(worst, (traced[i] - out.reflected[i] - out.transmitted[i]).cwiseAbs().maxCoeff());
    }
    set_thread_count(0);
    const double tir_frac = silhouette ? double(tir_disagree) / silhouette : 1.0;
    return {compared > 10000 && worst < 1e-3 && tir_frac < 0.005 && secs < 60.0,
            fmt("max|d|=%.3e over %zu non-TIR px, TIR disagreement %.4f%% of %zu silhouette px, %.1f s", worst, compared,
                100 * tir_frac, silhouette, secs)};
}

// ---------------------------------------------------------------- 2

Outcome fresnel_snell() {
    double worst_f = 0.0;
    for (double eta : {1.1, 1.3, 1.4723, 1.7, 2.4}) {
        const Vec3 n = Vec3::UnitZ(), l = -n;
        const double want = std::pow((eta - 1) / (eta + 1), 2);
        worst_f = std::max({worst_f, std::abs(fresnel(l, l, n, eta) - want), std::abs(fresnel(l, l, n, 1.0 / eta) - want)});
    }
    double lo = 0, hi = 90;
    for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        const Vec3 l(std::sin(deg2rad(mid)), 0, std::cos(deg2rad(mid)));
        (refract(l, Vec3::UnitZ(), kDefaultIor) ? lo : hi) = mid;
    }
    const double crit_err = std::abs(lo - rad2deg(std::asin(1 / kDefaultIor)));
    CounterRng rng(2024, 0);
    std::size_t cases = 0, ok = 0, refracted = 0;
    double worst_rev = 0.0;
    for (; cases < 100000; ++cases) {
        const Vec3 n = random_unit(rng);
        Vec3 l = random_unit(rng);
        if (l.dot(n) > 0) l = -l;
        const double eta = rng.uniform(0.5, 2.0);
        const double sin_i = l.cross(n).norm();
        const auto t = refract(l, n, eta);
        const bool expect_tir = eta * sin_i > 1.0;
        if (std::abs(eta * sin_i - 1.0) < 1e-9) {
            ++ok;
            continue;
        }
        if (!t) {
            ok += expect_tir;
            continue;
        }
        ++refracted;
        const auto back = refract(-*t, n, 1.0 / eta);
        const double sin_t = t->cross(n).norm();
        const double rev = back ? (*back + l).norm() : 1.0;
        worst_rev = std::max(worst_rev, rev);
        ok += !expect_tir && rev < 1e-9 && std::abs(eta * sin_i - sin_t) < 1e-9;
    }
    return {worst_f < 1e-9 && crit_err < 0.01 && ok == cases,
            fmt("normal-incidence |dF|=%.1e, critical angle off by %.2e deg, Snell/reversibility %zu/%zu (%zu refracted, worst %.1e)",
                worst_f, crit_err, ok, cases, refracted, worst_rev)};
}

// ---------------------------------------------------------------- 3

Outcome gradient_check() {
    const auto t0 = Clock::now();
    std::size_t good = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const int res = 32;
        const Camera cam = test_camera(res, res, Vec3(0.3, -0.4, -3.2));
        const EnvironmentMap env = procedural_envmap(seed, 128, 4.0);
        NormalMapPair n = analytic_sphere_normals(cam, Vec3::Zero(), 1.0, kDefaultIor);
        const ImageBuffer image = render_layer(env, n, cam, kDefaultIor).sum();
        CounterRng rng(seed, 1);
        for (std::size_t i = 0; i < n.valid.size(); ++i) {
            if (!n.valid[i]) continue;
            n.n1[i] = (n.n1[i] + 0.15 * random_unit(rng)).normalized();
            n.n2[i] = (n.n2[i] + 0.15 * random_unit(rng)).normalized();
        }
        const RenderLossGrad g = render_loss_and_grad(image, env, n, cam, kDefaultIor);
        const RenderOutput base = render_layer(env, n, cam, kDefaultIor);
        for (std::size_t i = 0; i < n.valid.size(); ++i) {
            if (!n.valid[i] || base.tir[i]) continue;
            for (int which = 0; which < 2; ++which) {
                Vec3& v = which == 0 ? n.n1[i] : n.n2[i];
                const Vec3 v0 = v;
                Vec3 t = random_unit(rng);
                t = (t - t.dot(v0) * v0).normalized();
                const double h = 1e-5;
                v = (v0 + h * t).normalized();
                const double lp = render_loss(image, env, n, cam, kDefaultIor);
                v = (v0 - h * t).normalized();
                const double lm = render_loss(image, env, n, cam, kDefaultIor);
                v = v0;
                const double fd = (lp - lm) / (2 * h);
                const double an = (which == 0 ? g.grad_n1[i] : g.grad_n2[i]).dot(t);
                ++total;
                good += std::abs(fd - an) <= 1e-3 * std::max(std::abs(fd), 1e-8);
            }
        }
    }
    const double secs = since(t0);
    const double frac = total ? double(good) / total : 0.0;
    return {total > 1000 && frac >= 0.95 && secs < 30.0,
            fmt("%zu/%zu perturbations within 1e-3 relative (%.2f%%), %.1f s", good, total, 100 * frac, secs)};
}

// ---------------------------------------------------------------- 4

Outcome visual_hull() {
    const int views = 20, res = 512;
    const double dist = 2.5, fov = 2.0 * rad2deg(std::asin(1.0 / dist)) * 1.4;
    const std::vector<Camera> cams = sphere_rig(views, Vec3::Zero(), dist, res, res, fov, 0.0, 1);
    const SphereSurface sphere(Vec3::Zero(), 1.0);
    std::vector<MaskBuffer> masks;
    for (const Camera& c : cams) masks.push_back(render_mask(sphere, c));
    const OccupancyVolume vol = carve(masks, cams, 128);
    const double v_sphere = 4.0 / 3.0 * kPi;
    const double ratio = vol.volume() / v_sphere;
    CounterRng rng(4, 0);
    std::size_t inside = 0;
    const std::size_t pts = 100000;
    for (std::size_t k = 0; k < pts; ++k) {
        const Vec3 p = random_unit(rng) * std::cbrt(rng.uniform());
        inside += vol.contains(p, 0.5 * vol.h);
    }
    const Aabb box{Vec3::Constant(-1.3), Vec3::Constant(1.3)};
    double prev = 1e300;
    bool monotone = true;
    std::ostringstream series;
    for (int k = 1; k <= views; ++k) {
        const std::vector<MaskBuffer> m(masks.begin(), masks.begin() + k);
        const std::vector<Camera> c(cams.begin(), cams.begin() + k);
        const double v = carve(m, c, 128, box).volume();
        monotone = monotone && v <= prev;
        prev = v;
        if (k == 1 || k == 2 || k == 5 || k == 10 || k == 20) series << (k == 1 ? "" : ", ") << k << ":" << fmt("%.3f", v);
    }
    const double contain = double(inside) / pts;
    return {ratio >= 1.0 && ratio <= 1.05 && contain >= 0.999 && monotone,
            fmt("volume/V=%.4f, containment %.4f%%, volume by views {%s} monotone=%s", ratio, 100 * contain,
                series.str().c_str(), monotone ? "yes" : "no")};
}

// ---------------------------------------------------------------- 5

Outcome plant_and_recover() {
    const int res = 96;
    const Camera cam = test_camera(res, res, Vec3(0.2, -0.3, -3.2), Vec3::Zero(), 40);
    const NormalMapPair hull = analytic_sphere_normals(cam, Vec3::Zero(), 1.0, kDefaultIor);
    const EnvironmentMap env = procedural_envmap(23, 256, 24.0);
    const AngleSchedule s = angle_schedule_for_views(10);
    const int K = s.size();
    CounterRng rng(5, 0);
    NormalMapPair planted = hull;
    std::vector<int> truth(hull.valid.size(), -1);
    for (std::size_t i = 0; i < hull.valid.size(); ++i) {
        if (!hull.valid[i]) continue;
        const auto c1 = sample_normals(hull.n1[i], s, cam.up()), c2 = sample_normals(hull.n2[i], s, cam.up());
        const int a = int(rng.next_u64() % K), b = int(rng.next_u64() % K);
        planted.n1[i] = c1[a], planted.n2[i] = c2[b];
        truth[i] = a * K + b;
    }
    const RenderOutput r = render_layer(env, planted, cam, kDefaultIor);
    SearchConfig cfg;
    cfg.tau = 0.0;
    cfg.tv_iters = 0;
    const SearchResult found = search_normals(r.sum(), env, hull, cam, kDefaultIor, s, cfg);
    std::size_t n = 0, hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!hull.valid[i] || r.tir[i]) continue;
        ++n;
        hit += found.best_pair[i] == truth[i];
    }
    const double frac = n ? double(hit) / n : 0.0;
    return {n > 1000 && frac >= 0.9,
            fmt("%zu/%zu non-TIR pixels recovered (%.2f%%), spread %.1f deg, K=%d", hit, n, 100 * frac, s.max_theta(), K)};
}

// ---------------------------------------------------------------- 6, 7, 10, 11

struct SceneRun {
    double seconds = 0.0;
    MetricsReport metrics;
};

SceneRun run_scene(const std::string& name, std::uint64_t seed, const std::function<void(json&)>& tweak = {}) {
    json cfg = cli::default_config();
    cfg["out"] = (g_work / name).string();
    cfg["seed"] = seed;
    if (tweak) tweak(cfg);
    cli::validate_config(cfg);
    fs::remove_all(cfg["out"].get<std::string>());
    const auto t0 = Clock::now();
    cli::run_stages(cfg, cli::pipeline_stages(cfg), {false, {}});
    SceneRun r;
    r.seconds = since(t0);
    r.metrics = report_from_json(read_json(cli::stage_dir(cfg, "eval") / "metrics.json"));
    return r;
}

std::map<std::uint64_t, SceneRun> g_scenes;

const SceneRun& scene(std::uint64_t seed) {
    auto it = g_scenes.find(seed);
    if (it == g_scenes.end()) {
        set_thread_count(1);
        it = g_scenes.emplace(seed, run_scene("scene_" + std::to_string(seed), seed,
                                              [](json& c) { c["threads"] = 1; })).first;
        set_thread_count(0);
    }
    return it->second;
}

double metric(const SceneRun& r, const std::string& g, const std::string& l, const std::string& n) {
    return r.metrics.values.at(g).at(l).at(n);
}

Outcome normal_improvement() {
    bool pass = true;
    std::ostringstream d;
    for (std::uint64_t s = 1; s <= 5; ++s) {
        const SceneRun& r = scene(s);
        const double h1 = metric(r, "normals", "hull", "n1_median_deg"), f1 = metric(r, "normals", "refine", "n1_median_deg");
        const double h2 = metric(r, "normals", "hull", "n2_median_deg"), f2 = metric(r, "normals", "refine", "n2_median_deg");
        pass = pass && f1 < h1 && f2 < h2 && r.seconds < 300.0;
        d << (s == 1 ? "" : "; ") << fmt("s%llu N1 %.2f->%.2f N2 %.2f->%.2f (%.0f s)", (unsigned long long)s, h1, f1, h2, f2,
                                         r.seconds);
    }
    return {pass, d.str()};
}

Outcome chamfer_improvement() {
    bool pass = true;
    std::ostringstream d;
    for (std::uint64_t s = 1; s <= 5; ++s) {
        const SceneRun& r = scene(s);
        const double h = metric(r, "mesh", "hull", "cd"), f = metric(r, "mesh", "final", "cd");
        pass = pass && f <= 0.8 * h;
        d << (s == 1 ? "" : "; ") << fmt("s%llu %.3e/%.3e=%.3f", (unsigned long long)s, f, h, f / h);
    }
    return {pass, "final/hull CD " + d.str()};
}

Outcome ior_sensitivity() {
    std::map<double, SceneRun> runs;
    for (double ior : {1.3, 1.5, 1.7})
        runs[ior] = run_scene(fmt("ior_%.1f", ior), 1, [&](json& c) { c["gen"]["ior"] = ior; });
    bool pass = true;
    std::ostringstream d;
    for (const char* name : {"n1_median_deg", "n2_median_deg"}) {
        const double e13 = metric(runs[1.3], "normals", "refine", name), e15 = metric(runs[1.5], "normals", "refine", name),
                     e17 = metric(runs[1.7], "normals", "refine", name);
        pass = pass && e15 < e13 && e15 < e17;
        d << fmt("%s 1.3:%.2f 1.5:%.2f 1.7:%.2f; ", name, e13, e15, e17);
    }
    d << fmt("final CD 1.3:%.3e 1.5:%.3e 1.7:%.3e", metric(runs[1.3], "mesh", "final", "cd"),
             metric(runs[1.5], "mesh", "final", "cd"), metric(runs[1.7], "mesh", "final", "cd"));
    return {pass, d.str()};
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
    const std::set<std::string> volatile_files = {"run.json", "timings.json", "metrics.json"};
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file() || volatile_files.count(e.path().filename().string())) continue;
        const fs::path other = b / e.path().lexically_relative(a);
        if (!fs::exists(other) || read_file_bytes(e.path()) != read_file_bytes(other)) {
            why = e.path().lexically_relative(a).string();
            return false;
        }
        ++n;
    }
    why = std::to_string(n) + " files";
    json ma = read_json(a / "eval" / "metrics.json"), mb = read_json(b / "eval" / "metrics.json");
    if (ma["metrics"] != mb["metrics"] || ma["config_hash"] != mb["config_hash"] || ma["seeds"] != mb["seeds"]) {
        why = "eval/metrics.json values";
        return false;
    }
    return true;
}

Outcome determinism() {
    auto run = [&](const std::string& name, int threads) {
        set_thread_count(threads);
        run_scene(name, 7, [&](json& c) { c["threads"] = threads; });
        set_thread_count(0);
    };
    run("det_t1_a", 1);
    run("det_t1_b", 1);
    run("det_t8", 8);
    std::string w1, w8;
    const bool runs = same_tree(g_work / "det_t1_a", g_work / "det_t1_b", w1);
    const bool threads = same_tree(g_work / "det_t1_a", g_work / "det_t8", w8);
    return {runs && threads, fmt("repeat run: %s (%s); threads 1 vs 8: %s (%s)", runs ? "identical" : "DIFFERS", w1.c_str(),
                                 threads ? "identical" : "DIFFERS", w8.c_str())};
}

// ---------------------------------------------------------------- 8

Outcome best_view_fusion() {
    ShapeParams sp;
    sp.resolution = 48;
    sp.subdivisions = 0;
    const TriangleMesh mesh = gen_shape(8, sp);
    const AccelIndex hull(mesh);
    const std::vector<Camera> cams = sphere_rig(10, bounds(mesh).center(), 3.0, 48, 48, 45.0, 3.0, 8);
    std::vector<ViewPrediction> views;
    for (std::size_t v = 0; v < cams.size(); ++v) {
        ViewPrediction p{cams[v], ImageBuffer(48, 48), ScalarImage(48, 48, 0.25), ScalarImage(48, 48, 0.0),
                         MaskBuffer(48, 48, 1)};
        CounterRng rng(v, 8);
        for (std::size_t i = 0; i < p.valid.size(); ++i) {
            p.n1[i] = random_unit(rng);
            if (v < 5) p.error[i] = rng.uniform(), p.tir[i] = rng.uniform() < 0.3 ? 1.0 : 0.0;
            p.valid[i] = rng.uniform() < 0.97;
        }
        views.push_back(std::move(p));  // views 5..9 tie on a constant error
    }
    OrientedPointCloud c = sample_hull_points(mesh, 1000, 8);
    map_features_re(c, hull, views);
    const double eps = visibility_epsilon(hull);
    std::size_t match = 0, ties = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const Vec3& p = c.points[i];
        int best_free = -1, best_tir = -1, equal = 0;
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
                if (best_free >= 0 && vs.error == best_err) ++equal;
                if (best_free < 0 || vs.error < best_err) best_free = int(v), best_err = vs.error, equal = 0;
            } else if (vs.cosine > best_cos) {
                best_tir = int(v), best_cos = vs.cosine;
            }
        }
        ties += equal > 0;
        const int expect = best_free >= 0 ? best_free + 1 : best_tir + 1;
        bool ok = c.view[i] == expect;
        if (ok && expect > 0)
            ok = (c.normals[i] - s[expect - 1].normal.normalized()).norm() < 1e-12 && c.error[i] == s[expect - 1].error;
        match += ok;
    }
    return {match == c.size() && ties > 0,
            fmt("%zu/%zu points agree (%zu with tied best errors), %zu triangles, 10 views", match, c.size(), ties,
                mesh.triangles.size())};
}

// ---------------------------------------------------------------- 9

Outcome loss_metric_oracles() {
    const TriangleMesh a = make_icosphere(3, 1.0);
    const TriangleMesh b = make_icosphere(3, 0.93, Vec3(0.07, 0.02, -0.05));
    const SurfaceSamples sa = sample_surface(a, 500, 91, false), sb = sample_surface(b, 500, 92, false);
    double worst = 0.0;
    const char* worst_name = "";
    auto rel = [&](const char* name, double got, double want) {
        const double r = std::abs(got - want) / std::max(std::abs(want), 1e-300);
        if (r > worst) worst = r, worst_name = name;
    };

    // loss_chamfer by exhaustive scan
    const LossWeights w;
    double brute_loss = 0.0;
    double sq[2] = {0, 0};
    std::vector<double> ang;
    for (int dir = 0; dir < 2; ++dir) {
        const SurfaceSamples& p = dir ? sb : sa;
        const SurfaceSamples& q = dir ? sa : sb;
        for (std::size_t i = 0; i < p.points.size(); ++i) {
            std::size_t best = 0;
            double bd = 1e300;
            for (std::size_t j = 0; j < q.points.size(); ++j) {
                const double d = (p.points[i] - q.points[j]).squaredNorm();
                if (d < bd) bd = d, best = j;
            }
            brute_loss += 0.5 * w.position * std::sqrt(bd) + 0.5 * w.normal * (p.normals[i] - q.normals[best]).norm();
            sq[dir] += bd;
            const Vec3 &u = p.normals[i], &v = q.normals[best];
            ang.push_back(std::atan2(u.cross(v).norm(), u.dot(v)) * 180.0 / kPi);
        }
    }
    rel("loss_chamfer", loss_chamfer(sa.points, sa.normals, sb.points, sb.normals, w), brute_loss);
    const ChamferMetrics cm = chamfer_metrics_from_samples(sa, sb);
    rel("cd", cm.cd, 0.5 * (sq[0] / 500 + sq[1] / 500));
    double mean = 0;
    for (double v : ang) mean += v;
    rel("cdn_mean", cm.cdn_mean_deg, mean / ang.size());
    std::sort(ang.begin(), ang.end());
    rel("cdn_median", cm.cdn_med_deg, 0.5 * (ang[499] + ang[500]));

    const double d = 0.37;
    const double single = loss_chamfer({Vec3(0, 0, 0)}, {Vec3::UnitZ()}, {Vec3(d, 0, 0)}, {Vec3::UnitZ()}, w);
    const bool exact = single == 200.0 * d;
    return {worst < 1e-9 && exact,
            fmt("worst relative deviation %.2e (%s) on 500-point instances; single-point fixture %.17g vs 200d=%.17g", worst,
                worst_name, single, 200.0 * d)};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> selected, known, failing;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--work" && i + 1 < argc) g_work = argv[++i];
        else if (a == "--known-failure" && i + 1 < argc) known.insert(std::stoi(argv[++i]));
        else selected.insert(std::stoi(a));
    }
    fs::create_directories(g_work);
    const std::vector<std::pair<std::string, Outcome (*)()>> criteria = {
        {"optics oracle (render_layer vs two-bounce tracer)", optics_oracle},
        {"Fresnel / Snell identities", fresnel_snell},
        {"render loss gradient vs finite differences", gradient_check},
        {"visual hull of a 20-view sphere", visual_hull},
        {"cost-volume plant and recover", plant_and_recover},
        {"refined normals beat hull normals on 5 scenes", normal_improvement},
        {"final mesh CD <= 0.8 x hull CD on 5 scenes", chamfer_improvement},
        {"best-view fusion vs brute-force search", best_view_fusion},
        {"loss and metric brute-force oracles", loss_metric_oracles},
        {"IoR sensitivity harness", ior_sensitivity},
        {"pipeline determinism across runs and threads", determinism},
    };
    json results = json::object();
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k + 1);
        if (!selected.empty() && !selected.count(id)) continue;
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) failing.insert(id);
        std::printf("criterion %2d %s  %s: %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", criteria[k].first.c_str(),
                    o.detail.c_str(), since(t0));
        std::fflush(stdout);
        results[std::to_string(id)] = {{"pass", o.pass}, {"detail", o.detail}, {"seconds", since(t0)}};
    }
    write_json(g_work / "acceptance.json", results);
    for (int id : known)
        if ((selected.empty() || selected.count(id)) && !failing.count(id))
            std::printf("criterion %2d was declared a known failure but passed\n", id);
    std::set<int> expected;
    for (int id : known)
        if (selected.empty() || selected.count(id)) expected.insert(id);
    std::printf("%zu of %zu criteria failed%s\n", failing.size(), selected.empty() ? criteria.size() : selected.size(),
                failing == expected && !failing.empty() ? " (all declared known failures)" : "");
    return failing == expected ? 0 : 1;
}
