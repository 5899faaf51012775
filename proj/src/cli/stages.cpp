#include "refracta/cli/pipeline.hpp"

#include "refracta/costvol/costvol.hpp"
#include "refracta/fuse/fuse.hpp"
#include "refracta/hull/hull.hpp"
#include "refracta/metrics/metrics.hpp"
#include "refracta/parallel.hpp"
#include "refracta/refine/refine.hpp"
#include "refracta/rng.hpp"
#include "refracta/surface/surface.hpp"
#include "refracta/synth/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>

namespace refracta::cli {

namespace {

std::string view_stem(std::size_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "view_%02zu", v);
    return buf;
}

std::vector<fs::path> save_maps(const fs::path& dir, const std::string& stem, const NormalMapPair& m) {
    ImageBuffer n1(m.width(), m.height(), Vec3::Zero()), n2 = n1;
    for (std::size_t i = 0; i < m.valid.size(); ++i)
        if (m.valid[i]) n1[i] = m.n1[i], n2[i] = m.n2[i];
    const std::vector<fs::path> out = {dir / (stem + "_n1.pfm"), dir / (stem + "_n2.pfm"), dir / (stem + "_valid.png"),
                                       dir / (stem + "_tir.png")};
    save_pfm(out[0], n1);
    save_pfm(out[1], n2);
    save_mask_png(out[2], m.valid);
    save_mask_png(out[3], m.tir);
    return out;
}

NormalMapPair load_maps(const fs::path& dir, const std::string& stem) {
    const ImageBuffer n1 = load_pfm_rgb(dir / (stem + "_n1.pfm")), n2 = load_pfm_rgb(dir / (stem + "_n2.pfm"));
    NormalMapPair m(n1.width(), n1.height());
    m.valid = load_mask_png(dir / (stem + "_valid.png"));
    m.tir = load_mask_png(dir / (stem + "_tir.png"));
    if (!m.valid.same_shape(n1) || !m.tir.same_shape(n1) || !n2.same_shape(n1))
        throw DataError((dir / stem).string() + ": normal map files differ in size");
    for (std::size_t i = 0; i < n1.size(); ++i) {
        if (!m.valid[i]) continue;
        if (n1[i].squaredNorm() == 0.0 || n2[i].squaredNorm() == 0.0)
            throw DataError((dir / stem).string() + ": zero normal inside the valid mask");
        m.n1[i] = n1[i].normalized();
        m.n2[i] = n2[i].normalized();
    }
    return m;
}

std::vector<fs::path> scene_files(const SceneManifest& m) {
    std::vector<fs::path> f = {m.dir / "manifest.json", m.dir / m.env};
    if (!m.mesh.empty()) f.push_back(m.dir / m.mesh);
    for (const SceneView& v : m.views) {
        f.push_back(m.dir / v.image);
        f.push_back(m.dir / v.mask);
        if (!v.n1.empty()) f.push_back(m.dir / v.n1);
        if (!v.n2.empty()) f.push_back(m.dir / v.n2);
    }
    return f;
}

SceneManifest require_scene(const json& config) {
    const fs::path p = scene_manifest_path(config);
    if (!fs::is_regular_file(p)) {
        if (config["scene"].get<std::string>().empty())
            throw DataError("scene manifest '" + p.string() + "' not found; run the gen stage first");
        throw ConfigError("scene", "file not found: " + p.string());
    }
    return load_manifest(p);
}

std::uint64_t stage_seed(const json& config, std::uint64_t salt) {
    return mix64(config["seed"].get<std::uint64_t>() ^ salt);
}

NormalMapPair stack_rows(const std::vector<NormalMapPair>& maps) {
    int h = 0;
    for (const auto& m : maps) h += m.height();
    NormalMapPair out(maps.front().width(), h);
    std::size_t o = 0;
    for (const auto& m : maps) {
        if (m.width() != out.width()) throw DataError("normal maps of different widths");
        for (std::size_t i = 0; i < m.valid.size(); ++i, ++o)
            out.n1[o] = m.n1[i], out.n2[o] = m.n2[i], out.valid[o] = m.valid[i], out.tir[o] = m.tir[i];
    }
    return out;
}

ScalarImage stack_rows(const std::vector<ScalarImage>& maps) {
    int h = 0;
    for (const auto& m : maps) h += m.height();
    ScalarImage out(maps.front().width(), h, 0.0);
    std::size_t o = 0;
    for (const auto& m : maps)
        for (std::size_t i = 0; i < m.size(); ++i) out[o++] = m[i];
    return out;
}

// ------------------------------------------------------------------ stages

struct Context {
    const json& config;
    fs::path dir;  // this stage's output directory
};

std::vector<fs::path> files_under(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "stage.json") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<fs::path> run_gen(const Context& ctx) {
    const json& g = ctx.config["gen"];
    DatasetParams p;
    p.shape_seeds = {ctx.config["seed"].get<std::uint64_t>()};
    for (const auto& f : g["env_files"]) p.env_files.emplace_back(f.get<std::string>());
    p.views = g["views"].get<int>();
    p.image_size = g["image_size"].get<int>();
    p.ior = g["ior"].get<double>();
    p.sample_ior = g["sample_ior"].get<bool>();
    p.max_bounces = g["max_bounces"].get<int>();
    p.samples_per_pixel = g["spp"].get<int>();
    p.distance_factor = g["distance_factor"].get<double>();
    p.fov_deg = g["fov_deg"].get<double>();
    p.jitter_deg = g["jitter_deg"].get<double>();
    p.env_height = g["env_height"].get<int>();
    p.shape.min_primitives = g["min_primitives"].get<int>();
    p.shape.max_primitives = g["max_primitives"].get<int>();
    p.shape.resolution = g["shape_resolution"].get<int>();
    make_dataset(p, ctx.dir);
    return files_under(ctx.dir);
}

std::vector<fs::path> run_carve(const Context& ctx) {
    const json& c = ctx.config["carve"];
    const SceneData scene = load_scene(require_scene(ctx.config), false);
    OccupancyVolume vol = carve(scene.masks, scene.cameras, c["resolution"].get<int>());
    std::size_t removed = 0;
    if (c["keep_largest"].get<bool>()) removed = keep_largest_component(vol);
    TriangleMesh mesh = marching_cubes(vol, c["smooth"].get<bool>());
    if (c["subdivisions"].get<int>() > 0) mesh = loop_subdivide(mesh, c["subdivisions"].get<int>());
    compute_vertex_normals(mesh);
    save_ply(ctx.dir / "hull.ply", mesh);
    write_json(ctx.dir / "hull.json", {{"voxels", vol.occupied()},
                                       {"removed_voxels", removed},
                                       {"voxel_size", vol.h},
                                       {"volume", vol.volume()},
                                       {"vertices", mesh.vertices.size()},
                                       {"triangles", mesh.triangles.size()}});
    return {ctx.dir / "hull.ply", ctx.dir / "hull.json"};
}

std::vector<fs::path> run_trace_normals(const Context& ctx) {
    const SceneManifest m = require_scene(ctx.config);
    const MeshSurface hull(load_mesh(stage_dir(ctx.config, "carve") / "hull.ply"));
    const double ior = ctx.config["ior"].get<double>();
    std::vector<fs::path> out;
    for (std::size_t v = 0; v < m.views.size(); ++v) {
        const auto f = save_maps(ctx.dir, view_stem(v) + "_hull", hull_normal_maps(hull, m.views[v].camera, ior));
        out.insert(out.end(), f.begin(), f.end());
    }
    return out;
}

std::vector<fs::path> run_search(const Context& ctx) {
    const json& s = ctx.config["search"];
    const SceneData scene = load_scene(require_scene(ctx.config), false);
    const double ior = ctx.config["ior"].get<double>();
    const int k = s["k"].get<int>();
    const double spread = s["spread_deg"].get<double>();
    const AngleSchedule schedule = spread > 0.0 ? AngleSchedule::uniform(spread, k)
                                                : angle_schedule_for_views(static_cast<int>(scene.cameras.size()), {}, k);
    SearchConfig cfg;
    cfg.tau = s["tau"].get<double>();
    cfg.tv_weight = s["tv_weight"].get<double>();
    cfg.tv_iters = s["tv_iters"].get<int>();
    cfg.tir_penalty = s["tir_penalty"].get<double>();
    const fs::path hull_dir = stage_dir(ctx.config, "trace-normals");
    std::vector<fs::path> out;
    for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
        const NormalMapPair hull = load_maps(hull_dir, view_stem(v) + "_hull");
        const SearchResult r = search_normals(scene.images[v], scene.env, hull, scene.cameras[v], ior, schedule, cfg);
        const auto f = save_maps(ctx.dir, view_stem(v) + "_search", r.normals);
        out.insert(out.end(), f.begin(), f.end());
    }
    json sched = {{"theta_deg", schedule.theta_deg}, {"phi_deg", schedule.phi_deg}};
    write_json(ctx.dir / "schedule.json", sched);
    out.push_back(ctx.dir / "schedule.json");
    return out;
}

std::vector<fs::path> run_refine(const Context& ctx) {
    const json& r = ctx.config["refine"];
    const SceneData scene = load_scene(require_scene(ctx.config), false);
    const double ior = ctx.config["ior"].get<double>();
    RefineConfig cfg;
    cfg.phase1_iters = r["phase1_iters"].get<int>();
    cfg.phase2_iters = r["phase2_iters"].get<int>();
    cfg.step = r["step"].get<double>();
    cfg.lambda_anchor = r["lambda_anchor"].get<double>();
    cfg.lambda_smooth = r["lambda_smooth"].get<double>();
    const fs::path search_dir = stage_dir(ctx.config, "search");
    std::vector<fs::path> out;
    json summary = json::array();
    for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
        const NormalMapPair init = load_maps(search_dir, view_stem(v) + "_search");
        const RefineResult res = refine_normals(scene.images[v], scene.env, init, scene.cameras[v], ior, cfg);
        const auto f = save_maps(ctx.dir, view_stem(v) + "_refine", res.normals);
        out.insert(out.end(), f.begin(), f.end());
        const fs::path trace = ctx.dir / (view_stem(v) + "_loss.csv");
        write_loss_trace_csv(trace, res.loss_trace);
        out.push_back(trace);
        summary.push_back({{"view", v},
                           {"initial_render_loss", res.initial_render_loss},
                           {"final_render_loss", res.final_render_loss},
                           {"iterations", res.iterations},
                           {"diverged", res.diverged},
                           {"diagnostic", res.diagnostic}});
    }
    write_json(ctx.dir / "summary.json", summary);
    out.push_back(ctx.dir / "summary.json");
    return out;
}

std::vector<fs::path> run_render(const Context& ctx) {
    const SceneData scene = load_scene(require_scene(ctx.config), false);
    const double ior = ctx.config["ior"].get<double>();
    const fs::path refine_dir = stage_dir(ctx.config, "refine");
    std::vector<fs::path> out;
    for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
        const NormalMapPair n = load_maps(refine_dir, view_stem(v) + "_refine");
        const RenderOutput r = render_layer(scene.env, n, scene.cameras[v], ior);
        const ImageBuffer err = error_map(scene.images[v], r, n.valid);
        ScalarImage lum(err.width(), err.height(), 0.0);
        for (std::size_t i = 0; i < err.size(); ++i) lum[i] = luminance(err[i]);
        out.push_back(ctx.dir / (view_stem(v) + "_render.pfm"));
        save_pfm(out.back(), r.sum());
        out.push_back(ctx.dir / (view_stem(v) + "_error.pfm"));
        save_pfm(out.back(), lum);
        out.push_back(ctx.dir / (view_stem(v) + "_render.png"));
        save_png(out.back(), r.sum());
    }
    return out;
}

std::vector<fs::path> run_fuse(const Context& ctx) {
    const json& f = ctx.config["fuse"];
    const SceneData scene = load_scene(require_scene(ctx.config), false);
    const double ior = ctx.config["ior"].get<double>();
    const TriangleMesh hull = load_mesh(stage_dir(ctx.config, "carve") / "hull.ply");
    const fs::path refine_dir = stage_dir(ctx.config, "refine");
    std::vector<ViewPrediction> views;
    for (std::size_t v = 0; v < scene.cameras.size(); ++v)
        views.push_back(make_view_prediction(scene.images[v], scene.env, load_maps(refine_dir, view_stem(v) + "_refine"),
                                             scene.cameras[v], ior));
    OrientedPointCloud cloud = sample_hull_points(hull, f["points"].get<std::size_t>(), stage_seed(ctx.config, 0xf05e));
    const AccelIndex index(hull);
    const std::string strategy = f["strategy"].get<std::string>();
    if (strategy == "re") map_features_re(cloud, index, views);
    else if (strategy == "avg") map_features_avg(cloud, index, views);
    else map_features_nearest(cloud, index, views);
    save_point_cloud(ctx.dir / "points.ply", cloud);
    return {ctx.dir / "points.ply"};
}

std::vector<fs::path> run_reconstruct(const Context& ctx) {
    const json& r = ctx.config["reconstruct"];
    const OrientedPointCloud cloud = load_point_cloud(stage_dir(ctx.config, "fuse") / "points.ply");
    TriangleMesh mesh;
    json info;
    if (r["method"].get<std::string>() == "poisson") {
        PoissonConfig pc;
        pc.resolution = r["resolution"].get<int>();
        pc.screening = r["screening"].get<double>();
        pc.sigma_cells = r["sigma_cells"].get<double>();
        PoissonResult res = poisson_reconstruct(cloud.points, cloud.normals, pc);
        mesh = std::move(res.mesh);
        info = {{"method", "poisson"}, {"iso", res.iso}, {"cg_iterations", res.residuals.size()}};
    } else {
        const TriangleMesh hull = load_mesh(stage_dir(ctx.config, "carve") / "hull.ply");
        DeformConfig dc;
        dc.w_normal = r["w_normal"].get<double>();
        dc.w_prox = r["w_prox"].get<double>();
        dc.w_lap = r["w_lap"].get<double>();
        dc.iterations = r["deform_iterations"].get<int>();
        DeformResult res = deform_vertices(hull, cloud, dc);
        mesh = std::move(res.mesh);
        info = {{"method", "deform"}, {"initial_energy", res.energy.front()}, {"final_energy", res.energy.back()}};
    }
    if (mesh.triangles.empty()) throw NumericalError("reconstruct: empty surface");
    compute_vertex_normals(mesh);
    save_ply(ctx.dir / "mesh.ply", mesh);
    info["vertices"] = mesh.vertices.size();
    info["triangles"] = mesh.triangles.size();
    write_json(ctx.dir / "reconstruct.json", info);
    return {ctx.dir / "mesh.ply", ctx.dir / "reconstruct.json"};
}

std::vector<fs::path> run_eval(const Context& ctx) {
    const json& e = ctx.config["eval"];
    const SceneManifest manifest = require_scene(ctx.config);
    const SceneData scene = load_scene(manifest, true);
    const std::size_t samples = e["samples"].get<std::size_t>();
    const std::uint64_t seed = stage_seed(ctx.config, 0xe7a1);
    const double ior = ctx.config["ior"].get<double>();
    MetricsReport report;

    const TriangleMesh hull = load_mesh(stage_dir(ctx.config, "carve") / "hull.ply");
    const TriangleMesh final_mesh = load_mesh(stage_dir(ctx.config, "reconstruct") / "mesh.ply");
    const LossWeights w{e["lambda_position"].get<double>(), e["lambda_normal"].get<double>()};
    if (!scene.mesh.empty()) {
        const SurfaceSamples gs = sample_surface(scene.mesh, samples, seed, false);
        for (const auto& [label, mesh] : {std::pair<std::string, const TriangleMesh*>{"hull", &hull},
                                          std::pair<std::string, const TriangleMesh*>{"final", &final_mesh}}) {
            const ChamferMetrics cm = chamfer_metrics(*mesh, scene.mesh, samples, seed);
            report.set("mesh", label, "cd", cm.cd);
            report.set("mesh", label, "cdn_mean_deg", cm.cdn_mean_deg);
            report.set("mesh", label, "cdn_med_deg", cm.cdn_med_deg);
            report.set("mesh", label, "metro", metro(*mesh, scene.mesh, samples, seed));
            const SurfaceSamples ms = sample_surface(*mesh, samples, seed, false);
            report.set("mesh", label, "loss_chamfer", loss_chamfer(ms.points, ms.normals, gs.points, gs.normals, w));
        }
    }

    const bool have_gt = !scene.gt.empty() && !scene.gt.front().valid.empty();
    const std::pair<std::string, std::string> sources[] = {
        {"hull", "trace-normals"}, {"search", "search"}, {"refine", "refine"}};
    for (const auto& [label, stage] : sources) {
        std::vector<NormalMapPair> pred;
        std::vector<ScalarImage> err;
        for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
            pred.push_back(load_maps(stage_dir(ctx.config, stage), view_stem(v) + "_" + label));
            const MaskBuffer& sil = have_gt ? scene.gt[v].valid : scene.masks[v];
            const ImageBuffer em = error_map(scene.images[v], render_layer(scene.env, pred.back(), scene.cameras[v], ior), sil);
            ScalarImage lum(em.width(), em.height(), 0.0);
            for (std::size_t i = 0; i < em.size(); ++i) lum[i] = luminance(em[i]);
            err.push_back(std::move(lum));
        }
        const ScalarImage all_err = stack_rows(err);
        if (have_gt) {
            const NormalErrorStats s = normal_error_stats(stack_rows(pred), stack_rows(scene.gt), &all_err);
            report.set("normals", label, "n1_median_deg", s.n1.median_deg);
            report.set("normals", label, "n1_mean_deg", s.n1.mean_deg);
            report.set("normals", label, "n2_median_deg", s.n2.median_deg);
            report.set("normals", label, "n2_mean_deg", s.n2.mean_deg);
            report.set("normals", label, "pixels", static_cast<double>(s.n1.count));
            report.set("normals", label, "render_error", s.render_error);
        } else {
            double sum = 0.0;
            std::size_t n = 0;
            for (std::size_t v = 0; v < scene.masks.size(); ++v)
                for (std::size_t i = 0; i < scene.masks[v].size(); ++i)
                    if (scene.masks[v][i]) sum += err[v][i], ++n;
            report.set("normals", label, "render_error", n ? sum / static_cast<double>(n) : 0.0);
        }
    }

    RunMetadata meta;
    meta.version = REFRACTA_VERSION;
    meta.config_hash = config_hash(ctx.config);
    meta.seeds = {{"seed", ctx.config["seed"].get<std::uint64_t>()}, {"eval", seed}};
    meta.timestamp = utc_timestamp();
    const fs::path timings = fs::path(ctx.config["out"].get<std::string>()) / "timings.json";
    if (fs::exists(timings)) {
        const json t = read_json(timings);
        for (const auto& [k, v] : t.items()) meta.timings_s[k] = v.get<double>();
    }
    emit_report(ctx.dir, report, meta);
    return {ctx.dir / "metrics.json", ctx.dir / "metrics.csv"};
}

using StageFn = std::vector<fs::path> (*)(const Context&);

struct StageDef {
    StageFn run;
    std::vector<std::string> sections;     // config sections that feed the stage hash
    std::vector<std::string> upstream;     // stages whose outputs are inputs
    bool reads_scene;
};

const std::map<std::string, StageDef>& stage_table() {
    static const std::map<std::string, StageDef> t = {
        {"gen", {run_gen, {"gen", "seed"}, {}, false}},
        {"carve", {run_carve, {"carve"}, {}, true}},
        {"trace-normals", {run_trace_normals, {"ior"}, {"carve"}, true}},
        {"search", {run_search, {"search", "ior"}, {"trace-normals"}, true}},
        {"refine", {run_refine, {"refine", "ior"}, {"search"}, true}},
        {"render", {run_render, {"ior"}, {"refine"}, true}},
        {"fuse", {run_fuse, {"fuse", "ior", "seed"}, {"carve", "refine"}, true}},
        {"reconstruct", {run_reconstruct, {"reconstruct"}, {"carve", "fuse"}, false}},
        {"eval", {run_eval, {"eval", "ior", "seed"}, {"carve", "trace-normals", "search", "refine", "reconstruct"}, true}},
    };
    return t;
}

std::string stage_hash(const json& config, const std::string& name) {
    json j = {{"stage", name}, {"version", REFRACTA_VERSION}};
    for (const auto& s : stage_table().at(name).sections) j["config"][s] = config[s];
    return sha256_hex(j.dump());
}

// Paths under the output directory are stored as "$out/<relative>" so manifests
// do not depend on where the run lives.
std::string rel(const json& config, const fs::path& p) {
    const fs::path r = p.lexically_normal().lexically_relative(fs::path(config["out"].get<std::string>()).lexically_normal());
    if (!r.empty() && *r.begin() != ".." && !p.is_absolute() == !fs::path(config["out"].get<std::string>()).is_absolute())
        return "$out/" + r.generic_string();
    return p.generic_string();
}

fs::path unrel(const json& config, const std::string& s) {
    if (s.rfind("$out/", 0) == 0) return fs::path(config["out"].get<std::string>()) / s.substr(5);
    return s;
}

std::vector<fs::path> upstream_outputs(const json& config, const std::string& stage) {
    const fs::path manifest = stage_dir(config, stage) / "stage.json";
    if (!fs::exists(manifest)) throw DataError("stage '" + stage + "' has not been run (missing " + manifest.string() + ")");
    std::vector<fs::path> out;
    for (const auto& o : read_json(manifest)["outputs"]) out.push_back(unrel(config, o["path"].get<std::string>()));
    return out;
}

std::vector<fs::path> stage_inputs(const json& config, const std::string& name) {
    const StageDef& d = stage_table().at(name);
    std::vector<fs::path> in;
    if (name == "gen")
        for (const auto& f : config["gen"]["env_files"]) in.emplace_back(f.get<std::string>());
    if (d.reads_scene) {
        const auto f = scene_files(require_scene(config));
        in.insert(in.end(), f.begin(), f.end());
    }
    for (const auto& u : d.upstream) {
        const auto f = upstream_outputs(config, u);
        in.insert(in.end(), f.begin(), f.end());
    }
    return in;
}

// metrics.json carries a timestamp and wall-clock timings; digest the rest.
std::string content_digest(const fs::path& f) {
    if (f.filename() != "metrics.json") return file_sha256(f);
    json j = read_json(f);
    j.erase("timestamp");
    j.erase("timings_s");
    return sha256_hex(j.dump());
}

json hashed_list(const json& config, const std::vector<fs::path>& files) {
    json j = json::array();
    for (const auto& f : files) {
        if (!fs::is_regular_file(f)) throw DataError("missing file '" + f.string() + "'");
        j.push_back({{"path", rel(config, f)}, {"sha256", content_digest(f)}});
    }
    return j;
}

// Empty string when current, otherwise the reason it is stale.
std::string staleness(const json& config, const std::string& name) {
    const fs::path manifest = stage_dir(config, name) / "stage.json";
    if (!fs::exists(manifest)) return "no manifest";
    json m;
    try {
        m = read_json(manifest);
    } catch (const DataError&) {
        return "unreadable manifest";
    }
    if (m.value("stage_hash", "") != stage_hash(config, name)) return "configuration changed";
    std::vector<fs::path> inputs;
    try {
        inputs = stage_inputs(config, name);
    } catch (const Error&) {
        return "inputs unavailable";
    }
    if (!m.contains("inputs") || m["inputs"].size() != inputs.size()) return "input set changed";
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const json& rec = m["inputs"][i];
        if (rec["path"] != rel(config, inputs[i])) return "input set changed";
        if (!fs::is_regular_file(inputs[i]) || rec["sha256"] != content_digest(inputs[i]))
            return "input changed: " + rec["path"].get<std::string>();
    }
    for (const auto& rec : m["outputs"]) {
        const fs::path p = unrel(config, rec["path"].get<std::string>());
        if (!fs::is_regular_file(p)) return "output missing: " + rec["path"].get<std::string>();
        if (rec["sha256"] != content_digest(p)) return "output changed: " + rec["path"].get<std::string>();
    }
    return "";
}

}  // namespace

const std::vector<std::string>& all_stages() {
    static const std::vector<std::string> s = {"gen",    "carve",  "trace-normals", "search", "refine",
                                               "render", "fuse",   "reconstruct",   "eval"};
    return s;
}

std::vector<std::string> pipeline_stages(const json& config) {
    std::vector<std::string> s = all_stages();
    if (!config["scene"].get<std::string>().empty()) s.erase(s.begin());
    return s;
}

fs::path scene_manifest_path(const json& config) {
    const std::string scene = config["scene"].get<std::string>();
    if (!scene.empty()) return scene;
    return stage_dir(config, "gen") / ("scene_" + std::to_string(config["seed"].get<std::uint64_t>())) / "manifest.json";
}

fs::path stage_dir(const json& config, const std::string& stage) {
    return fs::path(config["out"].get<std::string>()) / stage;
}

std::vector<StageStatus> run_stages(const json& config, const std::vector<std::string>& stages,
                                    const RunOptions& options) {
    for (const auto& s : stages)
        if (!stage_table().count(s)) throw ConfigError("stage", "unknown stage '" + s + "'");
    const fs::path out = config["out"].get<std::string>();
    fs::create_directories(out);
    const fs::path timings_path = out / "timings.json";
    json timings = fs::exists(timings_path) ? read_json(timings_path) : json::object();
    std::vector<StageStatus> statuses;
    bool upstream_ran = false;
    const auto run_start = std::chrono::steady_clock::now();
    std::string failure;
    auto write_run = [&] {
        json run = {{"version", REFRACTA_VERSION},
                    {"versions", library_versions()},
                    {"config_hash", config_hash(config)},
                    {"config", config},
                    {"seeds", {{"seed", config["seed"]}}},
                    {"threads", thread_count()},
                    {"timestamp", utc_timestamp()},
                    {"total_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count()},
                    {"stage_timings_s", timings},
                    {"status", failure.empty() ? "ok" : "failed"}};
        if (!failure.empty()) run["error"] = failure;
        run["stages"] = json::array();
        for (const auto& s : statuses)
            run["stages"].push_back({{"name", s.name}, {"ran", s.ran}, {"seconds", s.seconds}, {"reason", s.reason}});
        write_json(out / "run.json", run);
    };
    for (const auto& name : stages) {
        StageStatus st;
        st.name = name;
        if (options.resume && !upstream_ran) st.reason = staleness(config, name);
        else st.reason = options.resume ? "upstream stage ran" : "forced";
        if (options.resume && !upstream_ran && st.reason.empty()) {
            st.reason = "up to date";
            statuses.push_back(st);
            if (options.on_stage) options.on_stage(st);
            continue;
        }
        const fs::path dir = stage_dir(config, name);
        try {
            const std::vector<fs::path> inputs = stage_inputs(config, name);
            fs::remove_all(dir);
            fs::create_directories(dir);
            const auto t0 = std::chrono::steady_clock::now();
            const std::vector<fs::path> outputs = stage_table().at(name).run(Context{config, dir});
            st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            st.ran = true;
            upstream_ran = true;
            json manifest = {{"stage", name},
                             {"stage_hash", stage_hash(config, name)},
                             {"config_hash", config_hash(config)},
                             {"inputs", hashed_list(config, inputs)},
                             {"outputs", hashed_list(config, outputs)}};
            write_json(dir / "stage.json", manifest);
        } catch (const std::exception& e) {
            failure = name + ": " + e.what();
            fs::remove(dir / "stage.json");
            write_run();
            throw;
        }
        timings[name] = st.seconds;
        write_json(timings_path, timings);
        statuses.push_back(st);
        if (options.on_stage) options.on_stage(st);
    }
    write_run();
    return statuses;
}

}  // namespace refracta::cli
