#include "refracta/cli/pipeline.hpp"
#include "refracta/parallel.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>

using namespace refracta;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
    std::optional<double> ior;
    std::optional<int> views;
    std::optional<std::string> out;
    std::vector<std::string> set;
    std::optional<std::string> strategy;
    std::optional<std::string> method;
    bool force = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config, "TOML or JSON config file");
    app->add_option("--threads", f.threads, "worker threads (falls back to REFRACTA_THREADS)");
    app->add_option("--seed", f.seed, "base seed");
    app->add_option("--ior", f.ior, "assumed index of refraction");
    app->add_option("--views", f.views, "number of generated views");
    app->add_option("--out", f.out, "output directory");
    app->add_option("--set", f.set, "override any config key, e.g. --set refine.step=0.02");
}

json parse_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return text;
    }
}

json build_config(const CommonFlags& f) {
    json cfg = f.config.empty() ? cli::default_config() : cli::load_config(f.config);
    if (f.seed) cli::set_config_value(cfg, "seed", *f.seed);
    if (f.ior) cli::set_config_value(cfg, "ior", *f.ior);
    if (f.views) cli::set_config_value(cfg, "gen.views", *f.views);
    if (f.out) cli::set_config_value(cfg, "out", *f.out);
    if (f.threads) cli::set_config_value(cfg, "threads", *f.threads);
    if (f.strategy) cli::set_config_value(cfg, "fuse.strategy", *f.strategy);
    if (f.method) cli::set_config_value(cfg, "reconstruct.method", *f.method);
    for (const std::string& kv : f.set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--set", "expected key=value, got '" + kv + "'");
        cli::set_config_value(cfg, kv.substr(0, eq), parse_value(kv.substr(eq + 1)));
    }
    cli::validate_config(cfg);
    return cfg;
}

void apply_threads(const json& cfg) {
    int n = cfg["threads"].get<int>();
    if (n == 0)
        if (const char* env = std::getenv("REFRACTA_THREADS")) {
            char* end = nullptr;
            const long v = std::strtol(env, &end, 10);
            if (end == env || *end != '\0' || v < 1 || v > 4096)
                throw ConfigError("REFRACTA_THREADS", std::string("expected a positive integer, got '") + env + "'");
            n = static_cast<int>(v);
        }
    set_thread_count(n);
}

void print_status(const cli::StageStatus& s) {
    if (s.ran) std::printf("stage=%s status=ran seconds=%.3f\n", s.name.c_str(), s.seconds);
    else std::printf("stage=%s status=skipped reason=\"%s\"\n", s.name.c_str(), s.reason.c_str());
    std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"refracta: transparent-object reconstruction from multi-view images"};
    app.require_subcommand(1);
    app.set_version_flag("--version", REFRACTA_VERSION);
    CommonFlags flags;
    std::vector<std::pair<CLI::App*, std::string>> subs;
    auto sub = [&](const std::string& name, const std::string& stage, const std::string& help) {
        CLI::App* s = app.add_subcommand(name, help);
        add_common(s, flags);
        subs.emplace_back(s, stage);
        return s;
    };
    sub("gen", "gen", "generate a synthetic scene bundle");
    sub("carve", "carve", "visual hull from the scene masks");
    sub("trace-normals", "trace-normals", "hull normal maps for every view");
    sub("search", "search", "cost-volume normal search");
    sub("refine", "refine", "rendering-loss normal refinement");
    sub("fuse", "fuse", "map view features onto hull points")
        ->add_option("--strategy", flags.strategy, "re | avg | nearest");
    sub("reconstruct", "reconstruct", "surface from the fused point cloud")
        ->add_option("--method", flags.method, "poisson | deform");
    sub("render", "render", "render refined normals and error maps");
    sub("eval", "eval", "metrics against the ground truth");
    CLI::App* pipe = sub("pipeline", "", "run every stage, skipping up-to-date ones");
    pipe->add_flag("--force", flags.force, "re-run every stage");
    pipe->add_option("--strategy", flags.strategy, "re | avg | nearest");
    pipe->add_option("--method", flags.method, "poisson | deform");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error code=2 kind=usage message=" << json(std::string(e.what())).dump() << "\n";
        return 2;
    }

    try {
        const json cfg = build_config(flags);
        apply_threads(cfg);
        for (const auto& [s, stage] : subs) {
            if (!s->parsed()) continue;
            cli::RunOptions opts;
            opts.on_stage = print_status;
            if (stage.empty()) {
                opts.resume = !flags.force;
                cli::run_stages(cfg, cli::pipeline_stages(cfg), opts);
            } else {
                opts.resume = false;
                cli::run_stages(cfg, {stage}, opts);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << cli::diagnostic(e) << "\n";
        return cli::exit_code(e);
    }
    return 0;
}
