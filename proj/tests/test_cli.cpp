#include "doctest.h"

#include "refracta/cli/pipeline.hpp"

using namespace refracta;
using namespace refracta::cli;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path d = fs::path(REFRACTA_TEST_ARTIFACTS) / "cli" / name;
    fs::create_directories(d);
    return d;
}

std::string thrown_key(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<no ConfigError>";
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("defaults carry the documented values") {
    const json c = default_config();
    CHECK(c["carve"]["resolution"] == 128);
    CHECK(c["search"]["k"] == 4);
    CHECK(c["ior"].get<double>() == kDefaultIor);
    CHECK(c["eval"]["lambda_position"].get<double>() == 200.0);
    CHECK(c["eval"]["lambda_normal"].get<double>() == 5.0);
    CHECK(c["eval"]["samples"] == 20000);
    CHECK_NOTHROW(validate_config(c));
}

TEST_CASE("toml and json configs resolve to the same values") {
    const fs::path d = scratch("formats");
    write_file_bytes(d / "a.toml", "seed = 9\nior = 1.5\n[gen]\nviews = 12\n[fuse]\nstrategy = \"avg\"\n");
    write_file_bytes(d / "a.json", R"({"seed": 9, "ior": 1.5, "gen": {"views": 12}, "fuse": {"strategy": "avg"}})");
    const json t = load_config(d / "a.toml"), j = load_config(d / "a.json");
    CHECK(t == j);
    CHECK(t["gen"]["views"] == 12);
    CHECK(t["gen"]["image_size"] == 128);
    CHECK(config_hash(t) == config_hash(j));
}

TEST_CASE("bad configs name the offending key") {
    const fs::path d = scratch("bad");
    write_file_bytes(d / "unknown.toml", "[gen]\nviewz = 3\n");
    CHECK(thrown_key([&] { load_config(d / "unknown.toml"); }) == "gen.viewz");
    write_file_bytes(d / "type.json", R"({"carve": {"resolution": "high"}})");
    CHECK(thrown_key([&] { load_config(d / "type.json"); }) == "carve.resolution");
    write_file_bytes(d / "syntax.toml", "seed = = 3\n");
    CHECK(thrown_key([&] { load_config(d / "syntax.toml"); }) == (d / "syntax.toml").string());
    CHECK(thrown_key([&] { load_config(d / "absent.toml"); }) == "--config");

    json c = default_config();
    c["gen"]["env_files"] = {"/nonexistent/env.hdr"};
    CHECK(thrown_key([&] { validate_config(c); }) == "gen.env_files[0]");
    c = default_config();
    c["fuse"]["strategy"] = "best";
    CHECK(thrown_key([&] { validate_config(c); }) == "fuse.strategy");
    c = default_config();
    c["scene"] = "/nonexistent/manifest.json";
    CHECK(thrown_key([&] { validate_config(c); }) == "scene");
    c = default_config();
    CHECK(thrown_key([&] { set_config_value(c, "refine.stepsize", 1.0); }) == "refine.stepsize");
    CHECK(thrown_key([&] { set_config_value(c, "gen.views", "ten"); }) == "gen.views");
}

TEST_CASE("overrides are type checked and integers widen to numbers") {
    json c = default_config();
    set_config_value(c, "refine.step", 1);
    CHECK(c["refine"]["step"].is_number_float());
    CHECK(c["refine"]["step"].get<double>() == 1.0);
    set_config_value(c, "gen.views", 5);
    CHECK(c["gen"]["views"] == 5);
    CHECK(thrown_key([&] { set_config_value(c, "gen.views", 5.5); }) == "gen.views");
}

TEST_CASE("config hash ignores output location and thread count only") {
    json a = default_config(), b = a;
    b["out"] = "elsewhere";
    b["threads"] = 8;
    CHECK(config_hash(a) == config_hash(b));
    b["seed"] = 2;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(a).size() == 64);
}

TEST_CASE("exit codes and single-line diagnostics") {
    const ConfigError ce("gen.env_files[0]", "file not found:\n/x");
    CHECK(exit_code(ce) == 2);
    const std::string d = diagnostic(ce);
    CHECK(d.find('\n') == std::string::npos);
    CHECK(d.rfind("error code=2 kind=config key=gen.env_files[0] message=", 0) == 0);
    CHECK(exit_code(DataError("x")) == 3);
    CHECK(exit_code(ParseError("f", 3, "y")) == 3);
    CHECK(exit_code(NumericalError("x")) == 4);
    CHECK(exit_code(ArgumentError("x")) == 2);
    CHECK(exit_code(std::runtime_error("x")) == 1);
    CHECK(diagnostic(NumericalError("cg stalled")) == R"(error code=4 kind=numerical message="cg stalled")");
}

TEST_CASE("stage list and scene location") {
    json c = default_config();
    c["out"] = "/tmp/o";
    CHECK(pipeline_stages(c).front() == "gen");
    CHECK(pipeline_stages(c).back() == "eval");
    CHECK(scene_manifest_path(c) == fs::path("/tmp/o/gen/scene_1/manifest.json"));
    c["scene"] = "/data/s/manifest.json";
    CHECK(pipeline_stages(c).front() == "carve");
    CHECK(scene_manifest_path(c) == fs::path("/data/s/manifest.json"));
    CHECK_THROWS_AS(run_stages(c, {"polish"}), ConfigError);
}

TEST_CASE("running a stage without its upstream output is a data error") {
    json c = default_config();
    c["out"] = scratch("orphan").string();
    fs::remove_all(c["out"].get<std::string>());
    CHECK_THROWS_AS(run_stages(c, {"reconstruct"}), DataError);
    CHECK(fs::exists(fs::path(c["out"].get<std::string>()) / "run.json"));
    CHECK(read_json(fs::path(c["out"].get<std::string>()) / "run.json")["status"] == "failed");
}

}  // TEST_SUITE
