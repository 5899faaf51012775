#include "refracta/cli/pipeline.hpp"

#include <toml.hpp>

#include <sstream>

namespace refracta::cli {

json default_config() {
    return json::parse(R"({
  "out": "refracta_out",
  "scene": "",
  "seed": 1,
  "ior": 1.4723,
  "threads": 0,
  "gen": {
    "views": 10,
    "image_size": 128,
    "ior": 1.4723,
    "sample_ior": false,
    "max_bounces": 4,
    "spp": 1,
    "distance_factor": 2.5,
    "fov_deg": 60.0,
    "jitter_deg": 3.0,
    "env_files": [],
    "env_height": 128,
    "min_primitives": 3,
    "max_primitives": 8,
    "shape_resolution": 128
  },
  "carve": {"resolution": 128, "keep_largest": true, "smooth": true, "subdivisions": 1},
  "search": {"k": 4, "spread_deg": 0.0, "tau": 0.05, "tv_weight": 0.1, "tv_iters": 30, "tir_penalty": 2.0},
  "refine": {"phase1_iters": 500, "phase2_iters": 500, "step": 0.01, "lambda_anchor": 0.1, "lambda_smooth": 0.05},
  "fuse": {"strategy": "re", "points": 40000},
  "reconstruct": {
    "method": "poisson",
    "resolution": 128,
    "screening": 0.0,
    "sigma_cells": 1.5,
    "deform_iterations": 200,
    "w_normal": 1.0,
    "w_prox": 0.1,
    "w_lap": 0.5
  },
  "eval": {"samples": 20000, "lambda_position": 200.0, "lambda_normal": 5.0}
})");
}

namespace {

json toml_to_json(const toml::node& n, const std::string& key) {
    if (const auto* t = n.as_table()) {
        json j = json::object();
        for (auto&& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v, key.empty() ? std::string(k.str()) : key + "." + std::string(k.str()));
        return j;
    }
    if (const auto* a = n.as_array()) {
        json j = json::array();
        for (auto&& v : *a) j.push_back(toml_to_json(v, key));
        return j;
    }
    if (const auto* v = n.as_integer()) return v->get();
    if (const auto* v = n.as_floating_point()) return v->get();
    if (const auto* v = n.as_boolean()) return v->get();
    if (const auto* v = n.as_string()) return v->get();
    throw ConfigError(key, "unsupported TOML value type");
}

std::string type_name(const json& v) {
    if (v.is_boolean()) return "boolean";
    if (v.is_number_integer()) return "integer";
    if (v.is_number()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "array";
    if (v.is_object()) return "table";
    return "null";
}

// Coerces `value` to the type of `def`; integers are accepted where numbers are expected.
json typed(const json& def, const json& value, const std::string& key) {
    if (def.is_object()) {
        if (!value.is_object()) throw ConfigError(key, "expected a table, got " + type_name(value));
        json out = def;
        for (auto it = value.begin(); it != value.end(); ++it) {
            const std::string k = key.empty() ? it.key() : key + "." + it.key();
            if (!def.contains(it.key())) throw ConfigError(k, "unknown key");
            out[it.key()] = typed(def[it.key()], it.value(), k);
        }
        return out;
    }
    if (def.is_array()) {
        if (!value.is_array()) throw ConfigError(key, "expected an array, got " + type_name(value));
        for (std::size_t i = 0; i < value.size(); ++i)
            if (!value[i].is_string()) throw ConfigError(key + "[" + std::to_string(i) + "]", "expected a string");
        return value;
    }
    if (def.is_boolean() && value.is_boolean()) return value;
    if (def.is_string() && value.is_string()) return value;
    if (def.is_number_integer() && value.is_number_integer()) return value;
    if (def.is_number_float() && value.is_number()) return value.get<double>();
    throw ConfigError(key, "expected " + type_name(def) + ", got " + type_name(value));
}

const json& at_path(const json& j, const std::string& dotted) {
    const json* cur = &j;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) cur = &cur->at(part);
    return *cur;
}

void require(bool ok, const std::string& key, const std::string& msg) {
    if (!ok) throw ConfigError(key, msg);
}

}  // namespace

json resolve_config(const json& partial) { return typed(default_config(), partial, ""); }

json load_config(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("--config", "file not found: " + path.string());
    const std::string ext = path.extension().string();
    json raw;
    if (ext == ".toml") {
        try {
            const toml::table t = toml::parse_file(path.string());
            raw = toml_to_json(t, "");
        } catch (const toml::parse_error& e) {
            std::ostringstream msg;
            msg << "parse error at line " << e.source().begin.line << ": " << e.description();
            throw ConfigError(path.string(), msg.str());
        }
    } else if (ext == ".json") {
        try {
            raw = json::parse(read_file_bytes(path));
        } catch (const json::parse_error& e) {
            throw ConfigError(path.string(), std::string("parse error at byte ") + std::to_string(e.byte));
        }
    } else {
        throw ConfigError("--config", "unsupported config extension '" + ext + "' (use .json or .toml)");
    }
    return resolve_config(raw);
}

void set_config_value(json& config, const std::string& dotted_key, const json& value) {
    const json defaults = default_config();
    json* cur = &config;
    const json* def = &defaults;
    std::stringstream ss(dotted_key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!def->is_object() || !def->contains(parts[i])) throw ConfigError(dotted_key, "unknown key");
        def = &(*def)[parts[i]];
        cur = &(*cur)[parts[i]];
    }
    *cur = typed(*def, value, dotted_key);
}

void validate_config(const json& c) {
    auto num = [&](const std::string& k) { return at_path(c, k).get<double>(); };
    auto integer = [&](const std::string& k) { return at_path(c, k).get<long long>(); };
    require(num("ior") > 1.0, "ior", "must exceed 1");
    require(integer("seed") >= 0, "seed", "must be non-negative");
    require(integer("threads") >= 0, "threads", "must be non-negative");
    require(!c["out"].get<std::string>().empty(), "out", "must not be empty");
    const std::string scene = c["scene"].get<std::string>();
    if (!scene.empty()) require(fs::is_regular_file(scene), "scene", "file not found: " + scene);

    require(integer("gen.views") >= 2, "gen.views", "at least two views are required");
    require(integer("gen.image_size") >= 8, "gen.image_size", "must be at least 8");
    require(num("gen.ior") > 1.0, "gen.ior", "must exceed 1");
    require(integer("gen.max_bounces") >= 1, "gen.max_bounces", "must be positive");
    require(integer("gen.spp") >= 1, "gen.spp", "must be positive");
    require(num("gen.distance_factor") > 1.0, "gen.distance_factor", "must exceed 1");
    require(num("gen.fov_deg") > 0.0 && num("gen.fov_deg") < 180.0, "gen.fov_deg", "must lie in (0, 180)");
    require(num("gen.jitter_deg") >= 0.0, "gen.jitter_deg", "must be non-negative");
    require(integer("gen.env_height") >= 4, "gen.env_height", "must be at least 4");
    require(integer("gen.min_primitives") >= 1 && integer("gen.max_primitives") >= integer("gen.min_primitives"),
            "gen.max_primitives", "need 1 <= min_primitives <= max_primitives");
    require(integer("gen.shape_resolution") >= 16, "gen.shape_resolution", "must be at least 16");
    const json& envs = c["gen"]["env_files"];
    for (std::size_t i = 0; i < envs.size(); ++i) {
        const std::string key = "gen.env_files[" + std::to_string(i) + "]";
        require(fs::is_regular_file(envs[i].get<std::string>()), key, "file not found: " + envs[i].get<std::string>());
    }

    require(integer("carve.resolution") >= 8, "carve.resolution", "must be at least 8");
    require(integer("carve.subdivisions") >= 0 && integer("carve.subdivisions") <= 4, "carve.subdivisions",
            "must lie in [0, 4]");
    require(integer("search.k") >= 1, "search.k", "must be positive");
    require(num("search.spread_deg") >= 0.0 && num("search.spread_deg") < 90.0, "search.spread_deg",
            "must lie in [0, 90); 0 selects the view-count schedule");
    require(num("search.tau") >= 0.0, "search.tau", "must be non-negative");
    require(num("search.tv_weight") >= 0.0, "search.tv_weight", "must be non-negative");
    require(integer("search.tv_iters") >= 0, "search.tv_iters", "must be non-negative");
    require(integer("refine.phase1_iters") >= 0, "refine.phase1_iters", "must be non-negative");
    require(integer("refine.phase2_iters") >= 0, "refine.phase2_iters", "must be non-negative");
    require(num("refine.step") > 0.0, "refine.step", "must be positive");
    require(num("refine.lambda_anchor") >= 0.0, "refine.lambda_anchor", "must be non-negative");
    require(num("refine.lambda_smooth") >= 0.0, "refine.lambda_smooth", "must be non-negative");
    const std::string strategy = c["fuse"]["strategy"].get<std::string>();
    require(strategy == "re" || strategy == "avg" || strategy == "nearest", "fuse.strategy",
            "expected one of re, avg, nearest");
    require(integer("fuse.points") >= 100, "fuse.points", "must be at least 100");
    const std::string method = c["reconstruct"]["method"].get<std::string>();
    require(method == "poisson" || method == "deform", "reconstruct.method", "expected poisson or deform");
    require(integer("reconstruct.resolution") >= 8, "reconstruct.resolution", "must be at least 8");
    require(num("reconstruct.screening") >= 0.0, "reconstruct.screening", "must be non-negative");
    require(num("reconstruct.sigma_cells") >= 0.0, "reconstruct.sigma_cells", "must be non-negative");
    require(integer("reconstruct.deform_iterations") >= 0, "reconstruct.deform_iterations", "must be non-negative");
    require(integer("eval.samples") >= 1, "eval.samples", "must be positive");
}

std::string config_hash(const json& config) {
    json c = config;
    c.erase("out");
    c.erase("threads");
    return sha256_hex(c.dump());
}

json library_versions() {
    return {{"refracta", REFRACTA_VERSION},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"tomlplusplus", std::to_string(TOML_LIB_MAJOR) + "." + std::to_string(TOML_LIB_MINOR) + "." +
                                 std::to_string(TOML_LIB_PATCH)}};
}

int exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const std::invalid_argument*>(&e)) return 2;
    if (dynamic_cast<const DataError*>(&e)) return 3;
    if (dynamic_cast<const NumericalError*>(&e)) return 4;
    return 1;
}

std::string diagnostic(const std::exception& e) {
    std::string kind = "internal";
    std::string key;
    if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) kind = "config", key = ce->key();
    else if (dynamic_cast<const std::invalid_argument*>(&e)) kind = "config";
    else if (dynamic_cast<const DataError*>(&e)) kind = "data";
    else if (dynamic_cast<const NumericalError*>(&e)) kind = "numerical";
    std::string msg = e.what();
    for (char& ch : msg)
        if (ch == '\n' || ch == '\r') ch = ' ';
    json quoted = msg;
    std::string out = "error code=" + std::to_string(exit_code(e)) + " kind=" + kind;
    if (!key.empty()) out += " key=" + key;
    return out + " message=" + quoted.dump();
}

}  // namespace refracta::cli
