#pragma once

#include "refracta/geom/io.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace refracta::cli {

/// Every recognized key with its default value. Loaded configs may only use
/// these keys, with values of the same type.
json default_config();

/// Parses a .json or .toml file (by extension) and merges it over the defaults.
/// Throws ConfigError naming the offending key.
json load_config(const fs::path& path);

/// Merges a partial config over the defaults with type checking.
json resolve_config(const json& partial);

/// Sets a dotted key ("gen.views") after type checking against the defaults.
void set_config_value(json& config, const std::string& dotted_key, const json& value);

/// Range and enum checks plus existence of referenced files.
void validate_config(const json& config);

/// SHA-256 of the canonical dump, ignoring keys that cannot change outputs
/// ("out", "threads").
std::string config_hash(const json& config);

/// Pipeline order; "gen" is dropped when the config names an existing scene.
const std::vector<std::string>& all_stages();
std::vector<std::string> pipeline_stages(const json& config);

struct StageStatus {
    std::string name;
    bool ran = false;
    double seconds = 0.0;
    std::string reason;  // why it ran or was skipped
};

struct RunOptions {
    bool resume = true;  // skip stages whose manifests are current
    std::function<void(const StageStatus&)> on_stage;
};

/// Runs `stages` in order. With resume, a stage is skipped when its manifest
/// records the same stage hash, its inputs still hash to the recorded values,
/// its outputs still exist unchanged, and no earlier stage ran in this call.
/// Writes <out>/run.json at the end.
std::vector<StageStatus> run_stages(const json& config, const std::vector<std::string>& stages,
                                    const RunOptions& options = {});

/// Scene manifest path used by the downstream stages.
fs::path scene_manifest_path(const json& config);

/// Output directory of a stage.
fs::path stage_dir(const json& config, const std::string& stage);

/// Versions of this library and of the libraries it was built against.
json library_versions();

/// Exit code for an exception: 2 config/argument, 3 data, 4 numerical, 1 otherwise.
int exit_code(const std::exception& e);
/// One-line diagnostic: error code=<n> kind=<kind> [key=<key>] message="...".
std::string diagnostic(const std::exception& e);

}  // namespace refracta::cli
