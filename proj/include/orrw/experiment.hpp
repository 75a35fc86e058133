#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace orrw {

inline constexpr const char* kToolVersion = "0.3.0";

std::vector<std::string> experiment_commands();

/// Validates a raw config and fills every default. Unknown fields raise ConfigError.
nlohmann::json normalize_config(const nlohmann::json& raw);

/// SHA-256 (hex) of the canonical dump of the normalized config without threads and out_dir.
std::string config_hash(const nlohmann::json& normalized);

std::string sha256_hex(std::string_view data);

struct ExperimentOutcome {
  int exit_code = 0;  // 0 ok, 3 gate failure
  nlohmann::json summary;
};

/// Runs the configured command and writes results.ndjson, summary.csv and manifest.json (plus
/// command-specific files) into the output directory. `out_dir_override` wins when non-empty.
/// Config, budget and I/O problems are thrown as orrw::Error.
ExperimentOutcome run_experiment(const nlohmann::json& raw, const std::string& out_dir_override = {});

}  // namespace orrw
