#pragma once

// Command-line front end. Every subcommand is first turned into a normalized JSON config
//
//   {"schema_version": 1, "subcommand": "...", "parameters": {...}, "output_dir": "...", "seed": 1}
//
// and then executed by run_config, so flag invocations and config files take the same path.
// Referenced measure, process and u files are inlined during normalization, which makes the
// config stored in a manifest self-contained.

#include <filesystem>
#include <string>

#include "json.hpp"

namespace fracconv::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

/// Validates a config, fills defaults and inlines referenced files (paths relative to base_dir).
/// Throws ConfigError.
nlohmann::json normalize_config(const nlohmann::json& config, const std::filesystem::path& base_dir = ".");

struct RunOutcome {
  nlohmann::json manifest;
  nlohmann::json summary;  ///< the report written by the subcommand
};

/// Runs a normalized config, writing outputs and manifest.json into its output_dir.
RunOutcome run_config(const nlohmann::json& config);

/// FNV-1a 64 of the compact dump of the config.
std::string config_hash(const nlohmann::json& config);

/// Runs every *.json config in suite (sorted by name) into output_dir/<stem>, evaluating the
/// optional "expect" list of each. Returns the exit code; writes results.json and manifest.json.
int reproduce_all(const std::filesystem::path& suite, const std::filesystem::path& output_dir,
                  nlohmann::json* results = nullptr);

/// Entry point of the fracconv executable.
int main(int argc, char** argv);

}  // namespace fracconv::cli
