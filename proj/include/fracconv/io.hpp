#pragma once

// JSON forms of spectral measures and process specifications.
//
//   measure: {"density": {"kind": "gaussian", "mass": 1, "sigma": 1}, "atoms": [[loc, mass], ...]}
//   density kinds: zero, constant{value}, gaussian{mass, sigma}, rational{scale, power},
//                  box{value, half_width}, table{xi, values}
//   process: {"kind": "constant-one" | "deterministic-profile" | "frozen-sample",
//             "profile": [...] | {"offset", "amplitude", "shape": "sine" | "gaussian" | "constant", "width"},
//             "b": "identity" | "one" | "lipschitz-table", "table": {"u": [...], "b": [...]},
//             "lipschitz": L, "b_scale": c}
// Unknown keys are rejected.

#include <filesystem>

#include "json.hpp"

#include "fracconv/noise.hpp"
#include "fracconv/stochconv.hpp"

namespace fracconv {

SpectralMeasure measure_from_json(const nlohmann::json& j);
nlohmann::json measure_to_json(const SpectralMeasure& mu);
SpectralMeasure load_measure(const std::filesystem::path& path);

ProcessSpec process_from_json(const nlohmann::json& j, const KernelGrid& grid);
nlohmann::json process_to_json(const ProcessSpec& spec);

/// Throws ConfigError naming the first key of j not in allowed.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where);

}  // namespace fracconv
