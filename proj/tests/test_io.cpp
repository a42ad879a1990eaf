#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "cli.hpp"
#include "fracconv/errors.hpp"
#include "fracconv/hsnorm.hpp"
#include "fracconv/io.hpp"

using namespace fracconv;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fracconv_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_main(std::vector<std::string> args) {
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::main(static_cast<int>(argv.size()), argv.data());
}

json kernel_config(const fs::path& out) {
  return {{"schema_version", 1},
          {"subcommand", "kernel"},
          {"parameters", {{"alpha", 1.5}, {"L", 10.0}, {"n", 1001}}},
          {"output_dir", out.string()}};
}

}  // namespace

TEST_CASE("measure JSON round trip") {
  SpectralMeasure mu = gaussian_measure(0.7, 1.3);
  mu.atoms = {{0.0, 0.4}, {0.8, 0.3}, {-0.8, 0.3}};
  const json j = measure_to_json(mu);
  const auto back = measure_from_json(j);
  CHECK(measure_to_json(back) == j);
  CHECK(back.density.mass == 0.7);
  CHECK(back.atoms.size() == 3);
  json bad = j;
  bad["colour"] = "red";
  CHECK_THROWS_AS(measure_from_json(bad), ConfigError);
  CHECK_THROWS_AS(measure_from_json(json{{"density", {{"kind", "lorentz"}}}}), ConfigError);
  CHECK_THROWS_AS(measure_from_json(json{{"density", {{"kind", "constant"}, {"value", -1.0}}}}), ConfigError);
}

TEST_CASE("process JSON round trip") {
  const KernelGrid grid(16.0, 64);
  const json j = {{"kind", "deterministic-profile"},
                  {"profile", {{"offset", 1.0}, {"amplitude", 0.5}, {"shape", "sine"}}},
                  {"b_scale", 2.0}};
  const auto spec = process_from_json(j, grid);
  REQUIRE(spec.profile.size() == grid.size());
  CHECK(spec.profile[10] == doctest::Approx(1.0 + 0.5 * std::sin(grid.node(10))).epsilon(1e-15));
  const auto again = process_from_json(process_to_json(spec), grid);
  CHECK(again.profile == spec.profile);
  CHECK(again.b_scale == 2.0);
  CHECK_THROWS_AS(process_from_json(json{{"kind", "random"}}, grid), ConfigError);
}

TEST_CASE("config normalization") {
  const fs::path out = scratch("norm");
  const json n1 = cli::normalize_config(kernel_config(out));
  CHECK(n1.at("schema_version") == cli::kSchemaVersion);
  CHECK(n1.at("parameters").at("t") == 1.0);
  CHECK(cli::normalize_config(n1) == n1);
  CHECK(cli::config_hash(n1) == cli::config_hash(cli::normalize_config(kernel_config(out))));
  json other = kernel_config(out);
  other["parameters"]["alpha"] = 1.6;
  CHECK(cli::config_hash(cli::normalize_config(other)) != cli::config_hash(n1));

  json unknown = kernel_config(out);
  unknown["parameters"]["beta"] = 1;
  CHECK_THROWS_AS(cli::normalize_config(unknown), ConfigError);
  json bad_alpha = kernel_config(out);
  bad_alpha["parameters"]["alpha"] = 2.5;
  CHECK_THROWS_AS(cli::normalize_config(bad_alpha), DomainError);
  CHECK_THROWS_AS(cli::normalize_config(json{{"subcommand", "fly"}}), ConfigError);
}

TEST_CASE("hsnorm through the CLI matches the library") {
  const fs::path out = scratch("hs");
  const json cfg = {{"schema_version", 1},
                    {"subcommand", "hsnorm"},
                    {"parameters",
                     {{"alpha", 1.5},
                      {"R", {2.0, 4.0}},
                      {"measure", {{"density", {{"kind", "gaussian"}, {"mass", 1.0}, {"sigma", 1.0}}}}},
                      {"n", 256},
                      {"time_steps", 8}}},
                    {"output_dir", out.string()}};
  const auto outcome = cli::run_config(cli::normalize_config(cfg));
  const KernelGrid grid(16.0, 256);
  const auto v = weight_eval(WeightKind::kExponential, grid);
  const std::vector<double> ones(grid.size(), 1.0);
  const FractionalOrder order(1.5);
  const auto& reps = outcome.summary.at("reports");
  REQUIRE(reps.size() == 2);
  CHECK(reps[0].at("hs_sq").get<double>() ==
        hs_norm_sq(truncate_kernel(order, 1.0, 2.0, grid), ones, gaussian_measure(), v).hs_sq);
  CHECK(reps[1].at("hs_sq").get<double>() ==
        hs_norm_sq(truncate_kernel(order, 1.0, 4.0, grid), ones, gaussian_measure(), v).hs_sq);
  CHECK(fs::exists(out / "hsnorm_report.json"));
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(outcome.manifest.at("status") == "ok");
}

TEST_CASE("manifest replay is bit exact") {
  const fs::path a = scratch("replay_a"), b = scratch("replay_b");
  const json cfg = {{"schema_version", 1},
                    {"subcommand", "convolve"},
                    {"parameters",
                     {{"alpha", 1.5},
                      {"R", 4.0},
                      {"steps", 8},
                      {"paths", 40},
                      {"n", 128},
                      {"measure", {{"density", {{"kind", "zero"}}}, {"atoms", {{0.0, 1.0}}}}}}},
                    {"output_dir", a.string()},
                    {"seed", 5}};
  const auto first = cli::run_config(cli::normalize_config(cfg));
  const json stored = json::parse(slurp(a / "manifest.json"));
  CHECK(stored.at("config_hash") == cli::config_hash(stored.at("config")));
  CHECK(stored.at("tool_version") == cli::kToolVersion);
  CHECK(run_main({"fracconv", "run", (a / "manifest.json").string(), "--out", b.string()}) == cli::kExitOk);
  CHECK(slurp(a / "samples.csv") == slurp(b / "samples.csv"));
  CHECK(slurp(a / "isometry.json") == slurp(b / "isometry.json"));
  (void)first;
}

TEST_CASE("exit codes") {
  const fs::path out = scratch("exit");
  CHECK(run_main({"fracconv", "kernel", "--alpha", "2.5", "--out", out.string()}) == cli::kExitConfig);
  CHECK(fs::exists(out / "error.json"));
  CHECK(run_main({"fracconv", "kernel", "--alpha", "1.5", "--L", "10", "--n", "1001", "--out", out.string()}) ==
        cli::kExitOk);
  CHECK(run_main({"fracconv", "kernel", "--no-such-flag"}) == cli::kExitConfig);
  CHECK(run_main({"fracconv", "run", (out / "missing.json").string()}) == cli::kExitConfig);
}

TEST_CASE("reproduce-all") {
  const fs::path empty = scratch("suite_empty");
  const fs::path out = scratch("suite_out");
  CHECK(cli::reproduce_all(empty, out / "empty") == cli::kExitOk);

  const fs::path suite = scratch("suite");
  json good = kernel_config("unused");
  good.erase("output_dir");
  good["expect"] = json::array({{{"path", "/mass"}, {"min", 0.99}, {"max", 1.01}}});
  json failing = good;
  failing["expect"] = json::array({{{"path", "/mass"}, {"min", 2.0}}});
  json later = good;
  later["parameters"]["alpha"] = 1.3;
  std::ofstream(suite / "a_good.json") << good.dump();
  std::ofstream(suite / "b_failing.json") << failing.dump();
  std::ofstream(suite / "c_later.json") << later.dump();
  json results;
  CHECK(cli::reproduce_all(suite, out / "suite", &results) == cli::kExitNumeric);
  CHECK(fs::exists(out / "suite" / "results.json"));
  CHECK(fs::exists(out / "suite" / "c_later" / "kernel_report.json"));
  CHECK(results.dump().find("b_failing") != std::string::npos);

  std::ofstream(suite / "d_broken.json") << R"({"schema_version": 1, "subcommand": "kernel", "parameters": {"alpha": 3}})";
  CHECK(cli::reproduce_all(suite, out / "suite2") == cli::kExitConfig);
}
