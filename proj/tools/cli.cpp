#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

#include "fracconv/errors.hpp"
#include "fracconv/hsnorm.hpp"
#include "fracconv/io.hpp"
#include "fracconv/kernel.hpp"
#include "fracconv/noise.hpp"
#include "fracconv/stochconv.hpp"

namespace fracconv::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Parameter validation

double get_number(const json& p, const char* key) {
  if (!p.contains(key) || p.at(key).is_null()) throw ConfigError(std::string("missing parameter \"") + key + "\"");
  if (!p.at(key).is_number()) throw ConfigError(std::string("parameter \"") + key + "\" must be a number");
  const double x = p.at(key).get<double>();
  if (!std::isfinite(x)) throw ConfigError(std::string("parameter \"") + key + "\" must be finite");
  return x;
}

std::int64_t get_integer(const json& p, const char* key) {
  const double x = get_number(p, key);
  if (x != std::floor(x)) throw ConfigError(std::string("parameter \"") + key + "\" must be an integer");
  return static_cast<std::int64_t>(x);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw DomainError(message);
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void check_alpha(double alpha, bool allow_one, bool allow_two) {
  const bool ok = (alpha > 1.0 || (allow_one && alpha == 1.0)) && (alpha < 2.0 || (allow_two && alpha == 2.0));
  if (!ok)
    throw DomainError("alpha = " + fmt(alpha) + " is outside the domain " + (allow_one ? "[1, " : "(1, ") +
                      (allow_two ? "2]" : "2)"));
}

void check_grid(const json& p, std::int64_t min_n) {
  require(get_number(p, "L") > 0.0, "L must be positive");
  require(get_integer(p, "n") >= min_n, "n must be at least " + std::to_string(min_n));
}

json read_json_file(const fs::path& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + what + " file " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ConfigError(what + " file " + path.string() + ": " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& name) {
  const fs::path p(name);
  return p.is_absolute() ? p : base / p;
}

/// Numbers from the last column of a CSV file with a header row.
std::vector<double> read_csv_column(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open u file " + path.string());
  std::vector<double> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto pos = line.find_last_of(',');
    const std::string cell = pos == std::string::npos ? line : line.substr(pos + 1);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
    } catch (const std::exception&) {
      throw ConfigError("u file " + path.string() + ": cannot parse \"" + cell + "\"");
    }
  }
  return out;
}

json with_defaults(const json& given, const json& defaults, const std::string& sub) {
  if (!given.is_object()) throw ConfigError(sub + ": expected an object");
  json out = defaults;
  for (const auto& item : given.items()) {
    if (!defaults.contains(item.key())) throw ConfigError(sub + ": unknown parameter \"" + item.key() + "\"");
    out[item.key()] = item.value();
  }
  return out;
}

json measure_param(const json& value, const fs::path& base) {
  if (value.is_string()) return measure_to_json(load_measure(resolve(base, value.get<std::string>())));
  if (value.is_object()) return measure_to_json(measure_from_json(value));
  throw ConfigError("parameter \"measure\" must be a file name or a measure object");
}

WeightFunction parse_weight(const std::string& w, const KernelGrid& grid) {
  if (w == "exp") return weight_eval(WeightKind::kExponential, grid);
  if (w.rfind("poly:", 0) == 0) {
    double rho = 0.0;
    try {
      rho = std::stod(w.substr(5));
    } catch (const std::exception&) {
      throw ConfigError("weight \"" + w + "\": cannot parse rho");
    }
    return weight_eval(WeightKind::kPolynomial, grid, rho);
  }
  throw ConfigError("weight must be \"exp\" or \"poly:RHO\", got \"" + w + "\"");
}

void check_weight(const json& p) {
  if (!p.at("weight").is_string()) throw ConfigError("parameter \"weight\" must be a string");
  parse_weight(p.at("weight").get<std::string>(), KernelGrid(1.0, 3));
}

json normalize_parameters(const std::string& sub, const json& given, const fs::path& base) {
  if (!given.is_object()) throw ConfigError("\"parameters\" must be an object");
  if (sub == "kernel") {
    json p = with_defaults(given, {{"alpha", nullptr}, {"t", 1.0}, {"L", 40.0}, {"n", 4001}}, sub);
    check_alpha(get_number(p, "alpha"), true, false);
    require(get_number(p, "t") > 0.0, "t must be positive");
    check_grid(p, 3);
    return p;
  }
  if (sub == "solve") {
    json p = with_defaults(given,
                           {{"alpha", nullptr},
                            {"t", 1.0},
                            {"L", 40.0},
                            {"n", 4001},
                            {"initial", {{"kind", "gaussian"}, {"variance", 1.0}, {"center", 0.0}}}},
                           sub);
    check_alpha(get_number(p, "alpha"), true, true);
    require(get_number(p, "t") >= 0.0, "t must be nonnegative");
    check_grid(p, 3);
    json& init = p["initial"];
    if (!init.is_object() || !init.contains("kind")) throw ConfigError("initial: needs a kind");
    const std::string kind = init.at("kind").get<std::string>();
    if (kind == "gaussian") {
      reject_unknown_keys(init, {"kind", "variance", "center"}, "initial");
      init = with_defaults(init, {{"kind", "gaussian"}, {"variance", 1.0}, {"center", 0.0}}, "initial");
      require(get_number(init, "variance") > 0.0, "initial.variance must be positive");
      get_number(init, "center");
    } else if (kind == "bump") {
      reject_unknown_keys(init, {"kind", "half_width", "center"}, "initial");
      init = with_defaults(init, {{"kind", "bump"}, {"half_width", 1.0}, {"center", 0.0}}, "initial");
      require(get_number(init, "half_width") > 0.0, "initial.half_width must be positive");
      get_number(init, "center");
    } else {
      throw ConfigError("initial: unknown kind \"" + kind + "\"");
    }
    return p;
  }
  if (sub == "noise") {
    json p = with_defaults(given,
                           {{"measure", nullptr},
                            {"L", 16.0},
                            {"n", 512},
                            {"dt", 1.0},
                            {"samples", 10000},
                            {"lags", {0, 1, 2, 4, 8}}},
                           sub);
    if (p.at("measure").is_null()) throw ConfigError("missing parameter \"measure\"");
    p["measure"] = measure_param(p.at("measure"), base);
    check_grid(p, 8);
    require(get_number(p, "dt") > 0.0, "dt must be positive");
    require(get_integer(p, "samples") >= 2, "samples must be at least 2");
    if (!p.at("lags").is_array() || p.at("lags").empty()) throw ConfigError("lags must be a nonempty array");
    const auto n = get_integer(p, "n");
    for (const auto& l : p.at("lags")) {
      if (!l.is_number_integer() || l.get<std::int64_t>() < 0) throw ConfigError("lags must be nonnegative integers");
      require(l.get<std::int64_t>() <= n / 4, "lags must not exceed n/4");
    }
    return p;
  }
  if (sub == "hsnorm") {
    json p = with_defaults(given,
                           {{"alpha", nullptr},
                            {"t", 1.0},
                            {"R", nullptr},
                            {"measure", nullptr},
                            {"weight", "exp"},
                            {"u", "one"},
                            {"L", 16.0},
                            {"n", 1024},
                            {"tol", 1e-6},
                            {"time_steps", 32}},
                           sub);
    check_alpha(get_number(p, "alpha"), false, false);
    require(get_number(p, "t") > 0.0, "t must be positive");
    check_grid(p, 8);
    if (p.at("measure").is_null()) throw ConfigError("missing parameter \"measure\"");
    p["measure"] = measure_param(p.at("measure"), base);
    if (p.at("R").is_number()) p["R"] = json::array({p.at("R")});
    if (!p.at("R").is_array() || p.at("R").empty()) throw ConfigError("parameter \"R\" needs at least one value");
    std::vector<double> Rs;
    for (const auto& r : p.at("R")) {
      if (!r.is_number()) throw ConfigError("R values must be numbers");
      Rs.push_back(r.get<double>());
      require(Rs.back() > 0.0 && Rs.back() <= get_number(p, "L"), "R values must lie in (0, L]");
    }
    std::sort(Rs.begin(), Rs.end());
    require(std::adjacent_find(Rs.begin(), Rs.end()) == Rs.end(), "R values must be distinct");
    p["R"] = Rs;
    require(get_number(p, "tol") > 0.0, "tol must be positive");
    require(get_integer(p, "time_steps") >= 1, "time_steps must be positive");
    check_weight(p);
    json& u = p["u"];
    if (u.is_string() && u.get<std::string>() != "one") u = read_csv_column(resolve(base, u.get<std::string>()));
    if (u.is_array()) {
      if (u.size() != static_cast<std::size_t>(get_integer(p, "n")))
        throw ConfigError("u has " + std::to_string(u.size()) + " values, the grid has n = " +
                          std::to_string(get_integer(p, "n")));
      for (const auto& x : u)
        if (!x.is_number()) throw ConfigError("u values must be numbers");
    } else if (!(u.is_string() || u.is_number())) {
      throw ConfigError("u must be \"one\", a number, a file name or an array");
    }
    return p;
  }
  if (sub == "convolve") {
    json p = with_defaults(given,
                           {{"alpha", nullptr},
                            {"t", 1.0},
                            {"R", nullptr},
                            {"auto_R", nullptr},
                            {"steps", 64},
                            {"paths", 10000},
                            {"measure", nullptr},
                            {"spec", {{"kind", "constant-one"}}},
                            {"weight", "exp"},
                            {"L", 16.0},
                            {"n", 512}},
                           sub);
    check_alpha(get_number(p, "alpha"), false, false);
    require(get_number(p, "t") > 0.0, "t must be positive");
    check_grid(p, 8);
    if (p.at("R").is_null() == p.at("auto_R").is_null()) throw ConfigError("give exactly one of R and auto_R");
    if (!p.at("R").is_null()) require(get_number(p, "R") > 0.0 && get_number(p, "R") <= get_number(p, "L"),
                                      "R must lie in (0, L]");
    if (!p.at("auto_R").is_null()) require(get_number(p, "auto_R") > 0.0, "auto_R tolerance must be positive");
    require(get_integer(p, "steps") >= 1, "steps must be positive");
    require(get_integer(p, "paths") >= 30, "paths must be at least 30");
    if (p.at("measure").is_null()) throw ConfigError("missing parameter \"measure\"");
    p["measure"] = measure_param(p.at("measure"), base);
    if (p.at("spec").is_string()) p["spec"] = read_json_file(resolve(base, p.at("spec").get<std::string>()), "spec");
    const KernelGrid grid(get_number(p, "L"), static_cast<std::size_t>(get_integer(p, "n")));
    p["spec"] = process_to_json(process_from_json(p.at("spec"), grid));
    check_weight(p);
    return p;
  }
  throw ConfigError("unknown subcommand \"" + sub + "\"");
}

// ---------------------------------------------------------------------------
// Output helpers

struct Run {
  fs::path dir;
  json outputs = json::array();
  json timings = json::object();

  template <class F>
  auto timed(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto result = f();
    timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
  }

  void write_json(const std::string& name, const json& j) {
    std::ofstream out(dir / name);
    out << j.dump(2) << '\n';
    if (!out) throw Error("cannot write " + (dir / name).string());
    outputs.push_back(name);
  }

  void write_csv(const std::string& name, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& columns) {
    std::ofstream out(dir / name);
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << fmt(columns[c][r]);
      out << '\n';
    }
    if (!out) throw Error("cannot write " + (dir / name).string());
    outputs.push_back(name);
  }
};

KernelGrid grid_of(const json& p) {
  return KernelGrid(p.at("L").get<double>(), p.at("n").get<std::size_t>());
}

double trapezoid(const std::vector<double>& f, const KernelGrid& grid) {
  const auto w = grid.trapezoid_weights();
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f[i];
  return s;
}

json run_kernel(const json& p, Run& run) {
  const FractionalOrder order(p.at("alpha").get<double>());
  const double t = p.at("t").get<double>();
  const KernelGrid grid = grid_of(p);
  const auto ev = run.timed("eval_kernel", [&] { return eval_kernel(order, t, grid); });
  run.write_csv("kernel.csv", {"x", "P_alpha", "symmetrized"}, {grid.nodes(), ev.values, ev.symmetrized});

  json report = {{"alpha", order.alpha()}, {"t", t}, {"mass", kernel_mass(ev.symmetrized, grid)},
                 {"error_estimate", ev.error_estimate}, {"clamped_count", ev.clamped_count}};
  if (order.is_heat()) {
    report["min_location"] = nullptr;
    report["max_locations"] = {0.0, 0.0};
    report["c_alpha"] = 0.0;
  } else {
    report["c_alpha"] = run.timed("estimate_c_alpha", [&] { return estimate_c_alpha(order); });
    try {
      const auto props = run.timed("kernel_property_report", [&] { return kernel_property_report(order, t, grid); });
      report["min_location"] = props.min_location;
      report["max_locations"] = {props.max_locations[0], props.max_locations[1]};
      report["negativity_count"] = props.negativity_count;
      report["vanishing_count"] = props.vanishing_count;
      report["symmetric"] = props.symmetric;
      report["monotone"] = props.monotone;
    } catch (const ResolutionError& e) {
      report["min_location"] = 0.0;
      report["max_locations"] = nullptr;
      report["warning"] = e.what();
    }
  }
  const auto tail = run.timed("fit_tail", [&] { return fitted_tail(order); });
  report["tail_fit"] = {{"A", tail.A},
                        {"B", tail.B},
                        {"residual", tail.residual},
                        {"power", tail.power()},
                        {"exponent", tail.exponent()}};
  run.write_json("kernel_report.json", report);
  return report;
}

json run_solve(const json& p, Run& run) {
  const FractionalOrder order(p.at("alpha").get<double>());
  const double t = p.at("t").get<double>();
  const KernelGrid grid = grid_of(p);
  const json& init = p.at("initial");
  const std::string kind = init.at("kind").get<std::string>();
  const double center = init.at("center").get<double>();
  auto initial = [&](double x) {
    if (kind == "gaussian") {
      const double s2 = init.at("variance").get<double>();
      return std::exp(-0.5 * (x - center) * (x - center) / s2) / std::sqrt(2.0 * M_PI * s2);
    }
    const double a = init.at("half_width").get<double>();
    const double z = (x - center) / a;
    return std::abs(z) < 1.0 ? std::exp(-1.0 / (1.0 - z * z)) : 0.0;
  };
  std::vector<double> g(grid.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = initial(grid.node(i));
  const auto u = run.timed("solve_deterministic", [&] { return solve_deterministic(order, g, t, grid); });
  run.write_csv("solve.csv", {"x", "g", "u"}, {grid.nodes(), g, u});

  json report = {{"alpha", order.alpha()},
                 {"t", t},
                 {"mass_initial", trapezoid(g, grid)},
                 {"mass_solution", trapezoid(u, grid)},
                 {"max_solution", *std::max_element(u.begin(), u.end())}};
  // Closed forms available for a Gaussian start at the two ends of the family.
  if (kind == "gaussian" && (order.is_heat() || order.is_wave())) {
    const double s2 = init.at("variance").get<double>();
    double err = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double x = grid.node(i);
      double exact;
      if (order.is_heat()) {
        const double v = s2 + 2.0 * t;
        exact = std::exp(-0.5 * (x - center) * (x - center) / v) / std::sqrt(2.0 * M_PI * v);
      } else {
        exact = 0.5 * (initial(x - t) + initial(x + t));
      }
      err = std::max(err, std::abs(u[i] - exact));
    }
    report["reference_max_error"] = err;
  }
  run.write_json("solve_report.json", report);
  return report;
}

json run_noise(const json& p, Run& run, std::uint64_t seed) {
  const SpectralMeasure mu = measure_from_json(p.at("measure"));
  const KernelGrid grid = grid_of(p);
  const double dt = p.at("dt").get<double>();
  const auto c17 = run.timed("check_condition_17", [&] { return check_condition_17(mu); });
  const auto H = run.timed("check_hypothesis_H", [&] { return check_hypothesis_H(mu); });
  json report = {{"integrability",
                  {{"value", c17.holds ? json(c17.value) : json(nullptr)},
                   {"holds", c17.holds},
                   {"last_relative_change", c17.last_relative_change},
                   {"shells", c17.shells}}},
                 {"hypothesis_H",
                  {{"holds", H.holds},
                   {"kappa", H.kappa},
                   {"method", H.method},
                   {"integrability_holds", H.integrability_holds},
                   {"probe_holds", H.probe_holds}}}};
  if (!c17.holds) {
    report["warning"] = "measure fails the integrability condition int mu/(1+xi^2) < inf; no field sampled";
    run.write_json("noise_report.json", report);
    return report;
  }
  std::vector<std::size_t> lags;
  for (const auto& l : p.at("lags")) lags.push_back(l.get<std::size_t>());
  const auto field = run.timed("sample_wiener_field", [&] {
    return sample_wiener_field(mu, grid, dt, p.at("samples").get<std::size_t>(), seed);
  });
  const auto est = run.timed("estimate_covariance", [&] { return estimate_covariance(field, lags); });
  const auto dmu = discretize(mu, grid);
  std::vector<double> lag_x, gamma, z;
  for (std::size_t k = 0; k < lags.size(); ++k) {
    lag_x.push_back(static_cast<double>(lags[k]) * grid.spacing());
    gamma.push_back(dt * dmu.correlation(lag_x.back()));
    z.push_back(est.stderr_[k] > 0.0 ? (est.gamma_hat[k] - gamma.back()) / est.stderr_[k] : 0.0);
  }
  run.write_csv("covariance.csv", {"lag", "gamma", "gamma_hat", "stderr"}, {lag_x, gamma, est.gamma_hat, est.stderr_});
  double max_z = 0.0;
  for (double v : z) max_z = std::max(max_z, std::abs(v));
  report["lags"] = lag_x;
  report["z_scores"] = z;
  report["max_abs_z"] = max_z;
  run.write_json("noise_report.json", report);
  return report;
}

std::vector<double> u_values(const json& u, const KernelGrid& grid) {
  if (u.is_array()) return u.get<std::vector<double>>();
  const double c = u.is_number() ? u.get<double>() : 1.0;
  return std::vector<double>(grid.size(), c);
}

json run_hsnorm(const json& p, Run& run) {
  const FractionalOrder order(p.at("alpha").get<double>());
  const double t = p.at("t").get<double>();
  const KernelGrid grid = grid_of(p);
  const SpectralMeasure mu = measure_from_json(p.at("measure"));
  const auto v = parse_weight(p.at("weight").get<std::string>(), grid);
  const auto u = u_values(p.at("u"), grid);
  const auto Rs = p.at("R").get<std::vector<double>>();

  json reports = json::array();
  run.timed("hs_norm_sq", [&] {
    for (double R : Rs) {
      const auto rep = hs_norm_sq(truncate_kernel(order, t, R, grid), u, mu, v);
      json r = {{"R", rep.R}, {"t", rep.t}, {"hs_sq", rep.hs_sq}, {"u_norm_sq", rep.u_norm_sq},
                {"bound_ratio", rep.bound_ratio}};
      if (!rep.warning.empty()) r["warning"] = rep.warning;
      reports.push_back(r);
    }
    return 0;
  });
  json report = {{"alpha", order.alpha()}, {"t", t}, {"reports", reports}};

  const double tol = p.at("tol").get<double>();
  double R_time = Rs.back();
  try {
    const auto st = run.timed("hs_stabilization", [&] { return hs_stabilization(order, t, u, mu, v, grid, Rs, tol); });
    report["R_tilde"] = st.R_tilde;
    report["convergence"] = {{"stabilized", true},
                             {"tol", tol},
                             {"M_tilde", st.M_tilde},
                             {"increments", st.increments},
                             {"increment_bounds", st.increment_bounds},
                             {"increments_within_bound", st.increments_within_bound}};
    R_time = st.R_tilde;
  } catch (const ConvergenceError& e) {
    report["R_tilde"] = nullptr;
    report["convergence"] = {{"stabilized", false}, {"tol", tol}, {"message", e.what()}};
  }
  const auto ti = run.timed("time_integrated_hs", [&] {
    return time_integrated_hs(order, t, R_time, mu, v, grid, u, p.at("time_steps").get<int>());
  });
  report["time_integral"] = {{"R", R_time},
                             {"value", ti.value},
                             {"coarse_value", ti.coarse_value},
                             {"relative_change", ti.relative_change},
                             {"converged", ti.converged}};
  if (!ti.warning.empty()) report["time_integral"]["warning"] = ti.warning;
  run.write_json("hsnorm_report.json", report);
  return report;
}

json run_convolve(const json& p, Run& run, std::uint64_t seed) {
  const FractionalOrder order(p.at("alpha").get<double>());
  const double t = p.at("t").get<double>();
  const KernelGrid grid = grid_of(p);
  const SpectralMeasure mu = measure_from_json(p.at("measure"));
  const ProcessSpec spec = process_from_json(p.at("spec"), grid);
  SimulationOptions options;
  const auto v = parse_weight(p.at("weight").get<std::string>(), grid);
  options.weight = v.kind;
  options.weight_rho = v.rho;

  json report = {{"alpha", order.alpha()}, {"t", t}};
  double R = 0.0;
  if (!p.at("R").is_null()) {
    R = p.at("R").get<double>();
  } else {
    StabilizationReport st;
    R = run.timed("select_truncation_radius", [&] {
      return select_truncation_radius(order, t, spec, mu, grid, p.at("auto_R").get<double>(), &st);
    });
    report["M_tilde"] = st.M_tilde;
  }
  report["R_used"] = R;
  SimulationResult sim;
  const auto iso = run.timed("ito_isometry_check", [&] {
    return ito_isometry_check(order, R, t, spec, mu, grid, p.at("steps").get<int>(), p.at("paths").get<std::size_t>(),
                              seed, options, &sim);
  });
  std::vector<double> ids, norms;
  for (std::size_t i = 0; i < sim.samples.size(); ++i) {
    ids.push_back(static_cast<double>(i));
    norms.push_back(sim.samples[i].l2v_norm_sq);
  }
  run.write_csv("samples.csv", {"path_id", "l2v_norm_sq"}, {ids, norms});
  report["mc_mean"] = iso.mc_mean;
  report["mc_stderr"] = iso.mc_stderr;
  report["quadrature_value"] = iso.quadrature_value;
  report["quadrature_relative_change"] = iso.quadrature_relative_change;
  report["z_score"] = iso.z_score;
  report["expected_discrete_moment"] = iso.expected_discrete_moment;
  report["discrete_z_score"] = iso.discrete_z_score;
  run.write_json("isometry.json", report);
  return report;
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

struct Classified {
  std::string type;
  std::string message;
  int code = kExitNumeric;
  json extra = json::object();
};

Classified classify(std::exception_ptr ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const ConfigError& e) {
    return {"ConfigError", e.what(), kExitConfig};
  } catch (const DomainError& e) {
    return {"DomainError", e.what(), kExitConfig};
  } catch (const InputError& e) {
    return {"InputError", e.what(), kExitConfig};
  } catch (const QuadratureError& e) {
    return {"QuadratureError", e.what(), kExitNumeric, {{"achieved_error", e.achieved_error()}}};
  } catch (const ResolutionError& e) {
    return {"ResolutionError", e.what(), kExitNumeric};
  } catch (const StatisticsError& e) {
    return {"StatisticsError", e.what(), kExitNumeric};
  } catch (const AsymptoteError& e) {
    return {"AsymptoteError", e.what(), kExitNumeric};
  } catch (const ConvergenceError& e) {
    return {"ConvergenceError", e.what(), kExitNumeric};
  } catch (const Error& e) {
    return {"Error", e.what(), kExitNumeric};
  } catch (const json::exception& e) {
    return {"ConfigError", e.what(), kExitConfig};
  } catch (const CLI::Error& e) {
    return {"ConfigError", e.what(), kExitConfig};
  } catch (const std::exception& e) {
    return {"Error", e.what(), kExitNumeric};
  }
}

json error_report(const Classified& c) {
  json j = {{"status", "error"}, {"error_type", c.type}, {"message", c.message}, {"exit_code", c.code}};
  for (const auto& item : c.extra.items()) j[item.key()] = item.value();
  return j;
}

void write_error(const fs::path& dir, const json& report) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream out(dir / "error.json");
  if (out) out << report.dump(2) << '\n';
}

/// Evaluates {"path": "/json/pointer", "min": a, "max": b, "equals": v} against a report.
json check_expectations(const json& expect, const json& summary) {
  json failures = json::array();
  for (const auto& e : expect) {
    const std::string path = e.at("path").get<std::string>();
    const json::json_pointer ptr(path);
    if (!summary.contains(ptr)) {
      failures.push_back({{"path", path}, {"reason", "missing in report"}});
      continue;
    }
    const json& value = summary.at(ptr);
    auto fail = [&](const std::string& why) { failures.push_back({{"path", path}, {"value", value}, {"reason", why}}); };
    if (e.contains("equals") && value != e.at("equals")) fail("expected " + e.at("equals").dump());
    if (e.contains("min") || e.contains("max")) {
      if (!value.is_number()) {
        fail("not a number");
        continue;
      }
      const double x = value.get<double>();
      if (e.contains("min") && !(x >= e.at("min").get<double>())) fail("below min " + e.at("min").dump());
      if (e.contains("max") && !(x <= e.at("max").get<double>())) fail("above max " + e.at("max").dump());
    }
  }
  return failures;
}

void validate_expectations(const json& expect) {
  if (!expect.is_array()) throw ConfigError("\"expect\" must be an array");
  for (const auto& e : expect) {
    reject_unknown_keys(e, {"path", "min", "max", "equals"}, "expect");
    if (!e.contains("path") || !e.at("path").is_string()) throw ConfigError("expect: needs a string \"path\"");
    try {
      json::json_pointer ptr(e.at("path").get<std::string>());
    } catch (const json::exception& ex) {
      throw ConfigError(std::string("expect: bad path: ") + ex.what());
    }
    for (const char* k : {"min", "max"})
      if (e.contains(k) && !e.at(k).is_number()) throw ConfigError(std::string("expect: \"") + k + "\" must be a number");
  }
}

}  // namespace

std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json normalize_config(const json& config, const fs::path& base_dir) {
  reject_unknown_keys(config, {"schema_version", "subcommand", "parameters", "output_dir", "seed", "expect"}, "config");
  if (!config.contains("schema_version")) throw ConfigError("config: missing schema_version");
  if (config.at("schema_version") != kSchemaVersion)
    throw ConfigError("config: unsupported schema_version " + config.at("schema_version").dump() + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  if (!config.contains("subcommand") || !config.at("subcommand").is_string())
    throw ConfigError("config: missing subcommand");
  const std::string sub = config.at("subcommand").get<std::string>();
  json out;
  out["schema_version"] = kSchemaVersion;
  out["subcommand"] = sub;
  out["parameters"] = normalize_parameters(sub, config.value("parameters", json::object()), base_dir);
  const json od = config.value("output_dir", json("fracconv-out/" + sub));
  if (!od.is_string()) throw ConfigError("config: output_dir must be a string");
  out["output_dir"] = od;
  const json seed = config.value("seed", json(1));
  if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() && seed.get<std::int64_t>() < 0))
    throw ConfigError("config: seed must be a nonnegative integer");
  out["seed"] = seed.get<std::uint64_t>();
  if (config.contains("expect")) {
    validate_expectations(config.at("expect"));
    out["expect"] = config.at("expect");
  }
  return out;
}

RunOutcome run_config(const json& config) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  Run run;
  run.dir = config.at("output_dir").get<std::string>();
  fs::create_directories(run.dir);
  fs::remove(run.dir / "error.json");
  const std::string sub = config.at("subcommand").get<std::string>();
  const json& p = config.at("parameters");
  const auto seed = config.at("seed").get<std::uint64_t>();
  RunOutcome outcome;
  if (sub == "kernel")
    outcome.summary = run_kernel(p, run);
  else if (sub == "solve")
    outcome.summary = run_solve(p, run);
  else if (sub == "noise")
    outcome.summary = run_noise(p, run, seed);
  else if (sub == "hsnorm")
    outcome.summary = run_hsnorm(p, run);
  else if (sub == "convolve")
    outcome.summary = run_convolve(p, run, seed);
  else
    throw ConfigError("unknown subcommand \"" + sub + "\"");
  outcome.manifest = {{"status", "ok"},
                      {"tool_version", kToolVersion},
                      {"config", config},
                      {"config_hash", config_hash(config)},
                      {"started_at", started},
                      {"wall_clock_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                      {"timings", run.timings},
                      {"outputs", run.outputs}};
  std::ofstream out(run.dir / "manifest.json");
  out << outcome.manifest.dump(2) << '\n';
  return outcome;
}

int reproduce_all(const fs::path& suite, const fs::path& output_dir, json* results_out) {
  if (!fs::is_directory(suite)) throw ConfigError("suite directory " + suite.string() + " does not exist");
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(suite))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  fs::create_directories(output_dir);

  json members = json::array();
  json timings = json::object();
  json outputs = json::array({"results.json"});
  std::string hashes;
  int code = kExitOk;
  for (const auto& file : files) {
    const std::string name = file.stem().string();
    const fs::path dir = output_dir / name;
    json member = {{"name", name}, {"config", file.filename().string()}};
    const auto m0 = std::chrono::steady_clock::now();
    try {
      json raw = read_json_file(file, "config");
      if (raw.is_object()) raw["output_dir"] = dir.string();
      const json config = normalize_config(raw, file.parent_path());
      hashes += config_hash(config);
      const auto outcome = run_config(config);
      for (const auto& o : outcome.manifest.at("outputs")) outputs.push_back(name + "/" + o.get<std::string>());
      outputs.push_back(name + "/manifest.json");
      const json failures = check_expectations(config.value("expect", json::array()), outcome.summary);
      member["status"] = failures.empty() ? "pass" : "fail";
      member["failures"] = failures;
      member["exit_code"] = failures.empty() ? kExitOk : kExitNumeric;
    } catch (...) {
      const auto c = classify(std::current_exception());
      const json err = error_report(c);
      write_error(dir, err);
      outputs.push_back(name + "/error.json");
      member["status"] = "error";
      member["error"] = err;
      member["exit_code"] = c.code;
    }
    timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - m0).count();
    const int mc = member.at("exit_code").get<int>();
    if (mc != kExitOk && (code == kExitOk || mc == kExitConfig)) code = mc;
    members.push_back(member);
  }
  const json results = {{"passed", code == kExitOk}, {"members", members}};
  {
    std::ofstream out(output_dir / "results.json");
    out << results.dump(2) << '\n';
  }
  const json manifest = {{"status", code == kExitOk ? "ok" : "failed"},
                         {"tool_version", kToolVersion},
                         {"suite", fs::absolute(suite).lexically_normal().string()},
                         {"config_hash", config_hash(json(hashes))},
                         {"started_at", started},
                         {"wall_clock_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                         {"timings", timings},
                         {"outputs", outputs}};
  std::ofstream out(output_dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (results_out) *results_out = results;
  return code;
}

// ---------------------------------------------------------------------------
// Command line

namespace {

struct FlagBinding {
  CLI::Option* option;
  std::string key;
  enum Kind { kNumber, kInteger, kString, kNumberList } kind;
};

void bind_flags(const std::vector<FlagBinding>& flags, json& parameters) {
  for (const auto& f : flags) {
    if (f.option->count() == 0) continue;
    switch (f.kind) {
      case FlagBinding::kNumber:
        parameters[f.key] = f.option->as<double>();
        break;
      case FlagBinding::kInteger:
        parameters[f.key] = f.option->as<std::int64_t>();
        break;
      case FlagBinding::kString:
        parameters[f.key] = f.option->as<std::string>();
        break;
      case FlagBinding::kNumberList:
        parameters[f.key] = f.option->as<std::vector<double>>();
        break;
    }
  }
}

int report_failure(const Classified& c, const fs::path& dir) {
  const json err = error_report(c);
  if (!dir.empty()) write_error(dir, err);
  std::cerr << err.dump() << '\n';
  return c.code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractional diffusion-wave kernels, spatially homogeneous noise and stochastic convolutions."};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  struct Sub {
    CLI::App* app;
    std::vector<FlagBinding> flags;
    std::string out;
    std::uint64_t seed = 1;
    CLI::Option* seed_option = nullptr;
  };
  std::map<std::string, Sub> subs;
  auto add = [&](const std::string& name, const std::string& help) -> Sub& {
    Sub& s = subs[name];
    s.app = app.add_subcommand(name, help);
    s.app->add_option("--out", s.out, "Output directory");
    return s;
  };
  using K = FlagBinding::Kind;
  auto flag = [](Sub& s, const std::string& flag_name, const std::string& key, K kind, const std::string& help) {
    CLI::Option* o = kind == K::kNumberList ? s.app->add_option(flag_name, help)->expected(1)->multi_option_policy(
                                                  CLI::MultiOptionPolicy::TakeAll)
                                            : s.app->add_option(flag_name, help);
    if (kind == K::kNumber || kind == K::kNumberList) o->check(CLI::Number);
    s.flags.push_back({o, key, kind});
  };

  {
    Sub& s = add("kernel", "Evaluate P_alpha(t, .) on a grid with a property report");
    flag(s, "--alpha", "alpha", K::kNumber, "Order alpha in [1, 2)");
    flag(s, "--t", "t", K::kNumber, "Time t > 0");
    flag(s, "--L", "L", K::kNumber, "Grid half-width");
    flag(s, "--n", "n", K::kInteger, "Grid points");
  }
  {
    Sub& s = add("solve", "Solve the deterministic problem from Gaussian or bump initial data");
    flag(s, "--alpha", "alpha", K::kNumber, "Order alpha in [1, 2]");
    flag(s, "--t", "t", K::kNumber, "Time t >= 0");
    flag(s, "--L", "L", K::kNumber, "Grid half-width");
    flag(s, "--n", "n", K::kInteger, "Grid points");
  }
  {
    Sub& s = add("noise", "Check a spectral measure and estimate the noise covariance");
    flag(s, "--measure", "measure", K::kString, "Measure JSON file");
    flag(s, "--L", "L", K::kNumber, "Grid half-width");
    flag(s, "--n", "n", K::kInteger, "Grid points");
    flag(s, "--dt", "dt", K::kNumber, "Time step of the increments");
    flag(s, "--samples", "samples", K::kInteger, "Number of increments");
    s.seed_option = s.app->add_option("--seed", s.seed, "Base seed");
  }
  {
    Sub& s = add("hsnorm", "Hilbert-Schmidt norms of the truncated convolution operator");
    flag(s, "--alpha", "alpha", K::kNumber, "Order alpha in (1, 2)");
    flag(s, "--t", "t", K::kNumber, "Time t > 0");
    flag(s, "--R", "R", K::kNumberList, "Truncation radius (repeatable)");
    flag(s, "--measure", "measure", K::kString, "Measure JSON file");
    flag(s, "--weight", "weight", K::kString, "exp or poly:RHO");
    flag(s, "--u", "u", K::kString, "one, or a CSV file whose last column holds u on the grid");
    flag(s, "--L", "L", K::kNumber, "Grid half-width");
    flag(s, "--n", "n", K::kInteger, "Grid points");
    flag(s, "--tol", "tol", K::kNumber, "Stabilization tolerance");
  }
  {
    Sub& s = add("convolve", "Monte Carlo stochastic convolution against the Ito isometry");
    flag(s, "--alpha", "alpha", K::kNumber, "Order alpha in (1, 2)");
    flag(s, "--t", "t", K::kNumber, "Time t > 0");
    flag(s, "--R", "R", K::kNumber, "Truncation radius");
    flag(s, "--auto-R", "auto_R", K::kNumber, "Pick R by stabilization at this tolerance");
    flag(s, "--steps", "steps", K::kInteger, "Graded time steps");
    flag(s, "--paths", "paths", K::kInteger, "Monte Carlo paths");
    flag(s, "--measure", "measure", K::kString, "Measure JSON file");
    flag(s, "--spec", "spec", K::kString, "Process JSON file");
    flag(s, "--L", "L", K::kNumber, "Grid half-width");
    flag(s, "--n", "n", K::kInteger, "Grid points");
    s.seed_option = s.app->add_option("--seed", s.seed, "Base seed");
  }
  std::string config_file, run_out;
  CLI::App* run_cmd = app.add_subcommand("run", "Run a config file or replay a manifest");
  run_cmd->add_option("config", config_file, "Config or manifest JSON")->required();
  run_cmd->add_option("--out", run_out, "Override the output directory");
  std::string suite, suite_out = "fracconv-out/reproduce-all";
  CLI::App* all_cmd = app.add_subcommand("reproduce-all", "Run every config in a suite directory");
  all_cmd->add_option("suite", suite, "Suite directory")->required();
  all_cmd->add_option("--out", suite_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  fs::path out_dir;
  try {
    if (all_cmd->parsed()) {
      json results;
      const int code = reproduce_all(suite, suite_out, &results);
      std::cout << results.dump(2) << '\n';
      return code;
    }
    json config;
    fs::path base = ".";
    if (run_cmd->parsed()) {
      config = read_json_file(config_file, "config");
      if (config.is_object() && config.contains("config_hash") && config.contains("config")) config = config.at("config");
      base = fs::path(config_file).parent_path();
      if (!run_out.empty()) config["output_dir"] = run_out;
    } else {
      for (auto& [name, s] : subs) {
        if (!s.app->parsed()) continue;
        json parameters = json::object();
        bind_flags(s.flags, parameters);
        config = {{"schema_version", kSchemaVersion}, {"subcommand", name}, {"parameters", parameters}};
        if (!s.out.empty()) config["output_dir"] = s.out;
        if (s.seed_option && s.seed_option->count()) config["seed"] = s.seed;
      }
    }
    if (config.is_object() && config.contains("output_dir") && config.at("output_dir").is_string())
      out_dir = config.at("output_dir").get<std::string>();
    const json normalized = normalize_config(config, base);
    out_dir = normalized.at("output_dir").get<std::string>();
    const auto outcome = run_config(normalized);
    std::cout << outcome.summary.dump(2) << '\n';
    if (normalized.contains("expect")) {
      const json failures = check_expectations(normalized.at("expect"), outcome.summary);
      if (!failures.empty()) {
        std::cerr << json({{"status", "expectation-failed"}, {"failures", failures}}).dump() << '\n';
        return kExitNumeric;
      }
    }
    return kExitOk;
  } catch (...) {
    return report_failure(classify(std::current_exception()), out_dir);
  }
}

}  // namespace fracconv::cli
