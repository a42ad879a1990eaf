// Acceptance report: one PASS/FAIL line per criterion. Always exits 0 unless it crashes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "fracconv/hsnorm.hpp"
#include "fracconv/kernel.hpp"
#include "fracconv/noise.hpp"
#include "fracconv/stochconv.hpp"

using namespace fracconv;
using std::numbers::pi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double gauss(double x, double var) { return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * pi * var); }

const std::vector<double> kAlphas = {1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9};
const std::vector<double> kTimes = {0.25, 1.0, 4.0};

Outcome density_axioms() {
  const KernelGrid g(40.0, 4001);
  double worst_mass = 0.0, worst_grid_mass = 0.0, worst_neg = 0.0;
  for (double a : kAlphas) {
    const FractionalOrder o(a);
    for (double t : kTimes) {
      const auto ev = eval_kernel(o, t, g);
      for (double v : ev.values) worst_neg = std::min(worst_neg, v);
      worst_mass = std::max(worst_mass, std::abs(kernel_mass_within(o, t, g.half_width()) - 1.0));
      worst_grid_mass = std::max(worst_grid_mass, std::abs(kernel_mass(ev.symmetrized, g) - 1.0));
    }
  }
  const bool pass = worst_neg >= -kNegativityTolerance && worst_mass <= 1e-6;
  return {pass, fmt("max |mass - 1| = %.3g", worst_mass) + fmt(", min value = %.3g", worst_neg) +
                    fmt(", grid Simpson max |mass - 1| = %.3g", worst_grid_mass)};
}

Outcome closed_forms() {
  const KernelGrid g(40.0, 4001);
  double heat = 0.0;
  for (double t : kTimes) {
    const auto ev = eval_kernel(FractionalOrder(1.0), t, g);
    for (std::size_t i = 0; i < g.size(); ++i) heat = std::max(heat, std::abs(ev.values[i] - heat_kernel(t, g.node(i))));
  }
  std::vector<double> g0(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) g0[i] = gauss(g.node(i), 1.0);
  double wave = 0.0;
  for (int shift : {1, 10, 50, 200}) {
    const double t = shift * g.spacing();
    const auto u = solve_deterministic(FractionalOrder(2.0), g0, t, g);
    for (std::size_t i = static_cast<std::size_t>(shift); i + static_cast<std::size_t>(shift) < g.size(); ++i) {
      const double x = g.node(i);
      wave = std::max(wave, std::abs(u[i] - 0.5 * (gauss(x - t, 1.0) + gauss(x + t, 1.0))));
    }
  }
  return {heat <= 1e-8 && wave <= 1e-10, fmt("heat max error %.3g, wave max error %.3g", heat, wave)};
}

Outcome self_similarity() {
  const KernelGrid g(20.0, 801);
  double worst = 0.0;
  for (double a : {1.3, 1.5, 1.7}) {
    const FractionalOrder o(a);
    worst = std::max(worst, max_abs_diff(eval_kernel_direct(o, 4.0, g).values, eval_kernel(o, 4.0, g).values));
  }
  return {worst <= 1e-6, fmt("max |direct - scaled| at t = 4: %.3g", worst)};
}

Outcome cross_representation() {
  const KernelGrid g(10.0, 1001);
  double worst = 0.0;
  for (double a : {1.3, 1.5, 1.7}) {
    const FractionalOrder o(a);
    worst = std::max(worst, max_abs_diff(eval_via_F_alpha(o, g), eval_reduced_kernel(o, g).symmetrized));
  }
  return {worst <= 1e-4, fmt("max |F route - direct| on |x| <= 10: %.3g", worst)};
}

Outcome extrema() {
  const KernelGrid g(6.0, 6001);
  bool pass = true;
  double worst = 0.0;
  for (double a : {1.1, 1.3, 1.5, 1.7, 1.9}) {
    const FractionalOrder o(a);
    const double c = estimate_c_alpha(o);
    for (double t : kTimes) {
      const auto r = kernel_property_report(o, t, g);
      const double target = c * std::pow(t, a / 2.0);
      const double err = std::max(std::abs(r.max_locations[1] - target), std::abs(r.max_locations[0] + target));
      worst = std::max(worst, err);
      pass = pass && err <= g.spacing() && r.min_location == 0.0 && r.negativity_count == 0 && r.vanishing_count == 0;
    }
  }
  return {pass, fmt("max |argmax - c t^(alpha/2)| = %.3g, spacing %.3g", worst, g.spacing())};
}

KernelGrid tail_grid(const FractionalOrder& o) {
  double L = 1.0;
  while (kernel_point(o, 1.0, L).log_value > -30.0) L *= 1.1;
  return KernelGrid(L, 801);
}

Outcome tails() {
  double worst = 0.0;
  for (double a : kAlphas) {
    const FractionalOrder o(a);
    worst = std::max(worst, fit_tail_constants(eval_reduced_kernel(o, tail_grid(o))).residual);
  }
  const FractionalOrder o1(1.0);
  const auto h = fit_tail_constants(eval_reduced_kernel(o1, tail_grid(o1)));
  const double eA = std::abs(h.A / 0.25 - 1.0), eB = std::abs(h.B * 2.0 * std::sqrt(pi) - 1.0);
  const bool pass = worst < 0.1 && h.power() == 0.0 && h.exponent() == 2.0 && eA <= 0.02 && eB <= 0.02;
  return {pass, fmt("max residual %.3g", worst) + fmt(", alpha 1: A error %.3g, B error %.3g", eA, eB)};
}

std::vector<double> sine_profile(const KernelGrid& g) {
  std::vector<double> u(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) u[i] = 1.0 + 0.5 * std::sin(g.node(i));
  return u;
}

Outcome basis_sum() {
  const KernelGrid g(16.0, 1024);
  const auto v = weight_eval(WeightKind::kExponential, g);
  const std::vector<double> ones(g.size(), 1.0);
  const auto prof = sine_profile(g);
  struct Tuple {
    double alpha, t, R;
    const std::vector<double>* u;
    SpectralMeasure mu;
  };
  SpectralMeasure mixed = gaussian_measure(0.7, 1.3);
  mixed.atoms = {{0.0, 0.4}, {0.8, 0.3}, {-0.8, 0.3}};
  const std::vector<Tuple> tuples = {
      {1.2, 1.0, 4.0, &ones, lebesgue_measure()},    {1.5, 1.0, 4.0, &prof, lebesgue_measure()},
      {1.8, 0.5, 2.0, &ones, lebesgue_measure()},    {1.2, 2.0, 8.0, &prof, unit_atom_at_zero()},
      {1.5, 1.0, 5.0, &ones, unit_atom_at_zero()},   {1.8, 0.25, 1.0, &prof, unit_atom_at_zero()},
      {1.2, 0.5, 3.0, &prof, gaussian_measure()},    {1.5, 4.0, 8.0, &ones, gaussian_measure()},
      {1.8, 1.0, 6.0, &prof, gaussian_measure()},    {1.3, 1.0, 4.0, &prof, cosine_measure(1.0)},
      {1.6, 2.0, 5.0, &ones, mixed},                 {1.7, 0.5, 3.0, &prof, mixed},
  };
  double worst = 0.0;
  for (const auto& tp : tuples) {
    const auto k = truncate_kernel(FractionalOrder(tp.alpha), tp.t, tp.R, g);
    const auto d = discretize(tp.mu, g);
    const double hs = hs_norm_sq(k, *tp.u, d, v).hs_sq;
    worst = std::max(worst, std::abs(basis_sum_hs(k, *tp.u, d, v) - hs) / hs);
  }
  return {worst <= 1e-6, fmt("max relative difference over 12 tuples: %.3g", worst)};
}

Outcome bounds() {
  const KernelGrid g(16.0, 512);
  const FractionalOrder o(1.5);
  const auto v = weight_eval(WeightKind::kExponential, g);
  const std::vector<double> times = {0.1, 0.25, 0.5, 1.0, 2.0, 4.0};
  std::string detail = "t-scan spread:";
  bool spread_ok = true;
  const std::vector<std::pair<const char*, SpectralMeasure>> family = {
      {"atom", unit_atom_at_zero()}, {"gaussian", gaussian_measure()}, {"lebesgue", lebesgue_measure()}};
  for (const auto& [name, mu] : family) {
    const double s = scan_time_bound(o, times, 5.0, mu, v, g).spread();
    spread_ok = spread_ok && s < 10.0;
    detail += std::string(" ") + name + fmt(" %.3g", s);
  }
  const std::vector<double> Rs = {1.0, 2.0, 4.0, 8.0};
  const auto u = sine_profile(g);
  auto u3 = u;
  for (double& x : u3) x *= 3.0;
  const auto a = check_bound_eq20(o, 1.0, Rs, u, gaussian_measure(), v, g);
  const auto b = check_bound_eq20(o, 1.0, Rs, u3, gaussian_measure(), v, g);
  double inv = 0.0;
  for (std::size_t i = 0; i < Rs.size(); ++i)
    inv = std::max(inv, std::abs(b.reports[i].bound_ratio / a.reports[i].bound_ratio - 1.0));
  auto big = u;
  for (double& x : big) x += 0.5;
  const auto c = check_bound_eq20(o, 1.0, Rs, big, gaussian_measure(), v, g);
  const bool cor = c.unit_floor_applicable && c.unit_floor_holds;
  detail += fmt("; u-scaling ratio change %.3g", inv) + (cor ? "; u >= 1 inequality holds" : "; u >= 1 inequality fails");
  return {spread_ok && inv <= 1e-12 && cor, detail};
}

Outcome stabilization() {
  const KernelGrid g(16.0, 512);
  const auto v = weight_eval(WeightKind::kExponential, g);
  const std::vector<double> ones(g.size(), 1.0);
  const std::vector<double> schedule = {1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 16};
  const auto st = hs_stabilization(FractionalOrder(1.5), 1.0, ones, lebesgue_measure(), v, g, schedule, 1e-6);
  return {st.R_tilde <= 8.0 && st.increments_within_bound,
          fmt("R~ = %g, M~ = %.3g", st.R_tilde, st.M_tilde) +
              (st.increments_within_bound ? ", increments within bound" : ", increments exceed bound")};
}

Outcome isometry() {
  const KernelGrid g(16.0, 512);
  double worst = 0.0;
  for (double a : {1.2, 1.5, 1.8})
    for (const auto& mu : {unit_atom_at_zero(), gaussian_measure()}) {
      const auto r = ito_isometry_check(FractionalOrder(a), 5.0, 1.0, ProcessSpec{}, mu, g, 64, 10000, 1000 + std::lround(a * 10));
      worst = std::max(worst, std::abs(r.z_score));
    }
  return {worst < 3.0, fmt("max |z| over 6 cases: %.3g", worst)};
}

Outcome noise_covariance() {
  const KernelGrid g(16.0, 512);
  const double dt = 0.5;
  const std::vector<std::size_t> lags = {0, 1, 2, 4, 8};
  double worst = 0.0;
  std::uint64_t seed = 31;
  for (const auto& mu : {gaussian_measure(), cosine_measure(1.0), lebesgue_measure()}) {
    const auto est = estimate_covariance(sample_wiener_field(mu, g, dt, 10000, seed++), lags);
    const auto d = discretize(mu, g);
    for (std::size_t k = 0; k < lags.size(); ++k) {
      const double target = dt * d.correlation(static_cast<double>(lags[k]) * g.spacing());
      worst = std::max(worst, std::abs(est.gamma_hat[k] - target) / est.stderr_[k]);
    }
  }
  return {worst <= 3.0, fmt("max |z| over 15 lags: %.3g", worst)};
}

Outcome integrability() {
  const double leb = check_condition_17(lebesgue_measure()).value;
  SpectralMeasure divergent;
  divergent.density.kind = DensityKind::kRational;
  divergent.density.power = 1.0;
  const bool detects = !check_condition_17(divergent).holds && !check_hypothesis_H(divergent).holds;
  std::vector<SpectralMeasure> family = {lebesgue_measure(), unit_atom_at_zero(), gaussian_measure(),
                                         cosine_measure(1.0), divergent};
  for (double p : {2.0, 0.5, -1.0}) {
    SpectralMeasure r = divergent;
    r.density.power = p;
    family.push_back(r);
  }
  bool agree = true;
  for (const auto& mu : family) {
    const auto h = check_hypothesis_H(mu);
    agree = agree && h.probe_holds == h.integrability_holds;
  }
  return {std::abs(leb - pi) <= 1e-4 && detects && agree,
          fmt("Lebesgue value - pi = %.3g", leb - pi) + (detects ? ", divergence detected" : ", divergence missed") +
              (agree ? ", probes agree" : ", probes disagree")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"kernel density axioms", density_axioms},
      {"closed-form anchors", closed_forms},
      {"self-similarity", self_similarity},
      {"cross-representation", cross_representation},
      {"extrema law", extrema},
      {"tail asymptotics", tails},
      {"basis-sum HS equality", basis_sum},
      {"HS bounds", bounds},
      {"stabilization in R", stabilization},
      {"Ito isometry", isometry},
      {"noise covariance", noise_covariance},
      {"integrability checker", integrability},
  };
  int number = 0;
  for (const auto& [name, check] : criteria) {
    ++number;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = check();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2d %s: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", number, name, out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return 0;
}
