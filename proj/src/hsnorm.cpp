#include "fracconv/hsnorm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "fracconv/errors.hpp"
#include "fracconv/fft.hpp"
#include "fracconv/parallel.hpp"
#include "fracconv/quadrature.hpp"

namespace fracconv {

namespace {

using cplx = std::complex<double>;

void require_size(std::span<const double> a, const KernelGrid& grid, const char* what) {
  if (a.size() != grid.size()) throw InputError(std::string(what) + " does not match the grid size");
}

}  // namespace

double WeightFunction::operator()(double x) const {
  const double a = std::abs(x);
  if (kind == WeightKind::kPolynomial) return factor * std::pow(1.0 + a * a, -rho);
  if (a >= 1.0) return factor * std::exp(-a);
  const double e = std::exp(-1.0);
  return factor * (1.5 * e - 0.5 * e * a * a);
}

WeightFunction weight_eval(WeightKind kind, const KernelGrid& grid, double rho, double factor) {
  if (kind == WeightKind::kPolynomial && !(rho > 0.5)) throw DomainError("polynomial weight needs rho > 1/2");
  if (!(factor > 0.0)) throw DomainError("weight factor must be positive");
  WeightFunction v;
  v.kind = kind;
  v.rho = rho;
  v.factor = factor;
  v.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v.values[i] = v(grid.node(i));
  return v;
}

double weight_constant(const WeightFunction& v, const KernelGrid& grid, double R) {
  if (!(R > 0.0)) throw DomainError("weight_constant: R must be positive");
  constexpr int kShifts = 201;
  double worst = 0.0;
  for (int s = 0; s < kShifts; ++s) {
    const double z = -R + 2.0 * R * s / (kShifts - 1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double x = grid.node(i);
      worst = std::max(worst, v(x - z) / v(x));
    }
  }
  return worst / std::exp(R);
}

double weight_integral(const WeightFunction& v, const KernelGrid& grid) {
  const auto w = grid.trapezoid_weights();
  std::vector<double> terms(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) terms[i] = w[i] * v(grid.node(i));
  return pairwise_sum(terms);
}

double l2v_norm_sq(std::span<const double> f, const WeightFunction& v, const KernelGrid& grid) {
  require_size(f, grid, "l2v_norm_sq: function");
  const auto w = grid.trapezoid_weights();
  std::vector<double> terms(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) terms[i] = w[i] * v.values[i] * f[i] * f[i];
  return pairwise_sum(terms);
}

// ---------------------------------------------------------------------------

TruncatedKernel truncate_kernel(const FractionalOrder& order, double t, double R, const KernelGrid& grid,
                                KernelNormalization normalization) {
  if (!(R > 0.0)) throw DomainError("truncate_kernel: R must be positive");
  if (R > grid.half_width() * (1.0 + 1e-12))
    throw DomainError("truncate_kernel: R = " + std::to_string(R) + " exceeds the grid half-width " +
                      std::to_string(grid.half_width()));
  TruncatedKernel k;
  k.order = order;
  k.t = t;
  k.R = R;
  k.grid = grid;
  k.normalization = normalization;
  const double h = grid.spacing();
  const std::size_t max_lag = std::min<std::size_t>(grid.size() - 1, static_cast<std::size_t>(std::ceil(R / h + 0.5)));
  k.weights = lag_weights(order, t, h, max_lag, normalization, R);
  k.mass = kernel_mass_within(order, t, R, normalization);
  k.tail_mass = std::max(0.0, kernel_mass_within(order, t, grid.half_width(), normalization) - k.mass);
  return k;
}

std::vector<double> apply_K_R(const TruncatedKernel& kernel, std::span<const double> u, std::span<const double> eta) {
  require_size(u, kernel.grid, "apply_K_R: u");
  require_size(eta, kernel.grid, "apply_K_R: eta");
  const std::size_t n = kernel.grid.size();
  const std::size_t D = kernel.weights.max_lag;
  const std::size_t m = good_fft_size(n + 2 * D);
  RealFft fft(m);
  std::vector<double> f(m, 0.0), w(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) f[i] = u[i] * eta[i];
  for (std::size_t d = 0; d <= 2 * D; ++d) w[d] = kernel.weights.weights[d];
  std::vector<cplx> F(fft.spectrum_size()), W(fft.spectrum_size());
  fft.forward(f, F);
  fft.forward(w, W);
  for (std::size_t k = 0; k < F.size(); ++k) F[k] *= W[k] / static_cast<double>(m);
  std::vector<double> c(m);
  fft.backward(F, c);
  return std::vector<double>(c.begin() + static_cast<long>(D), c.begin() + static_cast<long>(D + n));
}

OperatorNormCheck convolve_operator_norm_check(const TruncatedKernel& kernel, std::span<const double> psi,
                                               const WeightFunction& v) {
  const std::vector<double> ones(kernel.grid.size(), 1.0);
  const auto conv = apply_K_R(kernel, psi, ones);
  OperatorNormCheck c;
  c.C_v = weight_constant(v, kernel.grid, kernel.R);
  c.lhs = std::sqrt(l2v_norm_sq(conv, v, kernel.grid));
  c.rhs = c.C_v * std::exp(kernel.R) * std::sqrt(l2v_norm_sq(psi, v, kernel.grid));
  c.holds = c.lhs <= c.rhs * (1.0 + 1e-12);
  return c;
}

// ---------------------------------------------------------------------------

HsReport hs_norm_sq(const TruncatedKernel& kernel, std::span<const double> u, const DiscreteSpectralMeasure& mu,
                    const WeightFunction& v) {
  const KernelGrid& grid = kernel.grid;
  require_size(u, grid, "hs_norm_sq: u");
  if (mu.n != grid.size()) throw InputError("hs_norm_sq: measure was discretized on a different grid");
  const std::size_t n = grid.size();
  const long D = static_cast<long>(kernel.weights.max_lag);
  bool has_density = false;
  for (double w : mu.weights) has_density = has_density || w > 0.0;

  std::vector<double> S(n, 0.0);
  const std::size_t chunks = std::min<std::size_t>(n, 4 * thread_count());
  parallel_for(chunks, [&](std::size_t c) {
    RealFft fft(has_density ? n : 1);
    std::vector<double> window(has_density ? n : 1);
    std::vector<cplx> spec(fft.spectrum_size());
    for (std::size_t i = c; i < n; i += chunks) {
      const long lo = std::max(0L, static_cast<long>(i) - D);
      const long hi = std::min(static_cast<long>(n) - 1, static_cast<long>(i) + D);
      double s = 0.0;
      if (has_density) {
        std::fill(window.begin(), window.end(), 0.0);
        for (long j = lo; j <= hi; ++j) window[j - lo] = kernel.weights.at(static_cast<long>(i) - j) * u[j];
        fft.forward(window, spec);
        s += mu.weights[0] * std::norm(spec[0]);
        for (std::size_t k = 1; k <= mu.k_max; ++k) s += 2.0 * mu.weights[k] * std::norm(spec[k]);
      }
      if (mu.zero_atom > 0.0) {
        double sum = 0.0;
        for (long j = lo; j <= hi; ++j) sum += kernel.weights.at(static_cast<long>(i) - j) * u[j];
        s += mu.zero_atom * sum * sum;
      }
      for (const Atom& a : mu.atom_pairs) {
        cplx sum = 0.0;
        for (long j = lo; j <= hi; ++j)
          sum += kernel.weights.at(static_cast<long>(i) - j) * u[j] * std::polar(1.0, a.location * grid.node(j));
        s += 2.0 * a.mass * std::norm(sum);
      }
      S[i] = s;
    }
  });
  const auto trap = grid.trapezoid_weights();
  for (std::size_t i = 0; i < n; ++i) S[i] *= trap[i] * v.values[i];
  HsReport r;
  r.hs_sq = pairwise_sum(S);
  r.R = kernel.R;
  r.t = kernel.t;
  r.u_norm_sq = l2v_norm_sq(u, v, grid);
  r.bound_ratio = r.u_norm_sq > 0.0 ? r.hs_sq / (std::exp(kernel.R) * r.u_norm_sq) : 0.0;
  return r;
}

HsReport hs_norm_sq(const TruncatedKernel& kernel, std::span<const double> u, const SpectralMeasure& mu,
                    const WeightFunction& v) {
  auto r = hs_norm_sq(kernel, u, discretize(mu, kernel.grid), v);
  if (!check_condition_17(mu).holds)
    r.warning = "int mu(dxi)/(1+xi^2) diverges; the norm may diverge under grid refinement";
  return r;
}

double basis_sum_hs(const TruncatedKernel& kernel, std::span<const double> u, const DiscreteSpectralMeasure& mu,
                    const WeightFunction& v, std::size_t n_basis) {
  const std::size_t count = n_basis == 0 ? rkhs_dimension(mu) : n_basis;
  const auto basis = rkhs_basis(mu, count);
  std::vector<double> terms(basis.size());
  parallel_for(basis.size(), [&](std::size_t k) {
    const auto f = rkhs_function(basis[k], mu, kernel.grid);
    terms[k] = l2v_norm_sq(apply_K_R(kernel, u, f), v, kernel.grid);
  });
  return pairwise_sum(terms);
}

// ---------------------------------------------------------------------------

TimeBoundPoint check_bound_eq19(const FractionalOrder& order, double t, double R, const SpectralMeasure& mu,
                           const WeightFunction& v, const KernelGrid& grid) {
  const auto kernel = truncate_kernel(order, t, R, grid);
  const std::vector<double> ones(grid.size(), 1.0);
  TimeBoundPoint p;
  p.t = t;
  p.lhs = hs_norm_sq(kernel, ones, discretize(mu, grid), v).hs_sq;
  p.rhs_factor = weight_integral(v, grid) * check_condition_17(mu).value;
  p.ratio = p.rhs_factor > 0.0 ? p.lhs / p.rhs_factor : 0.0;
  return p;
}

TimeBoundScan scan_time_bound(const FractionalOrder& order, std::span<const double> times, double R,
                         const SpectralMeasure& mu, const WeightFunction& v, const KernelGrid& grid) {
  TimeBoundScan scan;
  scan.max_ratio = 0.0;
  scan.min_ratio = std::numeric_limits<double>::infinity();
  for (double t : times) {
    scan.points.push_back(check_bound_eq19(order, t, R, mu, v, grid));
    scan.max_ratio = std::max(scan.max_ratio, scan.points.back().ratio);
    scan.min_ratio = std::min(scan.min_ratio, scan.points.back().ratio);
  }
  return scan;
}

RadiusBoundCheck check_bound_eq20(const FractionalOrder& order, double t, std::span<const double> R_list,
                           std::span<const double> u, const SpectralMeasure& mu, const WeightFunction& v,
                           const KernelGrid& grid) {
  require_size(u, grid, "check_bound_eq20: u");
  const auto dmu = discretize(mu, grid);
  const std::vector<double> ones(grid.size(), 1.0);
  RadiusBoundCheck out;
  std::vector<HsReport> one_reports;
  for (double R : R_list) {
    const auto kernel = truncate_kernel(order, t, R, grid);
    out.reports.push_back(hs_norm_sq(kernel, u, dmu, v));
    one_reports.push_back(hs_norm_sq(kernel, ones, dmu, v));
    out.max_bound_ratio = std::max({out.max_bound_ratio, out.reports.back().bound_ratio, one_reports.back().bound_ratio});
  }
  out.unit_floor_applicable = !u.empty() && *std::min_element(u.begin(), u.end()) >= 1.0;
  if (out.unit_floor_applicable) {
    out.unit_floor_holds = true;
    out.unit_floor_worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < out.reports.size(); ++i) {
      const double rhs = out.reports[i].hs_sq + out.max_bound_ratio * std::exp(out.reports[i].R) * out.reports[i].u_norm_sq;
      const double margin = (rhs - one_reports[i].hs_sq) / rhs;
      out.unit_floor_worst_margin = std::min(out.unit_floor_worst_margin, margin);
      if (margin < -1e-12) out.unit_floor_holds = false;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double graded_integral(const FractionalOrder& order, double t, double R, const DiscreteSpectralMeasure& dmu,
                       const WeightFunction& v, const KernelGrid& grid, std::span<const double> u, int n) {
  const auto gl = gauss_legendre(3);
  std::vector<double> terms;
  terms.reserve(3 * static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double a = t * std::pow(static_cast<double>(j) / n, 2.0);
    const double b = t * std::pow(static_cast<double>(j + 1) / n, 2.0);
    for (int q = 0; q < 3; ++q) {
      const double s = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[q];
      const auto kernel = truncate_kernel(order, s, R, grid);
      terms.push_back(0.5 * (b - a) * gl.weights[q] * hs_norm_sq(kernel, u, dmu, v).hs_sq);
    }
  }
  return pairwise_sum(terms);
}

}  // namespace

TimeIntegral time_integrated_hs(const FractionalOrder& order, double t, double R, const SpectralMeasure& mu,
                                const WeightFunction& v, const KernelGrid& grid, std::span<const double> u,
                                int n_steps) {
  if (!(t > 0.0)) throw DomainError("time_integrated_hs: t must be positive");
  if (n_steps < 1) throw DomainError("time_integrated_hs: n_steps must be positive");
  require_size(u, grid, "time_integrated_hs: u");
  const auto dmu = discretize(mu, grid);
  TimeIntegral out;
  out.coarse_value = graded_integral(order, t, R, dmu, v, grid, u, n_steps);
  out.value = graded_integral(order, t, R, dmu, v, grid, u, 2 * n_steps);
  out.relative_change = out.value != 0.0 ? std::abs(out.value - out.coarse_value) / std::abs(out.value) : 0.0;
  out.converged = out.relative_change < 0.01;
  if (!out.converged)
    out.warning = "time integral changed by " + std::to_string(100.0 * out.relative_change) +
                  "% under mesh doubling; int mu(dxi)/(1+xi^2) may diverge";
  if (!check_condition_17(mu).holds) out.warning += (out.warning.empty() ? "" : "; ") + std::string("int mu(dxi)/(1+xi^2) diverges");
  return out;
}

TailAsymptote fitted_tail(const FractionalOrder& order) {
  static std::mutex mutex;
  static std::map<double, TailAsymptote> cache;
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(order.alpha()); it != cache.end()) return it->second;
  }
  double L = 1.0;
  while (kernel_point(order, 1.0, L).log_value > -30.0) L *= 1.1;
  const auto tail = fit_tail_constants(eval_reduced_kernel(order, KernelGrid(L, 801)));
  std::lock_guard lock(mutex);
  return cache.emplace(order.alpha(), tail).first->second;
}

StabilizationReport hs_stabilization(const FractionalOrder& order, double t, std::span<const double> u,
                                     const SpectralMeasure& mu, const WeightFunction& v, const KernelGrid& grid,
                                     std::span<const double> R_schedule, double tol) {
  if (R_schedule.empty()) throw DomainError("hs_stabilization: empty R schedule");
  for (std::size_t i = 1; i < R_schedule.size(); ++i)
    if (!(R_schedule[i] > R_schedule[i - 1])) throw DomainError("hs_stabilization: R schedule must increase");
  require_size(u, grid, "hs_stabilization: u");
  const auto dmu = discretize(mu, grid);
  StabilizationReport rep;
  for (double R : R_schedule) rep.reports.push_back(hs_norm_sq(truncate_kernel(order, t, R, grid), u, dmu, v));

  const std::size_t m = rep.reports.size();
  std::size_t chosen = m;
  for (std::size_t i = 0; i < m && chosen == m; ++i) {
    const double ref = rep.reports[i].hs_sq;
    const double scale = ref != 0.0 ? std::abs(ref) : 1.0;
    bool ok = true;
    for (std::size_t j = i + 1; j < m; ++j) ok = ok && std::abs(rep.reports[j].hs_sq - ref) < tol * scale;
    if (ok) chosen = i;
  }
  if (m > 1 && chosen == m - 1)
    throw ConvergenceError("hs_stabilization: |K_R|_HS did not stabilize within the R schedule; extend it beyond R = " +
                           std::to_string(R_schedule.back()));
  rep.R_tilde = R_schedule[chosen];
  for (std::size_t j = chosen + 1; j < m; ++j)
    rep.M_tilde = std::max(rep.M_tilde, std::abs(rep.reports[j].hs_sq - rep.reports[chosen].hs_sq));

  if (m > 1) {
    rep.tail = fitted_tail(order);
    double M_u = 0.0;
    for (double x : u) M_u = std::max(M_u, std::abs(x));
    const double scale = M_u * std::sqrt(dmu.total_mass() * weight_integral(v, grid));
    rep.increments_within_bound = true;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const double a = rep.reports[i].hs_sq, b = rep.reports[i + 1].hs_sq;
      const double inc = std::abs(b - a);
      const double tail = rep.tail.tail_mass(R_schedule[i], t);
      const double bound = scale * tail * (std::sqrt(a) + std::sqrt(b));
      rep.increments.push_back(inc);
      rep.increment_bounds.push_back(bound);
      const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(a, b);
      if (inc > 1.1 * bound + floor) rep.increments_within_bound = false;
    }
  }
  return rep;
}

}  // namespace fracconv
