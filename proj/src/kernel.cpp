#include "fracconv/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

#include "fracconv/errors.hpp"
#include "fracconv/fft.hpp"
#include "fracconv/parallel.hpp"
#include "fracconv/quadrature.hpp"

namespace fracconv {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;
// Integrands are truncated once their modulus drops below exp(kLogCut) relative to the peak.
constexpr double kLogCut = -46.0;

void require_fractional(const FractionalOrder& order, const char* who) {
  if (order.is_wave())
    throw DomainError(std::string(who) + ": alpha = 2 is handled only by solve_deterministic");
}

// g(y) = (1 + i y)^delta - 1 - i delta y, accurate for small |y|.
cplx saddle_phase(double delta, double y) {
  if (std::abs(y) < 0.05) {
    const cplx iy(0.0, y);
    cplx power = iy;
    double binom = delta;
    cplx sum = 0.0;
    for (int k = 2; k < 40; ++k) {
      binom *= (delta - k + 1) / k;
      power *= iy;
      const cplx term = binom * power;
      sum += term;
      if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  return std::pow(cplx(1.0, y), delta) - 1.0 - cplx(0.0, delta * y);
}

QuadratureOptions point_options() {
  QuadratureOptions o;
  o.abs_tol = 1e-15;
  o.rel_tol = 1e-13;
  o.max_intervals = 4000;
  return o;
}

std::vector<double> increasing_breakpoints(std::initializer_list<double> pts, double lo, double hi) {
  std::vector<double> out{lo};
  std::vector<double> sorted(pts);
  std::sort(sorted.begin(), sorted.end());
  for (double p : sorted)
    if (p > out.back() * (1.0 + 1e-12) && p < hi) out.push_back(p);
  if (hi > out.back()) out.push_back(hi);
  return out;
}

// Extends v until envelope(v) < kLogCut; the envelope is the log-modulus of the integrand.
template <class Envelope>
double find_cutoff(Envelope&& envelope, double start) {
  double v = std::max(start, 1e-300);
  for (int i = 0; i < 400 && envelope(v) > kLogCut; ++i) v *= 1.5;
  return v;
}

// Rotated ray xi = r e^{i theta}; valid for every real x because the |xi|^delta term dominates on arcs.
KernelPoint ray_point(const FractionalOrder& order, double t, double x) {
  const double alpha = order.alpha();
  const double delta = order.delta();
  const double theta_max = 0.75 * kPi * alpha - 0.5 * kPi;
  const double theta = std::min(0.5 * kPi, 0.9 * theta_max);
  const cplx w = std::polar(1.0, theta);
  const double angle = kPi / alpha + delta * theta;
  const cplx rot = std::polar(1.0, angle);
  const double decay = std::cos(angle);  // < 0
  auto integrand = [&](double r) {
    const cplx e = t * std::pow(r, delta) * rot - cplx(0.0, x) * r * w;
    return std::real(w * std::exp(e));
  };
  auto envelope = [&](double r) { return t * std::pow(r, delta) * decay + x * r * std::sin(theta); };
  const double scale = std::pow(t, -0.5 * alpha);
  const double rho = (x != 0.0) ? std::min(scale, 1.0 / std::abs(x)) : scale;
  const double cutoff = find_cutoff(envelope, scale);
  const auto bp = increasing_breakpoints({0.1 * rho, rho, 4.0 * rho}, 0.0, cutoff);
  const auto res = integrate(integrand, std::span<const double>(bp), point_options());
  if (!res.converged && res.abs_error > 1e-10)
    throw QuadratureError("kernel_point: ray quadrature did not converge", res.abs_error);
  KernelPoint out;
  out.value = res.value / kPi;
  out.abs_error = res.abs_error / kPi;
  out.log_value = out.value > 0.0 ? std::log(out.value) : -std::numeric_limits<double>::infinity();
  return out;
}

// Horizontal line Im xi = -s through the saddle point xi* = -i s of the phase; the contribution
// exp(phi*) is factored out so the log value stays accurate far into the tail.
KernelPoint saddle_point(const FractionalOrder& order, double t, double x) {
  const double delta = order.delta();
  const double s = std::pow(x / (t * delta), 1.0 / (delta - 1.0));
  const double scale = t * std::pow(s, delta);
  if (!(s > 1e-150) || !(scale > 1e-8)) return ray_point(order, t, x);
  const double log_peak = -((delta - 1.0) / delta) * x * s;  // phi(xi*) = t s^delta - x s
  auto exponent = [&](double v) { return scale * saddle_phase(delta, v / s); };
  auto integrand = [&](double v) { return std::real(std::exp(exponent(v))); };
  auto envelope = [&](double v) { return std::real(exponent(v)); };
  const double width = s / std::sqrt(scale * delta * (delta - 1.0));
  const double cutoff = find_cutoff(envelope, 2.0 * width);
  const auto bp = increasing_breakpoints({0.5 * width, 2.0 * width, 6.0 * width}, 0.0, cutoff);
  const auto res = integrate(integrand, std::span<const double>(bp), point_options());
  if (!res.converged && res.abs_error > 1e-10 * std::max(1.0, std::abs(res.value)))
    throw QuadratureError("kernel_point: saddle quadrature did not converge", res.abs_error);
  KernelPoint out;
  const double j = res.value / kPi;
  out.log_value = j > 0.0 ? log_peak + std::log(j) : -std::numeric_limits<double>::infinity();
  out.value = std::exp(out.log_value);
  out.abs_error = std::exp(log_peak) * res.abs_error / kPi;
  return out;
}

KernelPoint heat_point(double t, double x) {
  KernelPoint p;
  p.log_value = -0.5 * std::log(4.0 * kPi * t) - x * x / (4.0 * t);
  p.value = std::exp(p.log_value);
  return p;
}

// Fills values/symmetrized/log arrays from a per-node evaluator returning P at x.
template <class PointFn>
KernelEvaluation evaluate_on_grid(const FractionalOrder& order, double t, const KernelGrid& grid, PointFn&& point) {
  const std::size_t n = grid.size();
  std::vector<KernelPoint> pts(n);
  parallel_for(n, [&](std::size_t i) { pts[i] = point(grid.node(i)); });
  KernelEvaluation ev{order, t, grid, std::vector<double>(n), std::vector<double>(n), std::vector<double>(n), 0.0, 0};
  const double inv_alpha = 1.0 / order.alpha();
  const double log_alpha = std::log(order.alpha());
  for (std::size_t i = 0; i < n; ++i) {
    ev.values[i] = pts[i].value;
    ev.error_estimate = std::max(ev.error_estimate, pts[i].abs_error);
    // The grid is symmetric: the node mirrored through 0 carries P at |x|.
    const KernelPoint& pos = grid.node(i) < 0.0 ? pts[n - 1 - i] : pts[i];
    double sym = inv_alpha * pos.value;
    if (sym < 0.0 && sym > -kNegativityTolerance) {
      sym = 0.0;
      ++ev.clamped_count;
    }
    ev.symmetrized[i] = sym;
    ev.log_symmetrized[i] = pos.log_value - log_alpha;
  }
  return ev;
}

}  // namespace

// ---------------------------------------------------------------------------

FractionalOrder::FractionalOrder(double alpha) : alpha_(alpha) {
  if (!(alpha >= 1.0 && alpha <= 2.0))
    throw DomainError("alpha must lie in [1, 2], got " + std::to_string(alpha));
}

KernelGrid::KernelGrid(double half_width, std::size_t n_points) : half_width_(half_width), n_(n_points) {
  if (!(half_width > 0.0) || !std::isfinite(half_width)) throw DomainError("grid half-width must be positive");
  if (n_points < 2) throw DomainError("grid needs at least 2 points");
}

std::vector<double> KernelGrid::nodes() const {
  std::vector<double> x(n_);
  for (std::size_t i = 0; i < n_; ++i) x[i] = node(i);
  return x;
}

std::optional<std::size_t> KernelGrid::center_index() const noexcept {
  if (n_ % 2 == 1) return n_ / 2;
  return std::nullopt;
}

std::vector<double> KernelGrid::trapezoid_weights() const {
  std::vector<double> w(n_, spacing());
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

double heat_kernel(double t, double x) {
  if (!(t > 0.0)) throw DomainError("heat_kernel: t must be positive");
  return heat_point(t, x).value;
}

KernelPoint kernel_point(const FractionalOrder& order, double t, double x) {
  if (!(t > 0.0)) throw DomainError("kernel_point: t must be positive");
  require_fractional(order, "kernel_point");
  if (order.is_heat()) return heat_point(t, x);
  if (x > 0.0) return saddle_point(order, t, x);
  return ray_point(order, t, x);
}

KernelEvaluation eval_reduced_kernel(const FractionalOrder& order, const KernelGrid& grid) {
  require_fractional(order, "eval_reduced_kernel");
  return evaluate_on_grid(order, 1.0, grid, [&](double x) { return kernel_point(order, 1.0, x); });
}

KernelEvaluation eval_kernel(const FractionalOrder& order, double t, const KernelGrid& grid) {
  if (!(t > 0.0)) throw DomainError("eval_kernel: t must be positive");
  require_fractional(order, "eval_kernel");
  if (order.is_heat())
    return evaluate_on_grid(order, t, grid, [&](double x) { return heat_point(t, x); });
  const double scale = std::pow(t, -0.5 * order.alpha());
  const double log_scale = std::log(scale);
  return evaluate_on_grid(order, t, grid, [&](double x) {
    KernelPoint p = kernel_point(order, 1.0, x * scale);
    p.value *= scale;
    p.abs_error *= scale;
    p.log_value += log_scale;
    return p;
  });
}

KernelEvaluation eval_kernel_direct(const FractionalOrder& order, double t, const KernelGrid& grid) {
  if (!(t > 0.0)) throw DomainError("eval_kernel_direct: t must be positive");
  require_fractional(order, "eval_kernel_direct");
  return evaluate_on_grid(order, t, grid, [&](double x) { return kernel_point(order, t, x); });
}

// ---------------------------------------------------------------------------
// f_alpha and the F_alpha route

double eval_f_alpha(const FractionalOrder& order, double x) {
  const double alpha = order.alpha();
  if (!(alpha > 1.0 && alpha < 2.0)) throw DomainError("eval_f_alpha: requires 1 < alpha < 2");
  if (x == 0.0) return 1.0 - 2.0 / alpha;
  const double x2 = x * x;
  const double c = std::cos(alpha * kPi);
  const double sn = std::abs(std::sin(alpha * kPi));
  // t = s^{1/alpha}: t^{alpha-1} dt = ds / alpha, leaving a smooth integrand in s.
  auto integrand = [&](double s) {
    return x2 * std::exp(-std::pow(s, 1.0 / alpha)) / (alpha * (s * s + 2.0 * x2 * s * c + x2 * x2));
  };
  const double s_end = std::pow(-kLogCut, alpha);
  const double peak = std::max(0.0, -c) * x2;
  const double width = std::max(sn, 1e-3) * x2;
  const auto bp = increasing_breakpoints({peak - width, peak, peak + width, x2, 2.0 * x2}, 0.0, s_end);
  QuadratureOptions opt;
  opt.abs_tol = 1e-16;
  opt.rel_tol = 1e-13;
  const auto res = integrate(integrand, std::span<const double>(bp), opt);
  if (!res.converged && res.abs_error > 1e-10 * std::abs(res.value))
    throw QuadratureError("eval_f_alpha: quadrature did not converge", res.abs_error);
  return std::sin(alpha * kPi) / kPi * res.value;
}

double F_alpha(const FractionalOrder& order, double xi) {
  const double alpha = order.alpha();
  const double r = std::pow(std::abs(xi), order.delta());
  const double exp_part = (2.0 / alpha) * std::exp(r * std::cos(kPi / alpha)) * std::cos(r * std::sin(kPi / alpha));
  return exp_part + eval_f_alpha(order, xi);
}

namespace {

struct FrequencyRule {
  CompositeRule rule;
  double exp_cutoff;
};

// Composite Gauss-Legendre rule on [0, cutoff]: geometric panels toward 0 (|xi|^delta is not
// smooth there), then uniform panels narrow enough for the largest |x| on the grid.
FrequencyRule frequency_rule(const FractionalOrder& order, double x_max, const FrequencyGridOptions& opt,
                             bool include_slow_tail) {
  const double alpha = order.alpha();
  if (!(alpha > 1.0 && alpha < 2.0)) throw DomainError("F_alpha route requires 1 < alpha < 2");
  const double delta = order.delta();
  const double decay = std::abs(std::cos(kPi / alpha));
  const double exp_cutoff = std::pow(32.2 / decay, 1.0 / delta);      // exp(Re b) < 1e-14
  const double min_cutoff = std::pow(27.7 / decay, 1.0 / delta);      // exp(Re b) < 1e-12
  double cutoff = opt.cutoff > 0.0 ? opt.cutoff : (include_slow_tail ? std::max(exp_cutoff, 100.0) : exp_cutoff);
  if (cutoff < min_cutoff)
    throw ConfigError("frequency cutoff " + std::to_string(cutoff) + " leaves exp(Re b_alpha) above 1e-12");
  const double omega = x_max + delta * std::pow(exp_cutoff, delta - 1.0) + 1.0;
  const double width = opt.panel_width > 0.0 ? opt.panel_width : std::min(1.0, 4.0 / omega);
  if (width * omega > 8.0)
    throw ConfigError("frequency panel width " + std::to_string(width) + " does not resolve grid half-width " +
                      std::to_string(x_max));
  if (opt.points_per_panel < 8) throw ConfigError("need at least 8 points per frequency panel");
  std::vector<double> edges{0.0};
  const double first = std::min(1.0, width);
  for (int k = 40; k >= 1; --k) edges.push_back(first * std::ldexp(1.0, -k));
  edges.push_back(first);
  while (edges.back() < cutoff) edges.push_back(std::min(cutoff, edges.back() + width));
  return {composite_rule(edges, opt.points_per_panel), exp_cutoff};
}

double grid_abs_max(const KernelGrid& grid) { return grid.half_width(); }

}  // namespace

std::vector<double> eval_via_F_alpha(const FractionalOrder& order, const KernelGrid& grid,
                                     const FrequencyGridOptions& options) {
  const double alpha = order.alpha();
  const auto fr = frequency_rule(order, grid_abs_max(grid), options, true);
  const auto& nodes = fr.rule.nodes;
  // f_alpha(xi) ~ c1/xi^2 + c2/xi^4; subtract c1/(1+xi^2) + (c1+c2)/(1+xi^2)^2, whose
  // inverse transforms are known, so the sampled remainder decays like xi^-6.
  const double sn = std::sin(alpha * kPi);
  const double c1 = sn * std::tgamma(alpha) / kPi;
  const double c2 = -2.0 * std::cos(alpha * kPi) * sn * std::tgamma(2.0 * alpha) / kPi;
  const double c12 = c1 + c2;
  std::vector<double> samples(nodes.size());
  parallel_for(nodes.size(), [&](std::size_t k) {
    const double xi = nodes[k];
    const double q = 1.0 / (1.0 + xi * xi);
    samples[k] = fr.rule.weights[k] * (F_alpha(order, xi) - c1 * q - c12 * q * q);
  });
  const std::size_t n = grid.size();
  std::vector<double> out(n);
  parallel_for(n, [&](std::size_t i) {
    const double ax = std::abs(grid.node(i));
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) acc += samples[k] * std::cos(ax * nodes[k]);
    const double e = std::exp(-ax);
    out[i] = acc / kPi + 0.5 * c1 * e + 0.25 * c12 * (1.0 + ax) * e;
  });
  return out;
}

std::vector<double> inverse_transform_exp_b(const FractionalOrder& order, const KernelGrid& grid,
                                            const FrequencyGridOptions& options) {
  const auto fr = frequency_rule(order, grid_abs_max(grid), options, false);
  const auto& nodes = fr.rule.nodes;
  const cplx rot = std::polar(1.0, -kPi / order.alpha());
  std::vector<cplx> samples(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k)
    samples[k] = fr.rule.weights[k] * std::exp(std::pow(nodes[k], order.delta()) * rot);
  std::vector<double> out(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const double x = grid.node(i);
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) acc += std::real(samples[k] * std::polar(1.0, -x * nodes[k]));
    out[i] = acc / kPi;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Extrema, c_alpha and tails

namespace {

// Simpson over f[0..m] with spacing h; a leading 3/8 panel absorbs an odd m.
double simpson_run(const double* f, std::size_t m, double h) {
  if (m == 0) return 0.0;
  if (m == 1) return 0.5 * h * (f[0] + f[1]);
  double s = 0.0;
  std::size_t start = 0;
  if (m % 2 == 1) {
    s += 3.0 * h / 8.0 * (f[0] + 3.0 * f[1] + 3.0 * f[2] + f[3]);
    start = 3;
  }
  for (std::size_t i = start; i + 2 <= m; i += 2) s += h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
  return s;
}

}  // namespace

double kernel_mass(std::span<const double> values, const KernelGrid& grid) {
  if (values.size() != grid.size()) throw InputError("kernel_mass: values do not match the grid");
  const auto c = grid.center_index();
  const double h = grid.spacing();
  if (!c) {
    const auto w = grid.trapezoid_weights();
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += w[i] * values[i];
    return s;
  }
  std::vector<double> left(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(*c) + 1);
  std::reverse(left.begin(), left.end());
  return simpson_run(left.data(), *c, h) + simpson_run(values.data() + *c, values.size() - 1 - *c, h);
}

KernelPropertyReport kernel_property_report(const FractionalOrder& order, double t, const KernelGrid& grid) {
  const double alpha = order.alpha();
  if (!(alpha > 1.0 && alpha < 2.0)) throw DomainError("kernel_property_report: requires 1 < alpha < 2");
  const auto ev = eval_kernel(order, t, grid);
  const std::size_t n = grid.size();
  const double h = grid.spacing();
  KernelPropertyReport rep;
  rep.alpha = alpha;
  rep.t = t;
  rep.mass = kernel_mass(ev.symmetrized, grid);

  // Positive side: nodes with x >= 0; compare in the log domain, which never underflows.
  const std::size_t first_pos = (n + 1) / 2 - (n % 2 == 1 ? 1 : 0);
  std::size_t arg_max = first_pos;
  for (std::size_t i = first_pos; i < n; ++i)
    if (ev.log_symmetrized[i] > ev.log_symmetrized[arg_max]) arg_max = i;
  const double x_star = grid.node(arg_max);
  if (x_star < 20.0 * h * (1.0 - 1e-9))
    throw ResolutionError("maximum at x = " + std::to_string(x_star) + " is within 20 grid spacings of 0");
  if (arg_max == n - 1) throw ResolutionError("maximum sits on the grid boundary");
  rep.max_locations = {-x_star, x_star};

  std::size_t arg_min = arg_max;
  for (std::size_t i = n - 1 - arg_max; i <= arg_max; ++i)
    if (ev.log_symmetrized[i] < ev.log_symmetrized[arg_min]) arg_min = i;
  rep.min_location = grid.node(arg_min);
  if (std::abs(rep.min_location) < 1e-12) rep.min_location = 0.0;

  const double raw_scale = 1.0 / alpha;
  for (std::size_t i = 0; i < n; ++i) {
    if (ev.symmetrized[i] < -kNegativityTolerance * raw_scale) ++rep.negativity_count;
    if (!std::isfinite(ev.log_symmetrized[i])) ++rep.vanishing_count;
  }

  rep.symmetric = true;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = ev.log_symmetrized[i], b = ev.log_symmetrized[n - 1 - i];
    if (std::abs(a - b) > 1e-9 * std::max(1.0, std::abs(a))) rep.symmetric = false;
  }
  rep.monotone = true;
  for (std::size_t i = first_pos + 1; i < n; ++i) {
    const double prev = ev.log_symmetrized[i - 1], cur = ev.log_symmetrized[i];
    const double slack = 1e-10 * std::max(1.0, std::abs(cur));
    if (i <= arg_max && cur < prev - slack) rep.monotone = false;
    if (i > arg_max && cur > prev + slack) rep.monotone = false;
  }
  return rep;
}

double estimate_c_alpha(const FractionalOrder& order) {
  if (order.is_heat()) return 0.0;
  require_fractional(order, "estimate_c_alpha");
  auto log_p = [&](double z) { return kernel_point(order, 1.0, z).log_value; };
  // Coarse scan; the maximum lies below the wave front at 1 for every alpha in (1,2).
  const double step = 0.01;
  std::size_t best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= 300; ++i) {
    const double v = log_p(step * static_cast<double>(i));
    if (v > best_val) best_val = v, best = i;
  }
  if (best < 2) throw ResolutionError("estimate_c_alpha: profile too flat near 0 to locate the maximum");
  // Quadratic vertex through three equally spaced samples, refined once at a finer spacing.
  auto vertex = [&](double center, double h) {
    const double fm = log_p(center - h), f0 = log_p(center), fp = log_p(center + h);
    const double denom = fm - 2.0 * f0 + fp;
    if (!(denom < 0.0)) throw ResolutionError("estimate_c_alpha: no curvature at the maximum");
    return center + 0.5 * h * (fm - fp) / denom;
  };
  double c = vertex(step * static_cast<double>(best), step);
  c = vertex(c, 1e-3);
  c = vertex(c, 1e-4);
  return c;
}

double TailAsymptote::log_model(double x) const {
  const double ax = std::abs(x);
  return std::log(B) + power() * std::log(ax) - A * std::pow(ax, exponent());
}

double TailAsymptote::model(double x) const { return std::exp(log_model(x)); }

double TailAsymptote::tail_mass(double R) const {
  // 2/alpha * int_R^inf B x^p exp(-A x^q) dx = 2B/(alpha q A^a) Gamma(a, A R^q), a = (p+1)/q.
  const double p = power(), q = exponent();
  const double a = (p + 1.0) / q;
  const double z = A * std::pow(std::max(R, 0.0), q);
  // Gamma(a, z) = e^{-z} int_z^inf u^{a-1} e^{-(u-z)} du; the shifted integrand keeps the tail representable.
  auto integrand = [&](double u) { return std::exp((a - 1.0) * std::log(u) - (u - z)); };
  QuadratureOptions opt;
  opt.abs_tol = 0.0;
  opt.rel_tol = 1e-12;
  const double lo = std::max(z, 1e-300);
  const double span = 80.0 + 10.0 * std::abs(a - 1.0) + 1e-3 * z;
  const double shifted = integrate(integrand, lo, lo + span, opt).value;
  const double log_gamma = std::log(std::max(shifted, 1e-300)) - z;
  const double log_mass = std::log(2.0 * B / (alpha * q)) - a * std::log(A) + log_gamma + residual;
  return std::exp(log_mass);
}

double TailAsymptote::tail_mass(double R, double t) const {
  return tail_mass(R * std::pow(t, -0.5 * alpha));
}

TailAsymptote fit_tail_constants(const KernelEvaluation& ev) {
  const double alpha = ev.order.alpha();
  if (ev.t != 1.0) throw DomainError("fit_tail_constants: evaluation must be at t = 1");
  if (alpha >= 2.0) throw DomainError("fit_tail_constants: requires alpha < 2");
  TailAsymptote tail;
  tail.alpha = alpha;
  const double L = ev.grid.half_width();
  tail.fit_lo = 0.8 * L;
  tail.fit_hi = L;
  const double log_alpha = std::log(alpha);
  if (ev.log_symmetrized.back() + log_alpha > std::log(1e-8))
    throw AsymptoteError("fit_tail_constants: P(1, L) >= 1e-8, asymptotic regime not reached; enlarge L");
  const double p = tail.power(), q = tail.exponent();
  std::vector<double> X, Y;
  for (std::size_t i = 0; i < ev.grid.size(); ++i) {
    const double x = ev.grid.node(i);
    if (x < tail.fit_lo - 1e-12 || x <= 0.0) continue;
    const double lp = ev.log_symmetrized[i] + log_alpha;
    if (!std::isfinite(lp)) throw AsymptoteError("fit_tail_constants: non-finite log density in fit range");
    X.push_back(std::pow(x / L, q));
    Y.push_back(lp - p * std::log(x));
  }
  if (X.size() < 3) throw AsymptoteError("fit_tail_constants: fewer than 3 nodes in the fit range");
  // Y = log B - A L^q X, fitted by centered least squares.
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) mx += X[i], my += Y[i];
  mx /= static_cast<double>(X.size());
  my /= static_cast<double>(X.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    sxx += (X[i] - mx) * (X[i] - mx);
    sxy += (X[i] - mx) * (Y[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  tail.A = -slope / std::pow(L, q);
  tail.B = std::exp(intercept);
  double resid = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) resid = std::max(resid, std::abs(Y[i] - (intercept + slope * X[i])));
  tail.residual = resid;
  if (!(tail.A > 0.0) || !(tail.B > 0.0) || !std::isfinite(tail.A) || !std::isfinite(tail.B))
    throw AsymptoteError("fit_tail_constants: fitted constants are not finite and positive");
  if (resid >= 0.1)
    throw AsymptoteError("fit_tail_constants: log residual " + std::to_string(resid) +
                         " >= 0.1, asymptotic regime not reached; enlarge L");
  return tail;
}

// ---------------------------------------------------------------------------
// Reduced kernel table and cell weights

namespace {

constexpr int kChebPoints = 21;
constexpr int kMaxCachedTables = 64;

double clenshaw(const std::vector<double>& c, double u) {
  double b1 = 0.0, b2 = 0.0;
  for (std::size_t k = c.size(); k-- > 1;) {
    const double b0 = 2.0 * u * b1 - b2 + c[k];
    b2 = b1;
    b1 = b0;
  }
  return u * b1 - b2 + c[0];
}

}  // namespace

ReducedKernelTable::ReducedKernelTable(const FractionalOrder& order) : alpha_(order.alpha()) {
  if (!(alpha_ > 1.0 && alpha_ < 2.0)) throw DomainError("ReducedKernelTable: requires 1 < alpha < 2");
  // Right end: first quarter-step where P(1, z) drops below exp(-740).
  double z = 0.25;
  while (kernel_point(order, 1.0, z).log_value > -740.0) z += 0.25;
  z_max_ = z;
  const double width = std::min(0.1, z_max_ / 100.0);
  const std::size_t count = static_cast<std::size_t>(std::ceil(z_max_ / width));
  z_max_ = width * static_cast<double>(count);
  panels_.resize(count);
  std::vector<double> samples(count * kChebPoints);
  parallel_for(count * kChebPoints, [&](std::size_t idx) {
    const std::size_t p = idx / kChebPoints, j = idx % kChebPoints;
    const double a = width * static_cast<double>(p);
    const double u = std::cos(kPi * (static_cast<double>(j) + 0.5) / kChebPoints);
    samples[idx] = kernel_point(order, 1.0, a + 0.5 * width * (u + 1.0)).value;
  });
  double cumulative = 0.0;
  for (std::size_t p = 0; p < count; ++p) {
    Panel& pan = panels_[p];
    pan.a = width * static_cast<double>(p);
    pan.b = pan.a + width;
    pan.coeffs.assign(kChebPoints, 0.0);
    for (int k = 0; k < kChebPoints; ++k) {
      double acc = 0.0;
      for (int j = 0; j < kChebPoints; ++j)
        acc += samples[p * kChebPoints + j] * std::cos(kPi * k * (j + 0.5) / kChebPoints);
      pan.coeffs[k] = 2.0 * acc / kChebPoints;
    }
    pan.coeffs[0] *= 0.5;
    // Antiderivative in u, scaled by dz/du = width/2, vanishing at u = -1.
    pan.int_coeffs.assign(kChebPoints + 1, 0.0);
    auto c = [&](int k) { return (k >= 0 && k < kChebPoints) ? pan.coeffs[k] : 0.0; };
    const double half = 0.5 * width;
    pan.int_coeffs[1] = half * (2.0 * c(0) - c(2)) / 2.0;
    for (int k = 2; k <= kChebPoints; ++k) pan.int_coeffs[k] = half * (c(k - 1) - c(k + 1)) / (2.0 * k);
    double at_minus_one = 0.0;
    for (int k = 1; k <= kChebPoints; ++k) at_minus_one += (k % 2 == 0 ? 1.0 : -1.0) * pan.int_coeffs[k];
    pan.int_coeffs[0] = -at_minus_one;
    pan.cumulative = cumulative;
    cumulative += clenshaw(pan.int_coeffs, 1.0);
  }
}

double ReducedKernelTable::density(double z) const {
  z = std::abs(z);
  if (z >= z_max_) return 0.0;
  const double width = panels_.front().b - panels_.front().a;
  const std::size_t p = std::min(panels_.size() - 1, static_cast<std::size_t>(z / width));
  const Panel& pan = panels_[p];
  return clenshaw(pan.coeffs, 2.0 * (z - pan.a) / width - 1.0);
}

double ReducedKernelTable::cdf(double z) const {
  if (z <= 0.0) return 0.0;
  const Panel& last = panels_.back();
  if (z >= z_max_) return last.cumulative + clenshaw(last.int_coeffs, 1.0);
  const double width = panels_.front().b - panels_.front().a;
  const std::size_t p = std::min(panels_.size() - 1, static_cast<std::size_t>(z / width));
  const Panel& pan = panels_[p];
  return pan.cumulative + clenshaw(pan.int_coeffs, 2.0 * (z - pan.a) / width - 1.0);
}

std::shared_ptr<const ReducedKernelTable> reduced_kernel_table(const FractionalOrder& order) {
  static std::mutex mutex;
  static std::map<double, std::shared_ptr<const ReducedKernelTable>> cache;
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(order.alpha()); it != cache.end()) return it->second;
  }
  auto table = std::make_shared<const ReducedKernelTable>(order);
  std::lock_guard lock(mutex);
  if (cache.size() >= kMaxCachedTables) cache.clear();
  return cache.emplace(order.alpha(), table).first->second;
}

double LagWeights::mass() const { return pairwise_sum(weights); }

namespace {

// y -> int_0^y P(t, s) ds for y >= 0.
std::function<double(double)> kernel_cdf(const FractionalOrder& order, double t) {
  if (order.is_heat()) {
    const double scale = 1.0 / (2.0 * std::sqrt(t));
    return [scale](double y) { return 0.5 * std::erf(y * scale); };
  }
  auto table = reduced_kernel_table(order);
  const double scale = std::pow(t, -0.5 * order.alpha());
  return [scale, table](double y) { return table->cdf(y * scale); };
}

double normalization_factor(const FractionalOrder& order, KernelNormalization normalization) {
  return normalization == KernelNormalization::kFundamental ? 1.0 / order.alpha() : 1.0;
}

}  // namespace

LagWeights lag_weights(const FractionalOrder& order, double t, double spacing, std::size_t max_lag,
                       KernelNormalization normalization, double radius) {
  if (!(t > 0.0)) throw DomainError("lag_weights: t must be positive");
  if (!(spacing > 0.0)) throw DomainError("lag_weights: spacing must be positive");
  if (!(radius >= 0.0)) throw DomainError("lag_weights: radius must be nonnegative");
  require_fractional(order, "lag_weights");
  const auto cdf = kernel_cdf(order, t);
  const double factor = normalization_factor(order, normalization);
  auto clipped = [&](double y) { return cdf(std::min(y, radius)); };
  LagWeights lw;
  lw.spacing = spacing;
  lw.max_lag = max_lag;
  lw.weights.assign(2 * max_lag + 1, 0.0);
  double prev = clipped(0.5 * spacing);
  lw.weights[max_lag] = 2.0 * factor * prev;
  for (std::size_t d = 1; d <= max_lag; ++d) {
    const double next = clipped((static_cast<double>(d) + 0.5) * spacing);
    const double w = factor * (next - prev);
    lw.weights[max_lag + d] = w;
    lw.weights[max_lag - d] = w;
    prev = next;
  }
  return lw;
}

double kernel_mass_within(const FractionalOrder& order, double t, double radius, KernelNormalization normalization) {
  if (!(t > 0.0)) throw DomainError("kernel_mass_within: t must be positive");
  require_fractional(order, "kernel_mass_within");
  if (!(radius > 0.0)) return 0.0;
  return 2.0 * normalization_factor(order, normalization) * kernel_cdf(order, t)(radius);
}

// ---------------------------------------------------------------------------

std::vector<double> solve_deterministic(const FractionalOrder& order, std::span<const double> g, double t,
                                        const KernelGrid& grid) {
  if (g.size() != grid.size()) throw InputError("solve_deterministic: g does not match the grid");
  for (double v : g)
    if (!std::isfinite(v)) throw InputError("solve_deterministic: g contains non-finite values");
  if (t < 0.0 || !std::isfinite(t)) throw DomainError("solve_deterministic: t must be nonnegative");
  std::vector<double> g_copy(g.begin(), g.end());
  if (t == 0.0) return g_copy;
  const std::size_t n = grid.size();
  const double h = grid.spacing();

  if (order.is_wave()) {
    // d'Alembert with periodic linear interpolation.
    auto sample = [&](double pos) {
      const double fl = std::floor(pos);
      const double frac = pos - fl;
      const long nn = static_cast<long>(n);
      long j = static_cast<long>(fl) % nn;
      if (j < 0) j += nn;
      const long j1 = (j + 1) % nn;
      if (frac == 0.0) return g_copy[j];
      return (1.0 - frac) * g_copy[j] + frac * g_copy[j1];
    };
    const double shift = t / h;
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double pos = static_cast<double>(i);
      u[i] = 0.5 * (sample(pos + shift) + sample(pos - shift));
    }
    return u;
  }

  const auto lw = lag_weights(order, t, h, n / 2);
  std::vector<double> circ(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const long d = (k <= n / 2) ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
    circ[k] = lw.at(d);
  }
  RealFft fft(n);
  std::vector<std::complex<double>> G(fft.spectrum_size()), K(fft.spectrum_size());
  fft.forward(g_copy, G);
  fft.forward(circ, K);
  for (std::size_t k = 0; k < G.size(); ++k) G[k] *= K[k] / static_cast<double>(n);
  std::vector<double> u(n);
  fft.backward(G, u);
  return u;
}

}  // namespace fracconv
