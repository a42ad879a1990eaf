#pragma once

// Fundamental solution of the heat/wave-interpolating equation
//
//   u(t,x) = g(x) + 1/Gamma(alpha) int_0^t (t-s)^(alpha-1) u_xx(s,x) ds,   1 <= alpha <= 2.
//
// P_alpha(t,x) is the inverse Fourier transform of
//   q(t,xi) = exp(-t |xi|^delta exp(-i pi gamma sgn(xi) / 2)),  delta = 2/alpha, gamma = 2 - 2/alpha,
// and the fundamental solution is G(t,x) = (1/alpha) P_alpha(t,|x|).
//
// Fourier convention (project-wide): F[phi](xi) = int phi(x) exp(+i x xi) dx, so
// F^{-1}[psi](x) = (1/2pi) int psi(xi) exp(-i x xi) dxi and P_alpha = F^{-1}[q].

#include <array>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace fracconv {

/// Order alpha in [1, 2] of the interpolating equation.
class FractionalOrder {
 public:
  explicit FractionalOrder(double alpha);

  double alpha() const noexcept { return alpha_; }
  double delta() const noexcept { return 2.0 / alpha_; }
  double gamma() const noexcept { return 2.0 - 2.0 / alpha_; }
  bool is_heat() const noexcept { return alpha_ == 1.0; }
  bool is_wave() const noexcept { return alpha_ == 2.0; }

 private:
  double alpha_;
};

/// Uniform nodes x_i = -L + i h, h = 2L/(n-1), on [-L, L].
class KernelGrid {
 public:
  KernelGrid(double half_width, std::size_t n_points);

  double half_width() const noexcept { return half_width_; }
  std::size_t size() const noexcept { return n_; }
  double spacing() const noexcept { return 2.0 * half_width_ / static_cast<double>(n_ - 1); }
  double node(std::size_t i) const noexcept { return -half_width_ + static_cast<double>(i) * spacing(); }
  std::vector<double> nodes() const;
  /// Index of the node x = 0 (odd n only).
  std::optional<std::size_t> center_index() const noexcept;
  /// Trapezoid weights h*(1/2, 1, ..., 1, 1/2).
  std::vector<double> trapezoid_weights() const;

 private:
  double half_width_;
  std::size_t n_;
};

/// Which function K_R convolves with: the fundamental solution (1/alpha)P(t,|x|) or the
/// literal P(t,|x|) written inside the truncated kernel definition.
enum class KernelNormalization { kFundamental, kLiteral };

/// Values below this are treated as quadrature noise around a nonnegative density.
inline constexpr double kNegativityTolerance = 1e-9;

struct KernelEvaluation {
  FractionalOrder order;
  double t;
  KernelGrid grid;
  std::vector<double> values;           ///< P_alpha(t, x_i)
  std::vector<double> symmetrized;      ///< (1/alpha) P_alpha(t, |x_i|), clamped at 0
  std::vector<double> log_symmetrized;  ///< log of symmetrized, from the log-domain evaluator
  double error_estimate = 0.0;          ///< largest absolute quadrature error over the nodes
  std::size_t clamped_count = 0;        ///< nodes in (-tol_neg, 0) set to 0
};

/// One kernel value together with its logarithm (finite even where the value underflows).
struct KernelPoint {
  double value = 0.0;
  double log_value = 0.0;
  double abs_error = 0.0;
};

/// Heat kernel (4 pi t)^{-1/2} exp(-x^2 / (4t)).
double heat_kernel(double t, double x);

/// P_alpha(t, x) by contour quadrature of the inverse transform with t kept in the exponent.
/// x > 0 uses the horizontal line through the saddle point of the phase, x <= 0 a rotated ray.
KernelPoint kernel_point(const FractionalOrder& order, double t, double x);

/// P_alpha(1, x) on the grid.
KernelEvaluation eval_reduced_kernel(const FractionalOrder& order, const KernelGrid& grid);

/// P_alpha(t, x) = t^{-alpha/2} P_alpha(1, x t^{-alpha/2}) on the grid.
KernelEvaluation eval_kernel(const FractionalOrder& order, double t, const KernelGrid& grid);

/// P_alpha(t, x) by direct quadrature at time t (no self-similar rescaling).
KernelEvaluation eval_kernel_direct(const FractionalOrder& order, double t, const KernelGrid& grid);

/// f_alpha(x) = sin(alpha pi)/pi int_0^inf x^2 t^(alpha-1) e^-t / (t^2alpha + 2x^2 t^alpha cos(alpha pi) + x^4) dt,
/// with f_alpha(0) = 1 - 2/alpha.
double eval_f_alpha(const FractionalOrder& order, double x);

/// F_alpha(xi) = (1/alpha)(exp(a_alpha(xi)) + exp(b_alpha(xi))) + f_alpha(xi).
double F_alpha(const FractionalOrder& order, double xi);

struct FrequencyGridOptions {
  double cutoff = 0.0;       ///< 0 selects the cutoff from the decay of exp(Re b_alpha)
  double panel_width = 0.0;  ///< 0 selects the width from the largest |x| on the grid
  int points_per_panel = 20;
};

/// (1/alpha) P_alpha(|x|) via the inverse transform of F_alpha sampled on a frequency grid.
std::vector<double> eval_via_F_alpha(const FractionalOrder& order, const KernelGrid& grid,
                                     const FrequencyGridOptions& options = {});

/// F^{-1}[exp(b_alpha)] on the grid. Under the project convention this is P_alpha(-x).
std::vector<double> inverse_transform_exp_b(const FractionalOrder& order, const KernelGrid& grid,
                                            const FrequencyGridOptions& options = {});

struct KernelPropertyReport {
  double alpha = 0.0;
  double t = 0.0;
  double mass = 0.0;
  double min_location = 0.0;
  std::array<double, 2> max_locations{};
  std::size_t negativity_count = 0;
  std::size_t vanishing_count = 0;
  bool symmetric = false;
  bool monotone = false;
};

/// Mass, extrema and positivity of (1/alpha)P_alpha(t,|x|) on the grid.
/// Throws ResolutionError when the maxima sit fewer than 20 spacings from the origin.
/// int f dx from grid samples. Composite Simpson runs separately on each side of x = 0 (with a
/// 3/8 panel when a side has an odd interval count), so the kink of P_alpha(t, |x|) at the
/// origin costs no accuracy. Grids without a node at 0 fall back to the trapezoid rule.
double kernel_mass(std::span<const double> values, const KernelGrid& grid);

KernelPropertyReport kernel_property_report(const FractionalOrder& order, double t, const KernelGrid& grid);

/// Location c_alpha of the maximum of P_alpha(1, |x|); 0 for the heat kernel.
double estimate_c_alpha(const FractionalOrder& order);

/// Fitted tail B |x|^p exp(-A |x|^q) of P_alpha(1,|x|), p = (alpha-1)/(2-alpha), q = 2/(2-alpha).
struct TailAsymptote {
  double alpha = 1.0;
  double A = 0.0;
  double B = 0.0;
  double fit_lo = 0.0;
  double fit_hi = 0.0;
  double residual = 0.0;  ///< max |log P - log model| on the fit range

  double power() const { return (alpha - 1.0) / (2.0 - alpha); }
  double exponent() const { return 2.0 / (2.0 - alpha); }
  double log_model(double x) const;
  double model(double x) const;
  /// Bound on int_{|x|>R} (1/alpha) P_alpha(1,|x|) dx from the fitted form, inflated by exp(residual).
  double tail_mass(double R) const;
  /// Same bound at time t via self-similarity.
  double tail_mass(double R, double t) const;
};

TailAsymptote fit_tail_constants(const KernelEvaluation& evaluation);

/// u_alpha(t, .) for initial data g on the grid, treated as periodic with period n*h.
std::vector<double> solve_deterministic(const FractionalOrder& order, std::span<const double> g, double t,
                                        const KernelGrid& grid);

/// Piecewise Chebyshev representation of P_alpha(1, z) on z >= 0 and of its integral
/// C(z) = int_0^z P_alpha(1, s) ds. Used for cell-averaged convolution weights.
class ReducedKernelTable {
 public:
  explicit ReducedKernelTable(const FractionalOrder& order);

  double z_max() const noexcept { return z_max_; }
  double density(double z) const;
  double cdf(double z) const;

 private:
  struct Panel {
    double a, b;
    std::vector<double> coeffs;       // Chebyshev coefficients of the density
    std::vector<double> int_coeffs;   // of the antiderivative from a
    double cumulative;                // C(a)
  };
  double alpha_;
  double z_max_ = 0.0;
  std::vector<Panel> panels_;
};

/// Shared table for an order (built once per alpha, thread-safe).
std::shared_ptr<const ReducedKernelTable> reduced_kernel_table(const FractionalOrder& order);

/// Cell-averaged kernel weights w_d = int_{(d-1/2)h}^{(d+1/2)h} G(t, y) dy for |d| <= max_lag.
struct LagWeights {
  double spacing = 0.0;
  std::size_t max_lag = 0;
  std::vector<double> weights;  ///< index d + max_lag

  double at(long d) const {
    const long m = static_cast<long>(max_lag);
    return (d < -m || d > m) ? 0.0 : weights[static_cast<std::size_t>(d + m)];
  }
  double mass() const;
};

/// With a finite radius R the cells are clipped to [-R, R], which realizes the truncated kernel.
LagWeights lag_weights(const FractionalOrder& order, double t, double spacing, std::size_t max_lag,
                       KernelNormalization normalization = KernelNormalization::kFundamental,
                       double radius = std::numeric_limits<double>::infinity());

/// int_{-R}^{R} of the kernel in the chosen normalization (1 as R -> inf for kFundamental).
double kernel_mass_within(const FractionalOrder& order, double t, double radius,
                          KernelNormalization normalization = KernelNormalization::kFundamental);

}  // namespace fracconv
