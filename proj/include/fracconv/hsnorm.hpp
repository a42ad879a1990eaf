#pragma once

// Truncated kernel, the operator K_R(t, u) eta = P^R(t) * (u eta), the weighted space L2_v and
// the Hilbert-Schmidt norm of K_R(t, u) from H_W into L2_v.
//
//   |K_R(t,u)|^2_HS = int v(x) int |F(P^R(t)(x - .) u)(y)|^2 mu(dy) dx.
//
// On the grid the kernel is represented by cell-averaged weights (see lag_weights), so a
// discrete convolution sum_j W_{i-j} f_j approximates int P^R(t)(x_i - z) f(z) dz.

#include <string>
#include <vector>

#include "fracconv/kernel.hpp"
#include "fracconv/noise.hpp"

namespace fracconv {

enum class WeightKind { kExponential, kPolynomial };

/// v(x) = e^{-|x|} for |x| >= 1 joined by 1.5/e - x^2/(2e) on |x| < 1 (value and slope match
/// at |x| = 1), or (1 + x^2)^{-rho} with rho > 1/2.
struct WeightFunction {
  WeightKind kind = WeightKind::kExponential;
  double rho = 1.0;
  double factor = 1.0;  ///< overall multiplier
  std::vector<double> values;

  double operator()(double x) const;
};

WeightFunction weight_eval(WeightKind kind, const KernelGrid& grid, double rho = 1.0, double factor = 1.0);

/// Smallest C with v(x - z) <= C e^R v(x) over grid x and 201 values of z in [-R, R].
double weight_constant(const WeightFunction& v, const KernelGrid& grid, double R);

/// int v dx by the trapezoid rule on the grid.
double weight_integral(const WeightFunction& v, const KernelGrid& grid);

/// |f|^2_{L2_v} by the trapezoid rule.
double l2v_norm_sq(std::span<const double> f, const WeightFunction& v, const KernelGrid& grid);

struct TruncatedKernel {
  FractionalOrder order{1.0};
  double t = 0.0;
  double R = 0.0;
  KernelGrid grid{1.0, 2};
  KernelNormalization normalization = KernelNormalization::kFundamental;
  LagWeights weights;        ///< cells clipped to [-R, R]
  double mass = 0.0;         ///< m_R(t) = int_{-R}^{R} G(t, y) dy
  double tail_mass = 0.0;    ///< int_{R < |y| <= L} G(t, y) dy
};

TruncatedKernel truncate_kernel(const FractionalOrder& order, double t, double R, const KernelGrid& grid,
                                KernelNormalization normalization = KernelNormalization::kFundamental);

/// sum_j W_{i-j} u_j eta_j, with u eta taken as 0 off the grid.
std::vector<double> apply_K_R(const TruncatedKernel& kernel, std::span<const double> u, std::span<const double> eta);

struct OperatorNormCheck {
  bool holds = false;
  double lhs = 0.0;  ///< |P^R * psi|_{L2_v}
  double rhs = 0.0;  ///< C_v e^R |psi|_{L2_v}
  double C_v = 0.0;
};

OperatorNormCheck convolve_operator_norm_check(const TruncatedKernel& kernel, std::span<const double> psi,
                                               const WeightFunction& v);

struct HsReport {
  double hs_sq = 0.0;
  double R = 0.0;
  double t = 0.0;
  double u_norm_sq = 0.0;
  double bound_ratio = 0.0;  ///< hs_sq / (e^R u_norm_sq)
  std::string warning;
};

/// Double integral form: for every grid x the windowed product z -> W(x - z) u(z) is
/// transformed and integrated against the discrete mu.
HsReport hs_norm_sq(const TruncatedKernel& kernel, std::span<const double> u, const SpectralMeasure& mu,
                    const WeightFunction& v);
HsReport hs_norm_sq(const TruncatedKernel& kernel, std::span<const double> u, const DiscreteSpectralMeasure& mu,
                    const WeightFunction& v);

/// sum_k |K_R(t, u) f_k|^2_{L2_v} over the first n_basis elements of rkhs_basis (all when 0).
double basis_sum_hs(const TruncatedKernel& kernel, std::span<const double> u, const DiscreteSpectralMeasure& mu,
                    const WeightFunction& v, std::size_t n_basis = 0);

struct TimeBoundPoint {
  double t = 0.0;
  double lhs = 0.0;
  double rhs_factor = 0.0;
  double ratio = 0.0;
};

struct TimeBoundScan {
  std::vector<TimeBoundPoint> points;
  double max_ratio = 0.0;
  double min_ratio = 0.0;
  double spread() const { return min_ratio > 0.0 ? max_ratio / min_ratio : 0.0; }
};

/// lhs = |K_R(t, 1)|^2_HS, rhs_factor = (int v dx)(int mu(dy)/(1+y^2)).
TimeBoundPoint check_bound_eq19(const FractionalOrder& order, double t, double R, const SpectralMeasure& mu,
                           const WeightFunction& v, const KernelGrid& grid);
TimeBoundScan scan_time_bound(const FractionalOrder& order, std::span<const double> times, double R,
                         const SpectralMeasure& mu, const WeightFunction& v, const KernelGrid& grid);

struct RadiusBoundCheck {
  std::vector<HsReport> reports;
  double max_bound_ratio = 0.0;  ///< measured constant C over the R list
  /// Per R: sum |K(t,1) f_k|^2 <= sum |K(t,u) f_k|^2 + C e^R |u|^2 with the measured C
  /// (only evaluated when u >= 1 everywhere).
  bool unit_floor_applicable = false;
  bool unit_floor_holds = false;
  double unit_floor_worst_margin = 0.0;
};

RadiusBoundCheck check_bound_eq20(const FractionalOrder& order, double t, std::span<const double> R_list,
                           std::span<const double> u, const SpectralMeasure& mu, const WeightFunction& v,
                           const KernelGrid& grid);

struct TimeIntegral {
  double value = 0.0;         ///< with 2 n_steps intervals
  double coarse_value = 0.0;  ///< with n_steps intervals
  double relative_change = 0.0;
  bool converged = false;     ///< relative change below 1%
  std::string warning;
};

/// int_0^t |K_R(s, u)|^2_HS ds on the mesh s_j = t (j/n)^2 with 3-point Gauss-Legendre per
/// interval, compared against the same rule with 2n intervals.
TimeIntegral time_integrated_hs(const FractionalOrder& order, double t, double R, const SpectralMeasure& mu,
                                const WeightFunction& v, const KernelGrid& grid, std::span<const double> u,
                                int n_steps = 32);

struct StabilizationReport {
  std::vector<HsReport> reports;
  double R_tilde = 0.0;
  double M_tilde = 0.0;  ///< max |hs(R) - hs(R_tilde)| over scheduled R > R_tilde
  /// Per consecutive scheduled pair (R, R'): the increment |hs(R') - hs(R)| and the bound
  /// M_u sqrt(Gamma(0) int v) tail(R) (|K_R|_HS + |K_R'|_HS) from the fitted tail.
  std::vector<double> increments;
  std::vector<double> increment_bounds;
  bool increments_within_bound = false;
  TailAsymptote tail;
};

StabilizationReport hs_stabilization(const FractionalOrder& order, double t, std::span<const double> u,
                                     const SpectralMeasure& mu, const WeightFunction& v, const KernelGrid& grid,
                                     std::span<const double> R_schedule, double tol = 1e-6);

/// Tail constants of P_alpha(1, .) fitted on an automatically sized grid (cached per alpha).
TailAsymptote fitted_tail(const FractionalOrder& order);

}  // namespace fracconv
