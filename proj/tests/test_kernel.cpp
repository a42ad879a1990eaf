#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "doctest.h"

#include "fracconv/errors.hpp"
#include "fracconv/kernel.hpp"

using namespace fracconv;
using std::numbers::pi;

namespace {

// (1/pi) Re int_0^cutoff exp(xi^delta e^{i pi/alpha} - i x xi) dxi by a plain midpoint sum.
double riemann_oracle(double alpha, double x, double step, double cutoff) {
  const double delta = 2.0 / alpha;
  const std::complex<double> rot = std::polar(1.0, pi / alpha);
  double sum = 0.0;
  for (double xi = 0.5 * step; xi < cutoff; xi += step)
    sum += std::real(std::exp(std::pow(xi, delta) * rot - std::complex<double>(0.0, x * xi)));
  return sum * step / pi;
}

// f_alpha by trapezoid after t = s^2 (integrand smooth in s, negligible beyond s = 8).
double f_alpha_oracle(double alpha, double x) {
  const int m = 200000;
  const double hs = 8.0 / m;
  double sum = 0.0;
  for (int i = 1; i < m; ++i) {
    const double s = i * hs, t = s * s;
    const double ta = std::pow(t, alpha);
    const double den = ta * ta + 2.0 * x * x * ta * std::cos(alpha * pi) + x * x * x * x;
    sum += x * x * std::pow(t, alpha - 1.0) * std::exp(-t) / den * 2.0 * s;
  }
  return std::sin(alpha * pi) / pi * sum * hs;
}

// int_{L}^{inf} P_alpha(1, -y) dy from the large-|x| expansion of the left tail.
double left_tail_series(double alpha, double L) {
  const double delta = 2.0 / alpha;
  double s = 0.0, fact = 1.0;
  for (int k = 1; k <= 4; ++k) {
    fact *= k;
    s += std::tgamma(k * delta + 1.0) * std::sin(2.0 * pi * k / alpha) / (fact * k * delta * std::pow(L, k * delta));
  }
  return -s / pi;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::size_t argmax_positive(const KernelEvaluation& ev) {
  std::size_t best = *ev.grid.center_index();
  for (std::size_t i = best; i < ev.values.size(); ++i)
    if (ev.symmetrized[i] > ev.symmetrized[best]) best = i;
  return best;
}

}  // namespace

TEST_CASE("fractional order stores consistent exponents") {
  for (double a : {1.0, 1.1, 1.5, 1.9, 2.0}) {
    const FractionalOrder o(a);
    CHECK(o.delta() == 2.0 / a);
    CHECK(o.gamma() == 2.0 - 2.0 / a);
    if (a > 1.0 && a < 2.0) CHECK(std::cos(pi * o.gamma() / 2.0) > 0.0);
  }
  CHECK_THROWS_AS(FractionalOrder(2.5), DomainError);
  CHECK_THROWS_AS(FractionalOrder(0.9), DomainError);
}

TEST_CASE("kernel grid is symmetric with a node at 0 for odd sizes") {
  const KernelGrid g(40.0, 4001);
  CHECK(g.spacing() == doctest::Approx(0.02).epsilon(1e-14));
  REQUIRE(g.center_index().has_value());
  CHECK(g.node(*g.center_index()) == doctest::Approx(0.0).epsilon(1e-14));
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.node(i) == doctest::Approx(-g.node(g.size() - 1 - i)).epsilon(1e-14));
  CHECK_FALSE(KernelGrid(1.0, 4).center_index().has_value());
}

TEST_CASE("heat branch at alpha = 1") {
  const FractionalOrder o(1.0);
  const auto ev = eval_reduced_kernel(o, KernelGrid(5.0, 11));
  CHECK(ev.values[5] == doctest::Approx(1.0 / (2.0 * std::sqrt(pi))).epsilon(1e-14));
  const auto ev2 = eval_kernel(o, 2.0, KernelGrid(5.0, 11));
  CHECK(ev2.values[5] == doctest::Approx(1.0 / std::sqrt(8.0 * pi)).epsilon(1e-14));
  const KernelGrid g(10.0, 2001);
  const auto e1 = eval_kernel(o, 1.0, g);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(e1.values[i] - heat_kernel(1.0, g.node(i))) <= 1e-8);
}

TEST_CASE("P_1.5(1, 0) agrees with a brute-force Riemann sum") {
  const FractionalOrder o(1.5);
  const double oracle = riemann_oracle(1.5, 0.0, 1e-4, 200.0);
  CHECK(std::abs(kernel_point(o, 1.0, 0.0).value - oracle) < 1e-6);
  CHECK(std::abs(riemann_oracle(1.5, 1.0, 1e-4, 200.0) - kernel_point(o, 1.0, 1.0).value) < 1e-6);
  CHECK(std::abs(riemann_oracle(1.5, -3.0, 1e-4, 200.0) - kernel_point(o, 1.0, -3.0).value) < 1e-6);
}

TEST_CASE("frozen kernel values") {
  const FractionalOrder o(1.5);
  CHECK(kernel_point(o, 1.0, 0.0).value == doctest::Approx(0.206861747123).epsilon(1e-10));
  CHECK(kernel_point(o, 1.0, 1.0).value == doctest::Approx(0.454948907693).epsilon(1e-10));
  CHECK(kernel_point(o, 1.0, -10.0).value == doctest::Approx(0.00140531991272).epsilon(1e-9));
  // Far in the right tail only the log value is representable.
  CHECK(kernel_point(o, 1.0, 10.0).log_value == doctest::Approx(-1053.186).epsilon(1e-6));
}

TEST_CASE("symmetrized kernel has unit mass") {
  const KernelGrid g(40.0, 4001);
  SUBCASE("alpha 1.5, t 1") {
    const auto ev = eval_reduced_kernel(FractionalOrder(1.5), g);
    CHECK(std::abs(kernel_mass(ev.symmetrized, g) - 1.0) < 1e-6);
  }
  SUBCASE("alpha 1.7, t 1/4") {
    const auto ev = eval_kernel(FractionalOrder(1.7), 0.25, g);
    CHECK(std::abs(kernel_mass(ev.symmetrized, g) - 1.0) < 1e-6);
  }
}

TEST_CASE("unsymmetrized mass is completed by the algebraic left tail") {
  const KernelGrid g(40.0, 4001);
  const auto ev = eval_reduced_kernel(FractionalOrder(1.5), g);
  const double on_grid = kernel_mass(ev.values, g);
  const double tail = left_tail_series(1.5, 40.0);
  CHECK(tail > 1e-3);  // the grid alone misses a visible part of the mass
  CHECK(std::abs(on_grid + tail - 1.0) < 1e-6);
  CHECK(kernel_mass(std::vector<double>(ev.values.begin() + 2000, ev.values.end()), KernelGrid(20.0, 2001)) ==
        doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("kernel values are nonnegative up to the clamp tolerance") {
  for (double a : {1.1, 1.5, 1.9}) {
    const auto ev = eval_reduced_kernel(FractionalOrder(a), KernelGrid(40.0, 4001));
    for (double v : ev.values) CHECK(v >= -kNegativityTolerance);
  }
}

TEST_CASE("self-similar scaling") {
  const FractionalOrder o(1.5);
  const KernelGrid g(20.0, 401);
  const auto e4 = eval_kernel(o, 4.0, g);
  const double s = std::pow(2.0, -1.5);
  for (std::size_t i = 0; i < g.size(); i += 20)
    CHECK(e4.values[i] == doctest::Approx(s * kernel_point(o, 1.0, g.node(i) * s).value).epsilon(1e-12));
  for (double a : {1.3, 1.5, 1.7}) {
    const FractionalOrder oa(a);
    CHECK(max_abs_diff(eval_kernel_direct(oa, 4.0, g).values, eval_kernel(oa, 4.0, g).values) < 1e-6);
  }
  CHECK_THROWS_AS(eval_kernel(o, 0.0, g), DomainError);
  CHECK_THROWS_AS(eval_kernel(FractionalOrder(2.0), 1.0, g), DomainError);
}

TEST_CASE("f_alpha") {
  const FractionalOrder o(1.5);
  CHECK(eval_f_alpha(o, 0.0) == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
  CHECK(std::abs(eval_f_alpha(o, 50.0)) < 1e-3);
  CHECK(eval_f_alpha(o, 1.0) < 0.0);
  for (double x : {0.5, 1.0, 3.0}) CHECK(eval_f_alpha(o, x) == doctest::Approx(f_alpha_oracle(1.5, x)).epsilon(1e-7));
  CHECK(eval_f_alpha(o, 0.5) == doctest::Approx(-0.207361713466453).epsilon(1e-10));
  CHECK_THROWS_AS(eval_f_alpha(FractionalOrder(1.0), 1.0), DomainError);
}

TEST_CASE("F_alpha route") {
  const FractionalOrder o(1.5);
  CHECK(F_alpha(o, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  const KernelGrid g(10.0, 1001);
  for (double a : {1.3, 1.5, 1.7}) {
    const FractionalOrder oa(a);
    CHECK(max_abs_diff(eval_via_F_alpha(oa, g), eval_reduced_kernel(oa, g).symmetrized) < 1e-4);
  }
}

TEST_CASE("inverse transform of exp(b_alpha) is the mirrored kernel") {
  const FractionalOrder o(1.5);
  const KernelGrid g(10.0, 1001);
  const auto mirrored = inverse_transform_exp_b(o, g);
  const auto ev = eval_reduced_kernel(o, g);
  std::vector<double> reversed(ev.values.rbegin(), ev.values.rend());
  CHECK(max_abs_diff(mirrored, reversed) < 1e-4);
  CHECK(max_abs_diff(mirrored, ev.values) > 0.1);
}

TEST_CASE("extrema law") {
  const FractionalOrder o(1.5);
  const KernelGrid g(40.0, 4001);
  const auto r1 = kernel_property_report(o, 1.0, g);
  CHECK(r1.min_location == 0.0);
  CHECK(r1.max_locations[1] > 0.0);
  CHECK(r1.max_locations[0] == -r1.max_locations[1]);
  CHECK(r1.negativity_count == 0);
  CHECK(r1.vanishing_count == 0);
  CHECK(r1.symmetric);
  CHECK(r1.monotone);
  const auto r4 = kernel_property_report(o, 4.0, g);
  CHECK(std::abs(r4.max_locations[1] - r1.max_locations[1] * std::pow(2.0, 1.5)) <= g.spacing());

  const double c = estimate_c_alpha(o);
  CHECK(c == doctest::Approx(1.1717804690).epsilon(1e-8));
  for (double t : {0.25, 1.0, 4.0}) {
    const KernelGrid fine(10.0, 20001);
    const auto ev = eval_kernel(o, t, fine);
    CHECK(std::abs(fine.node(argmax_positive(ev)) - c * std::pow(t, 0.75)) <= fine.spacing());
  }
  CHECK_THROWS_AS(kernel_property_report(o, 1.0, KernelGrid(40.0, 401)), ResolutionError);
}

TEST_CASE("heat kernel peaks at the origin") {
  const KernelGrid g(10.0, 1001);
  const auto ev = eval_kernel(FractionalOrder(1.0), 1.0, g);
  CHECK(argmax_positive(ev) == *g.center_index());
}

TEST_CASE("c_alpha across alpha") {
  const double c15 = estimate_c_alpha(FractionalOrder(1.5));
  const double c19 = estimate_c_alpha(FractionalOrder(1.9));
  CHECK(c15 > 0.0);
  CHECK(c19 > 0.0);
  MESSAGE("c_1.5 = " << c15 << ", c_1.9 = " << c19);
}

namespace {

KernelGrid tail_grid(const FractionalOrder& o) {
  double L = 1.0;
  while (kernel_point(o, 1.0, L).log_value > -30.0) L *= 1.1;
  return KernelGrid(L, 801);
}

}  // namespace

TEST_CASE("tail fit") {
  SUBCASE("alpha 1 recovers the Gaussian constants") {
    const FractionalOrder o(1.0);
    const auto tail = fit_tail_constants(eval_reduced_kernel(o, tail_grid(o)));
    CHECK(tail.power() == 0.0);
    CHECK(tail.exponent() == 2.0);
    CHECK(tail.A == doctest::Approx(0.25).epsilon(0.02));
    CHECK(tail.B == doctest::Approx(1.0 / (2.0 * std::sqrt(pi))).epsilon(0.02));
  }
  SUBCASE("alpha 1.5") {
    const FractionalOrder o(1.5);
    const KernelGrid g = tail_grid(o);
    const auto tail = fit_tail_constants(eval_reduced_kernel(o, g));
    CHECK(tail.residual < 0.1);
    CHECK(tail.A > 0.0);
    CHECK(tail.B > 0.0);
    const double L = g.half_width();
    const double ratio = std::exp(kernel_point(o, 1.0, L).log_value - tail.log_model(L));
    CHECK(ratio >= 0.9);
    CHECK(ratio <= 1.1);
    CHECK(tail.tail_mass(5.0) >= 0.0);
  }
  SUBCASE("short grid is rejected") {
    const FractionalOrder o(1.5);
    CHECK_THROWS_AS(fit_tail_constants(eval_reduced_kernel(o, KernelGrid(2.0, 201))), AsymptoteError);
  }
}

TEST_CASE("deterministic solve") {
  const KernelGrid g(40.0, 4001);
  auto gauss = [](double x, double var) { return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * pi * var); };
  std::vector<double> g0(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) g0[i] = gauss(g.node(i), 1.0);

  SUBCASE("alpha 2 is d'Alembert") {
    const double t = 50 * g.spacing();
    const auto u = solve_deterministic(FractionalOrder(2.0), g0, t, g);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g.node(i);
      err = std::max(err, std::abs(u[i] - 0.5 * (gauss(x - t, 1.0) + gauss(x + t, 1.0))));
    }
    CHECK(err <= 1e-10);
    // Off-grid shifts interpolate linearly between the neighbouring nodes.
    const double t2 = 10.25 * g.spacing();
    const auto u2 = solve_deterministic(FractionalOrder(2.0), g0, t2, g);
    const std::size_t i = 2000;
    const double lin = 0.5 * (0.75 * g0[i + 10] + 0.25 * g0[i + 11] + 0.75 * g0[i - 10] + 0.25 * g0[i - 11]);
    CHECK(u2[i] == doctest::Approx(lin).epsilon(1e-13));
  }
  SUBCASE("alpha 1 widens a Gaussian") {
    const auto u = solve_deterministic(FractionalOrder(1.0), g0, 1.0, g);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) err = std::max(err, std::abs(u[i] - gauss(g.node(i), 3.0)));
    CHECK(err < 1e-5);
  }
  SUBCASE("constants are preserved") {
    const std::vector<double> ones(g.size(), 1.0);
    for (double a : {1.0, 1.3, 1.5, 1.9, 2.0}) {
      const auto u = solve_deterministic(FractionalOrder(a), ones, 1.0, g);
      for (double v : u) CHECK(std::abs(v - 1.0) < 1e-6);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(solve_deterministic(FractionalOrder(1.5), g0, -1.0, g), DomainError);
    auto bad = g0;
    bad[7] = std::nan("");
    CHECK_THROWS_AS(solve_deterministic(FractionalOrder(1.5), bad, 1.0, g), InputError);
  }
}

TEST_CASE("cell-averaged lag weights") {
  const FractionalOrder o(1.5);
  const auto w = lag_weights(o, 1.0, 0.02, 2000);
  CHECK(w.mass() == doctest::Approx(1.0).epsilon(1e-10));
  const auto wr = lag_weights(o, 1.0, 0.02, 2000, KernelNormalization::kFundamental, 3.0);
  CHECK(wr.mass() == doctest::Approx(kernel_mass_within(o, 1.0, 3.0)).epsilon(1e-12));
  for (long d = 151; d <= 2000; ++d) CHECK(wr.at(d) == 0.0);
  const auto wl = lag_weights(o, 1.0, 0.02, 2000, KernelNormalization::kLiteral);
  CHECK(wl.mass() == doctest::Approx(1.5).epsilon(1e-10));
}
