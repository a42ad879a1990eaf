#pragma once

// Spatially homogeneous Wiener noise on the line.
//
// The noise is described by its spectral measure mu (a symmetric tempered measure), and the
// space correlation is Gamma(x) = int exp(+i x xi) mu(d xi). On a grid of n nodes with
// spacing h, mu is replaced by weights on the frequencies xi_k = 2 pi k / (n h),
// |k| <= (n-1)/2, plus the atoms of mu kept at their exact locations.

#include <array>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fracconv/fft.hpp"
#include "fracconv/kernel.hpp"

namespace fracconv {

enum class DensityKind { kZero, kConstant, kGaussian, kRational, kBox, kTable };

/// Even density of mu, given on xi >= 0.
///   constant  value
///   gaussian  mass * exp(-xi^2 / (2 sigma^2)) / (sigma sqrt(2 pi))
///   rational  scale * (1 + xi^2)^power
///   box       value on |xi| <= half_width
///   table     linear interpolation of (table_xi, table_values), 0 past the last knot
struct DensitySpec {
  DensityKind kind = DensityKind::kZero;
  double value = 0.0;
  double mass = 1.0;
  double sigma = 1.0;
  double scale = 1.0;
  double power = 0.0;
  double half_width = 0.0;
  std::vector<double> table_xi;
  std::vector<double> table_values;

  double operator()(double xi) const;
  /// Points where the density is not smooth (box edge, table knots), xi > 0.
  std::vector<double> breakpoints() const;
};

struct Atom {
  double location = 0.0;
  double mass = 0.0;
};

struct SpectralMeasure {
  DensitySpec density;
  std::vector<Atom> atoms;  ///< closed under negation, equal masses at +-xi

  /// Throws InputError when a density value is negative, a mass is not positive or the
  /// atom list is not symmetric.
  void validate() const;
  /// A copy with density and atom masses multiplied by c >= 0.
  SpectralMeasure scaled(double c) const;
};

SpectralMeasure lebesgue_measure();
SpectralMeasure unit_atom_at_zero();
SpectralMeasure gaussian_measure(double mass = 1.0, double sigma = 1.0);
SpectralMeasure cosine_measure(double frequency, double total_mass = 1.0);

/// The measure on the frequency grid of a spatial grid.
struct DiscreteSpectralMeasure {
  std::size_t n = 0;             ///< spatial nodes
  double spacing = 0.0;          ///< spatial spacing h
  double dxi = 0.0;              ///< 2 pi / (n h)
  std::size_t k_max = 0;         ///< (n-1)/2
  std::vector<double> weights;   ///< w_k for k = 0..k_max; -k carries the same weight
  double zero_atom = 0.0;        ///< mass of an atom at 0
  std::vector<Atom> atom_pairs;  ///< location > 0, mass of each member of the pair

  double frequency(std::size_t k) const { return dxi * static_cast<double>(k); }
  /// Gamma(0) = total mass of the discrete measure.
  double total_mass() const;
  /// Gamma(x) of the discrete measure.
  double correlation(double x) const;
};

/// Point samples w_k = density(xi_k) dxi; box densities use the exact overlap of each bin
/// with the box so that the total mass is preserved.
DiscreteSpectralMeasure discretize(const SpectralMeasure& mu, const KernelGrid& grid);

struct Condition17Report {
  double value = 0.0;        ///< int mu(dxi) / (1 + xi^2), extrapolated when convergent
  bool holds = false;
  double last_relative_change = 0.0;
  int shells = 0;
};

/// Integrates the density over dyadic shells [2^(m-1), 2^m] and extrapolates the geometric
/// tail; divergence is declared when successive shells stop shrinking.
Condition17Report check_condition_17(const SpectralMeasure& mu);

struct HypothesisHReport {
  bool holds = false;
  double kappa = 0.0;
  std::string method;        ///< "integrability" or "numerical-inconclusive"
  bool integrability_holds = false;
  bool probe_holds = false;  ///< mollified transform + kappa >= 0 for every probed N
};

/// Decided by int mu(dxi)/(1+xi^2) < inf, cross-checked by the probe: for N in {1, 4, 16, 64},
/// some kappa in {0, 1, 10} makes int exp(i x y) exp(-y^2/N) mu(dy) + kappa >= 0 on |x| <= 10.
HypothesisHReport check_hypothesis_H(const SpectralMeasure& mu);

/// Gamma on the grid nodes (a function of x_i, the nodes being symmetric about 0).
struct SpaceCorrelation {
  std::vector<double> x;
  std::vector<double> values;
  double kappa_shift = 0.0;
};

SpaceCorrelation covariance_from_spectral(const SpectralMeasure& mu, const KernelGrid& grid);

/// Stream seed for (base seed, index): splitmix64 applied to the pair.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index);

/// Draws Wiener increments of covariance dt * Gamma(x - y) by spectral synthesis. The field
/// is periodic with period n h. One sampler per thread.
class FieldSampler {
 public:
  FieldSampler(const SpectralMeasure& mu, const KernelGrid& grid);
  FieldSampler(DiscreteSpectralMeasure discrete);

  const DiscreteSpectralMeasure& measure() const noexcept { return dmu_; }
  /// Writes one increment into out (size n), consuming normals from rng.
  void sample(double dt, std::mt19937_64& rng, std::span<double> out);
  std::vector<double> sample(double dt, std::uint64_t seed);

 private:
  DiscreteSpectralMeasure dmu_;
  RealFft fft_;
  std::vector<std::complex<double>> spectrum_;
  std::vector<double> node_x_;
};

/// One increment of the Wiener field; refuses measures with int mu(dxi)/(1+xi^2) = inf.
std::vector<double> sample_wiener_increment(const SpectralMeasure& mu, const KernelGrid& grid, double dt,
                                            std::uint64_t seed);

/// rows x columns, row-major.
struct FieldSample {
  std::size_t rows = 0;
  std::size_t columns = 0;
  std::vector<double> increments;
  double dt = 0.0;
  std::uint64_t seed = 0;

  std::span<const double> row(std::size_t r) const { return {increments.data() + r * columns, columns}; }
};

/// `count` independent increments with per-row seeds derive_seed(seed, row).
FieldSample sample_wiener_field(const SpectralMeasure& mu, const KernelGrid& grid, double dt, std::size_t count,
                                std::uint64_t seed);

struct CovarianceEstimate {
  std::vector<std::size_t> lags;  ///< in grid spacings
  std::vector<double> gamma_hat;
  std::vector<double> stderr_;
};

/// Sample covariance at each lag, averaged over all node pairs at that lag inside the grid.
/// Lags must not exceed n/4.
CovarianceEstimate estimate_covariance(const FieldSample& samples, std::span<const std::size_t> lags);

/// Coefficients u on the discrete support of mu. density[k + k_max] holds u(xi_k) for
/// k = -k_max..k_max; zero_atom and pairs[j] = {u(+loc_j), u(-loc_j)} for the atoms.
struct RkhsElement {
  std::vector<std::complex<double>> density;
  std::complex<double> zero_atom = 0.0;
  std::vector<std::array<std::complex<double>, 2>> pairs;
};

/// L2(mu) norm; throws InputError unless u(-xi) = conj(u(xi)).
double rkhs_norm(const RkhsElement& element, const DiscreteSpectralMeasure& mu);
std::complex<double> rkhs_inner(const RkhsElement& a, const RkhsElement& b, const DiscreteSpectralMeasure& mu);

/// First n elements of the orthonormal basis, ordered by |xi| (density before atoms on ties):
/// a constant on each positively weighted point at 0, and a cos/sin pair on each +-xi pair.
std::vector<RkhsElement> rkhs_basis(const DiscreteSpectralMeasure& mu, std::size_t n);
/// Number of elements rkhs_basis can return.
std::size_t rkhs_dimension(const DiscreteSpectralMeasure& mu);

/// F(u mu) on the grid nodes, the element of H_W that u represents.
std::vector<double> rkhs_function(const RkhsElement& element, const DiscreteSpectralMeasure& mu,
                                  const KernelGrid& grid);

}  // namespace fracconv
