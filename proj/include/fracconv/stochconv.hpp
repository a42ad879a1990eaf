#pragma once

// Monte Carlo for the truncated stochastic convolution
//
//   I^R(t) = int_0^t P^R(t - s) * (b(u(s)) dW(s))
//
// with a left-point rule on the noise mesh s_j = t - t((n-j)/n)^2, j = 0..n. The smallest kernel
// lag is t/n^2, so the kernel is never evaluated at lag 0.

#include <cstdint>
#include <string>
#include <vector>

#include "fracconv/hsnorm.hpp"
#include "fracconv/kernel.hpp"
#include "fracconv/noise.hpp"

namespace fracconv {

enum class ProcessKind { kConstantOne, kDeterministicProfile, kFrozenSample };
enum class Coefficient { kIdentity, kOne, kLipschitzTable };

struct ProcessSpec {
  ProcessKind kind = ProcessKind::kConstantOne;
  std::vector<double> profile;  ///< u on the grid for the profile and frozen-sample kinds
  Coefficient b = Coefficient::kIdentity;
  std::vector<double> table_u;  ///< knots of a piecewise linear b, constant beyond the ends
  std::vector<double> table_b;
  double lipschitz = 0.0;       ///< recorded for kLipschitzTable, at least the largest slope
  double b_scale = 1.0;         ///< multiplies b

  void validate(const KernelGrid& grid) const;
  /// b(u(x)) on the grid.
  std::vector<double> integrand(const KernelGrid& grid) const;
};

struct ConvolutionSample {
  std::vector<double> field;  ///< empty unless requested
  double l2v_norm_sq = 0.0;
  double center_value = 0.0;  ///< I at the node closest to x = 0
  std::uint64_t seed = 0;
};

struct SimulationOptions {
  KernelNormalization normalization = KernelNormalization::kFundamental;
  bool keep_fields = false;
  WeightKind weight = WeightKind::kExponential;
  double weight_rho = 1.0;
};

struct SimulationResult {
  std::vector<ConvolutionSample> samples;
  std::vector<double> noise_times;  ///< s_0..s_n
  /// E|I|^2_{L2_v} of the discretized scheme: sum_j (s_{j+1} - s_j) |K_R(t - s_j, b(u))|^2_HS.
  double expected_discrete_moment = 0.0;
};

SimulationResult simulate_convolution(const FractionalOrder& order, double R, double t, const ProcessSpec& spec,
                                      const SpectralMeasure& mu, const KernelGrid& grid, int n_time_steps,
                                      std::size_t n_paths, std::uint64_t base_seed,
                                      const SimulationOptions& options = {});

struct MomentEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

MomentEstimate second_moment_estimate(const std::vector<ConvolutionSample>& samples);

struct IsometryReport {
  double mc_mean = 0.0;
  double mc_stderr = 0.0;
  double quadrature_value = 0.0;  ///< int_0^t |K_R(s, b(u))|^2_HS ds
  double z_score = 0.0;
  double expected_discrete_moment = 0.0;
  double discrete_z_score = 0.0;
  double quadrature_relative_change = 0.0;
};

IsometryReport ito_isometry_check(const FractionalOrder& order, double R, double t, const ProcessSpec& spec,
                                  const SpectralMeasure& mu, const KernelGrid& grid, int n_time_steps,
                                  std::size_t n_paths, std::uint64_t base_seed = 1,
                                  const SimulationOptions& options = {}, SimulationResult* simulation = nullptr);

struct SurrogateResult {
  double R_used = 0.0;
  StabilizationReport stabilization;
  SimulationResult simulation;
};

/// Picks R from hs_stabilization over R = 1, 2, ..., L at tolerance tol, then simulates.
SurrogateResult untruncated_surrogate(const FractionalOrder& order, double t, const ProcessSpec& spec,
                                      const SpectralMeasure& mu, const KernelGrid& grid, double tol,
                                      int n_time_steps, std::size_t n_paths, std::uint64_t base_seed,
                                      const SimulationOptions& options = {});

/// R chosen by untruncated_surrogate without running the simulation.
double select_truncation_radius(const FractionalOrder& order, double t, const ProcessSpec& spec,
                                const SpectralMeasure& mu, const KernelGrid& grid, double tol,
                                StabilizationReport* report = nullptr);

}  // namespace fracconv
