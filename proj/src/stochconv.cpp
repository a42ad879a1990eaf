#include "fracconv/stochconv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fracconv/errors.hpp"
#include "fracconv/fft.hpp"
#include "fracconv/parallel.hpp"

namespace fracconv {

namespace {

using cplx = std::complex<double>;

double table_lookup(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - xs.begin());
  const double f = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
  return (1.0 - f) * ys[i - 1] + f * ys[i];
}

WeightFunction make_weight(const SimulationOptions& o, const KernelGrid& grid) {
  return weight_eval(o.weight, grid, o.weight_rho);
}

}  // namespace

void ProcessSpec::validate(const KernelGrid& grid) const {
  if (kind != ProcessKind::kConstantOne) {
    if (profile.size() != grid.size()) throw InputError("process profile does not match the grid");
    for (double x : profile)
      if (!std::isfinite(x)) throw InputError("process profile contains non-finite values");
  }
  if (!std::isfinite(b_scale)) throw InputError("b_scale must be finite");
  if (b == Coefficient::kLipschitzTable) {
    if (table_u.size() < 2 || table_u.size() != table_b.size()) throw InputError("lipschitz table needs >= 2 matching knots");
    double slope = 0.0;
    for (std::size_t i = 1; i < table_u.size(); ++i) {
      if (!(table_u[i] > table_u[i - 1])) throw InputError("lipschitz table knots must increase");
      slope = std::max(slope, std::abs((table_b[i] - table_b[i - 1]) / (table_u[i] - table_u[i - 1])));
    }
    if (lipschitz < slope * (1.0 - 1e-12))
      throw InputError("recorded Lipschitz constant " + std::to_string(lipschitz) + " is below the table slope " +
                       std::to_string(slope));
  }
}

std::vector<double> ProcessSpec::integrand(const KernelGrid& grid) const {
  validate(grid);
  std::vector<double> u = kind == ProcessKind::kConstantOne ? std::vector<double>(grid.size(), 1.0) : profile;
  for (double& x : u) {
    switch (b) {
      case Coefficient::kIdentity:
        break;
      case Coefficient::kOne:
        x = 1.0;
        break;
      case Coefficient::kLipschitzTable:
        x = table_lookup(table_u, table_b, x);
        break;
    }
    x *= b_scale;
  }
  return u;
}

SimulationResult simulate_convolution(const FractionalOrder& order, double R, double t, const ProcessSpec& spec,
                                      const SpectralMeasure& mu, const KernelGrid& grid, int n_time_steps,
                                      std::size_t n_paths, std::uint64_t base_seed, const SimulationOptions& options) {
  if (!(t > 0.0)) throw DomainError("simulate_convolution: t must be positive");
  if (n_time_steps < 1) throw DomainError("simulate_convolution: need at least one time step");
  if (!check_condition_17(mu).holds) throw ConvergenceError("simulate_convolution: int mu(dxi)/(1+xi^2) diverges");
  const auto g = spec.integrand(grid);
  const auto dmu = discretize(mu, grid);
  const auto v = make_weight(options, grid);
  const std::size_t n = grid.size();
  const int steps = n_time_steps;

  SimulationResult result;
  result.noise_times.resize(steps + 1);
  for (int j = 0; j <= steps; ++j) {
    const double r = static_cast<double>(steps - j) / steps;
    result.noise_times[j] = t - t * r * r;
  }
  result.noise_times[steps] = t;

  std::vector<TruncatedKernel> kernels;
  kernels.reserve(steps);
  for (int j = 0; j < steps; ++j) {
    const double lag = t - result.noise_times[j];
    if (!(lag > 0.0)) throw ConfigError("simulate_convolution: kernel lag 0 on the noise mesh");
    kernels.push_back(truncate_kernel(order, lag, R, grid, options.normalization));
  }
  std::vector<double> moment_terms(steps);
  parallel_for(steps, [&](std::size_t j) {
    const double ds = result.noise_times[j + 1] - result.noise_times[j];
    moment_terms[j] = ds * hs_norm_sq(kernels[j], g, dmu, v).hs_sq;
  });
  result.expected_discrete_moment = pairwise_sum(moment_terms);

  // Linear convolution by zero padding; kernel spectra are shared across paths.
  const std::size_t D = kernels.front().weights.max_lag;
  const std::size_t m = good_fft_size(n + 2 * D);
  std::vector<std::vector<cplx>> kernel_spectra(steps);
  {
    RealFft fft(m);
    std::vector<double> w(m);
    for (int j = 0; j < steps; ++j) {
      std::fill(w.begin(), w.end(), 0.0);
      for (std::size_t d = 0; d <= 2 * D; ++d) w[d] = kernels[j].weights.weights[d];
      kernel_spectra[j].resize(fft.spectrum_size());
      fft.forward(w, kernel_spectra[j]);
    }
  }

  const auto trap = grid.trapezoid_weights();
  const std::size_t center = grid.center_index().value_or(n / 2);
  result.samples.resize(n_paths);
  const std::size_t chunks = std::min<std::size_t>(std::max<std::size_t>(n_paths, 1), 4 * thread_count());
  parallel_for(n_paths == 0 ? 0 : chunks, [&](std::size_t c) {
    FieldSampler sampler(dmu);
    RealFft fft(m);
    std::vector<double> dw(n), padded(m, 0.0), out(m);
    std::vector<cplx> spec_f(fft.spectrum_size()), acc(fft.spectrum_size());
    std::vector<double> terms(n);
    for (std::size_t p = c; p < n_paths; p += chunks) {
      ConvolutionSample& s = result.samples[p];
      s.seed = derive_seed(base_seed, p);
      std::mt19937_64 rng(s.seed);
      std::fill(acc.begin(), acc.end(), cplx(0.0));
      for (int j = 0; j < steps; ++j) {
        const double ds = result.noise_times[j + 1] - result.noise_times[j];
        sampler.sample(ds, rng, dw);
        for (std::size_t i = 0; i < n; ++i) padded[i] = g[i] * dw[i];
        fft.forward(padded, spec_f);
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += spec_f[k] * kernel_spectra[j][k];
      }
      fft.backward(acc, out);
      const double inv = 1.0 / static_cast<double>(m);
      for (std::size_t i = 0; i < n; ++i) {
        const double x = out[i + D] * inv;
        terms[i] = trap[i] * v.values[i] * x * x;
        if (options.keep_fields) s.field.push_back(x);
        if (i == center) s.center_value = x;
      }
      s.l2v_norm_sq = pairwise_sum(terms);
    }
  });
  return result;
}

MomentEstimate second_moment_estimate(const std::vector<ConvolutionSample>& samples) {
  if (samples.size() < 30) throw StatisticsError("second_moment_estimate: need at least 30 samples");
  std::vector<double> x(samples.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = samples[i].l2v_norm_sq;
  const double mean = pairwise_sum(x) / static_cast<double>(x.size());
  for (double& e : x) e = (e - mean) * (e - mean);
  const double var = pairwise_sum(x) / static_cast<double>(x.size() - 1);
  return {mean, std::sqrt(var / static_cast<double>(samples.size()))};
}

IsometryReport ito_isometry_check(const FractionalOrder& order, double R, double t, const ProcessSpec& spec,
                                  const SpectralMeasure& mu, const KernelGrid& grid, int n_time_steps,
                                  std::size_t n_paths, std::uint64_t base_seed, const SimulationOptions& options,
                                  SimulationResult* simulation) {
  auto sim = simulate_convolution(order, R, t, spec, mu, grid, n_time_steps, n_paths, base_seed, options);
  const auto mom = second_moment_estimate(sim.samples);
  const auto g = spec.integrand(grid);
  const auto v = make_weight(options, grid);
  const auto ti = time_integrated_hs(order, t, R, mu, v, grid, g);
  IsometryReport rep;
  rep.mc_mean = mom.mean;
  rep.mc_stderr = mom.stderr_;
  rep.quadrature_value = ti.value;
  rep.quadrature_relative_change = ti.relative_change;
  rep.expected_discrete_moment = sim.expected_discrete_moment;
  auto z = [&](double target) {
    if (rep.mc_stderr > 0.0) return (rep.mc_mean - target) / rep.mc_stderr;
    return rep.mc_mean == target ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), rep.mc_mean - target);
  };
  rep.z_score = z(rep.quadrature_value);
  rep.discrete_z_score = z(rep.expected_discrete_moment);
  if (simulation) *simulation = std::move(sim);
  return rep;
}

double select_truncation_radius(const FractionalOrder& order, double t, const ProcessSpec& spec,
                                const SpectralMeasure& mu, const KernelGrid& grid, double tol,
                                StabilizationReport* report) {
  std::vector<double> schedule;
  for (double R = 1.0; R <= grid.half_width() * (1.0 + 1e-12); R += 1.0) schedule.push_back(R);
  if (schedule.empty()) schedule.push_back(grid.half_width());
  const auto g = spec.integrand(grid);
  const auto v = weight_eval(WeightKind::kExponential, grid);
  auto rep = hs_stabilization(order, t, g, mu, v, grid, schedule, tol);
  const double R = rep.R_tilde;
  if (report) *report = std::move(rep);
  return R;
}

SurrogateResult untruncated_surrogate(const FractionalOrder& order, double t, const ProcessSpec& spec,
                                      const SpectralMeasure& mu, const KernelGrid& grid, double tol,
                                      int n_time_steps, std::size_t n_paths, std::uint64_t base_seed,
                                      const SimulationOptions& options) {
  SurrogateResult out;
  out.R_used = select_truncation_radius(order, t, spec, mu, grid, tol, &out.stabilization);
  out.simulation = simulate_convolution(order, out.R_used, t, spec, mu, grid, n_time_steps, n_paths, base_seed, options);
  return out;
}

}  // namespace fracconv
