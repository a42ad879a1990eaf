#include "fracconv/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fracconv/errors.hpp"
#include "fracconv/parallel.hpp"
#include "fracconv/quadrature.hpp"

namespace fracconv {

namespace {

constexpr double kPi = std::numbers::pi;
using cplx = std::complex<double>;

double interpolate_table(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (xs.empty() || x > xs.back()) return 0.0;
  if (x <= xs.front()) return ys.front();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - xs.begin());
  const double f = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
  return (1.0 - f) * ys[i - 1] + f * ys[i];
}

// 2 int_a^b density(xi) g(xi) d xi with the density's kinks as breakpoints.
template <class G>
double density_integral(const DensitySpec& d, double a, double b, G&& g, const QuadratureOptions& opt) {
  if (d.kind == DensityKind::kZero || !(b > a)) return 0.0;
  std::vector<double> bp{a};
  for (double p : d.breakpoints())
    if (p > a && p < b) bp.push_back(p);
  bp.push_back(b);
  auto f = [&](double xi) { return d(xi) * g(xi); };
  const auto res = integrate(f, std::span<const double>(bp), opt);
  return 2.0 * res.value;
}

}  // namespace

double DensitySpec::operator()(double xi) const {
  const double a = std::abs(xi);
  switch (kind) {
    case DensityKind::kZero:
      return 0.0;
    case DensityKind::kConstant:
      return value;
    case DensityKind::kGaussian:
      return mass * std::exp(-0.5 * a * a / (sigma * sigma)) / (sigma * std::sqrt(2.0 * kPi));
    case DensityKind::kRational:
      return scale * std::pow(1.0 + a * a, power);
    case DensityKind::kBox:
      return a <= half_width ? value : 0.0;
    case DensityKind::kTable:
      return interpolate_table(table_xi, table_values, a);
  }
  return 0.0;
}

std::vector<double> DensitySpec::breakpoints() const {
  if (kind == DensityKind::kBox) return {half_width};
  if (kind == DensityKind::kTable) {
    std::vector<double> out;
    for (double x : table_xi)
      if (x > 0.0) out.push_back(x);
    return out;
  }
  return {};
}

void SpectralMeasure::validate() const {
  const DensitySpec& d = density;
  auto bad = [](const std::string& m) { throw InputError("spectral measure: " + m); };
  switch (d.kind) {
    case DensityKind::kZero:
      break;
    case DensityKind::kConstant:
      if (!(d.value >= 0.0) || !std::isfinite(d.value)) bad("constant density must be finite and >= 0");
      break;
    case DensityKind::kGaussian:
      if (!(d.mass >= 0.0) || !(d.sigma > 0.0)) bad("gaussian density needs mass >= 0 and sigma > 0");
      break;
    case DensityKind::kRational:
      if (!(d.scale >= 0.0) || !std::isfinite(d.power)) bad("rational density needs scale >= 0");
      break;
    case DensityKind::kBox:
      if (!(d.value >= 0.0) || !(d.half_width > 0.0)) bad("box density needs value >= 0 and half_width > 0");
      break;
    case DensityKind::kTable:
      if (d.table_xi.size() != d.table_values.size() || d.table_xi.empty()) bad("table density needs matching xi/values");
      for (std::size_t i = 0; i < d.table_xi.size(); ++i) {
        if (d.table_xi[i] < 0.0 || (i > 0 && !(d.table_xi[i] > d.table_xi[i - 1]))) bad("table xi must increase from >= 0");
        if (!(d.table_values[i] >= 0.0)) bad("negative density value in table");
      }
      break;
  }
  for (const Atom& a : atoms) {
    if (!(a.mass > 0.0) || !std::isfinite(a.mass)) bad("atom masses must be positive");
    if (!std::isfinite(a.location)) bad("atom locations must be finite");
    if (a.location == 0.0) continue;
    const auto partner = std::find_if(atoms.begin(), atoms.end(), [&](const Atom& b) {
      return std::abs(b.location + a.location) <= 1e-12 * std::abs(a.location) &&
             std::abs(b.mass - a.mass) <= 1e-12 * a.mass;
    });
    if (partner == atoms.end()) bad("atom at " + std::to_string(a.location) + " has no mirror atom of equal mass");
  }
}

SpectralMeasure SpectralMeasure::scaled(double c) const {
  if (!(c >= 0.0)) throw DomainError("measure scale factor must be nonnegative");
  SpectralMeasure out = *this;
  out.density.value *= c;
  out.density.mass *= c;
  out.density.scale *= c;
  for (double& v : out.density.table_values) v *= c;
  for (Atom& a : out.atoms) a.mass *= c;
  if (c == 0.0) {
    out.density.kind = DensityKind::kZero;
    out.atoms.clear();
  }
  return out;
}

SpectralMeasure lebesgue_measure() {
  SpectralMeasure mu;
  mu.density.kind = DensityKind::kConstant;
  mu.density.value = 1.0;
  return mu;
}

SpectralMeasure unit_atom_at_zero() {
  SpectralMeasure mu;
  mu.atoms = {{0.0, 1.0}};
  return mu;
}

SpectralMeasure gaussian_measure(double mass, double sigma) {
  SpectralMeasure mu;
  mu.density.kind = DensityKind::kGaussian;
  mu.density.mass = mass;
  mu.density.sigma = sigma;
  return mu;
}

SpectralMeasure cosine_measure(double frequency, double total_mass) {
  SpectralMeasure mu;
  mu.atoms = {{frequency, 0.5 * total_mass}, {-frequency, 0.5 * total_mass}};
  return mu;
}

// ---------------------------------------------------------------------------

double DiscreteSpectralMeasure::total_mass() const {
  double s = weights.empty() ? 0.0 : weights[0];
  for (std::size_t k = 1; k < weights.size(); ++k) s += 2.0 * weights[k];
  s += zero_atom;
  for (const Atom& a : atom_pairs) s += 2.0 * a.mass;
  return s;
}

double DiscreteSpectralMeasure::correlation(double x) const {
  double s = weights.empty() ? 0.0 : weights[0];
  for (std::size_t k = 1; k < weights.size(); ++k) s += 2.0 * weights[k] * std::cos(frequency(k) * x);
  s += zero_atom;
  for (const Atom& a : atom_pairs) s += 2.0 * a.mass * std::cos(a.location * x);
  return s;
}

DiscreteSpectralMeasure discretize(const SpectralMeasure& mu, const KernelGrid& grid) {
  mu.validate();
  DiscreteSpectralMeasure d;
  d.n = grid.size();
  d.spacing = grid.spacing();
  d.dxi = 2.0 * kPi / (static_cast<double>(d.n) * d.spacing);
  d.k_max = (d.n - 1) / 2;
  d.weights.assign(d.k_max + 1, 0.0);
  for (std::size_t k = 0; k <= d.k_max; ++k) {
    const double xi = d.frequency(k);
    if (mu.density.kind == DensityKind::kBox) {
      const double lo = std::max(0.0, xi - 0.5 * d.dxi), hi = xi + 0.5 * d.dxi;
      const double overlap = std::max(0.0, std::min(hi, mu.density.half_width) - lo);
      // bin 0 is symmetric about 0 and is counted once
      d.weights[k] = mu.density.value * (k == 0 ? 2.0 * overlap : overlap);
    } else {
      d.weights[k] = mu.density(xi) * d.dxi;
    }
  }
  for (const Atom& a : mu.atoms) {
    if (a.location == 0.0)
      d.zero_atom += a.mass;
    else if (a.location > 0.0)
      d.atom_pairs.push_back(a);
  }
  return d;
}

// ---------------------------------------------------------------------------

Condition17Report check_condition_17(const SpectralMeasure& mu) {
  mu.validate();
  Condition17Report rep;
  QuadratureOptions opt;
  opt.abs_tol = 1e-300;
  opt.rel_tol = 1e-12;
  auto weight = [](double xi) { return 1.0 / (1.0 + xi * xi); };

  double atoms = 0.0;
  for (const Atom& a : mu.atoms) atoms += a.mass / (1.0 + a.location * a.location);

  double partial = 0.0, prev_shell = 0.0, prev_extrap = 0.0;
  int growing = 0;
  bool converged = false;
  double extrap = 0.0;
  constexpr int kMaxShells = 400;
  for (int m = 0; m < kMaxShells; ++m) {
    const double lo = m == 0 ? 0.0 : std::ldexp(1.0, m - 1);
    const double hi = std::ldexp(1.0, m);
    const double shell = density_integral(mu.density, lo, hi, weight, opt);
    partial += shell;
    rep.shells = m + 1;
    rep.last_relative_change = partial > 0.0 ? shell / partial : 0.0;
    if (!std::isfinite(partial)) break;
    const double ratio = prev_shell > 0.0 ? shell / prev_shell : 0.0;
    growing = ratio >= 0.99 ? growing + 1 : 0;
    extrap = ratio < 0.99 ? partial + shell * ratio / (1.0 - ratio) : partial;
    if (m >= 3 && ratio < 0.99 && std::abs(extrap - prev_extrap) <= 1e-10 * std::abs(extrap)) {
      converged = true;
      break;
    }
    if (growing >= 8) break;
    prev_shell = shell;
    prev_extrap = extrap;
  }
  rep.holds = converged && rep.last_relative_change < 0.01;
  rep.value = (rep.holds ? extrap : partial) + atoms;
  return rep;
}

namespace {

// min over x in [0, 10] of int exp(i x y) exp(-y^2/N) mu(dy), with its value at 0.
std::pair<double, double> mollified_minimum(const SpectralMeasure& mu, double N) {
  const DensitySpec& d = mu.density;
  auto envelope = [&](double y) { return d(y) * std::exp(-y * y / N); };
  double cutoff = std::sqrt(46.0 * N);
  const double ref = std::max(1e-300, std::max(envelope(0.0), envelope(1.0)));
  for (int i = 0; i < 60 && envelope(cutoff) > 1e-20 * ref; ++i) cutoff *= 1.25;
  std::vector<double> edges{0.0};
  for (double p : d.breakpoints())
    if (p < cutoff) edges.push_back(p);
  const double width = 0.1;
  std::sort(edges.begin(), edges.end());
  std::vector<double> panels{0.0};
  for (std::size_t e = 1; e <= edges.size(); ++e) {
    const double target = e < edges.size() ? edges[e] : cutoff;
    const double start = panels.back();
    const int count = std::max(1, static_cast<int>(std::ceil((target - start) / width)));
    for (int i = 1; i <= count; ++i) panels.push_back(start + (target - start) * i / count);
  }
  const auto rule = composite_rule(panels, 12);
  std::vector<double> w(rule.nodes.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = 2.0 * rule.weights[k] * envelope(rule.nodes[k]);
  constexpr int kPoints = 1001;
  std::vector<double> values(kPoints);
  parallel_for(kPoints, [&](std::size_t i) {
    const double x = 10.0 * static_cast<double>(i) / (kPoints - 1);
    double s = 0.0;
    if (d.kind != DensityKind::kZero)
      for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * std::cos(x * rule.nodes[k]);
    for (const Atom& a : mu.atoms) s += a.mass * std::exp(-a.location * a.location / N) * std::cos(a.location * x);
    values[i] = s;
  });
  return {*std::min_element(values.begin(), values.end()), values[0]};
}

}  // namespace

HypothesisHReport check_hypothesis_H(const SpectralMeasure& mu) {
  HypothesisHReport rep;
  rep.integrability_holds = check_condition_17(mu).holds;
  rep.probe_holds = true;
  double kappa_needed = 0.0;
  for (double N : {1.0, 4.0, 16.0, 64.0}) {
    const auto [minimum, at_zero] = mollified_minimum(mu, N);
    bool found = false;
    for (double kappa : {0.0, 1.0, 10.0}) {
      if (minimum + kappa >= -1e-9 * std::max(1.0, std::abs(at_zero) + kappa)) {
        kappa_needed = std::max(kappa_needed, kappa);
        found = true;
        break;
      }
    }
    if (!found) rep.probe_holds = false;
  }
  rep.holds = rep.integrability_holds;
  rep.kappa = rep.probe_holds ? kappa_needed : 0.0;
  rep.method = rep.integrability_holds == rep.probe_holds ? "integrability" : "numerical-inconclusive";
  return rep;
}

SpaceCorrelation covariance_from_spectral(const SpectralMeasure& mu, const KernelGrid& grid) {
  const auto d = discretize(mu, grid);
  SpaceCorrelation c;
  c.x = grid.nodes();
  c.values.resize(c.x.size());
  parallel_for(c.x.size(), [&](std::size_t i) { c.values[i] = d.correlation(c.x[i]); });
  return c;
}

// ---------------------------------------------------------------------------

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(base_seed) ^ index);
}

FieldSampler::FieldSampler(const SpectralMeasure& mu, const KernelGrid& grid) : FieldSampler(discretize(mu, grid)) {}

FieldSampler::FieldSampler(DiscreteSpectralMeasure discrete)
    : dmu_(std::move(discrete)), fft_(dmu_.n), spectrum_(fft_.spectrum_size()), node_x_(dmu_.n) {
  // Nodes of the symmetric grid with this size and spacing.
  const double half = 0.5 * dmu_.spacing * static_cast<double>(dmu_.n - 1);
  for (std::size_t i = 0; i < dmu_.n; ++i) node_x_[i] = -half + dmu_.spacing * static_cast<double>(i);
}

void FieldSampler::sample(double dt, std::mt19937_64& rng, std::span<double> out) {
  if (!(dt > 0.0)) throw DomainError("sample: dt must be positive");
  if (out.size() != dmu_.n) throw InputError("sample: output size does not match the grid");
  std::normal_distribution<double> normal;
  // Frequencies of zero weight draw nothing, so atom-only measures skip the transform.
  std::fill(spectrum_.begin(), spectrum_.end(), cplx(0.0));
  bool any = false;
  if (dmu_.weights[0] > 0.0) {
    spectrum_[0] = std::sqrt(dt * dmu_.weights[0]) * normal(rng);
    any = true;
  }
  for (std::size_t k = 1; k <= dmu_.k_max; ++k) {
    if (!(dmu_.weights[k] > 0.0)) continue;
    const double a = normal(rng), b = normal(rng);
    spectrum_[k] = std::sqrt(0.5 * dt * dmu_.weights[k]) * cplx(a, b);
    any = true;
  }
  if (any)
    fft_.backward(spectrum_, out);
  else
    std::fill(out.begin(), out.end(), 0.0);
  if (dmu_.zero_atom > 0.0) {
    const double z = std::sqrt(dt * dmu_.zero_atom) * normal(rng);
    for (double& v : out) v += z;
  }
  for (const Atom& atom : dmu_.atom_pairs) {
    const double s = std::sqrt(2.0 * atom.mass * dt);
    const double a = s * normal(rng), b = s * normal(rng);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] += a * std::cos(atom.location * node_x_[i]) + b * std::sin(atom.location * node_x_[i]);
  }
}

std::vector<double> FieldSampler::sample(double dt, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> out(dmu_.n);
  sample(dt, rng, out);
  return out;
}

namespace {
void require_condition_17(const SpectralMeasure& mu) {
  const auto c17 = check_condition_17(mu);
  if (!c17.holds)
    throw ConvergenceError("spectral measure: int mu(dxi)/(1+xi^2) diverges (partial sum " +
                           std::to_string(c17.value) + ")");
}
}  // namespace

std::vector<double> sample_wiener_increment(const SpectralMeasure& mu, const KernelGrid& grid, double dt,
                                            std::uint64_t seed) {
  require_condition_17(mu);
  FieldSampler sampler(mu, grid);
  return sampler.sample(dt, seed);
}

FieldSample sample_wiener_field(const SpectralMeasure& mu, const KernelGrid& grid, double dt, std::size_t count,
                                std::uint64_t seed) {
  require_condition_17(mu);
  if (!(dt > 0.0)) throw DomainError("sample_wiener_field: dt must be positive");
  const auto dmu = discretize(mu, grid);
  FieldSample fs;
  fs.rows = count;
  fs.columns = grid.size();
  fs.dt = dt;
  fs.seed = seed;
  fs.increments.resize(count * fs.columns);
  const std::size_t chunks = std::min<std::size_t>(count, 4 * thread_count());
  parallel_for(chunks, [&](std::size_t c) {
    FieldSampler sampler(dmu);
    for (std::size_t r = c; r < count; r += chunks) {
      std::mt19937_64 rng(derive_seed(seed, r));
      sampler.sample(dt, rng, std::span<double>(fs.increments.data() + r * fs.columns, fs.columns));
    }
  });
  return fs;
}

CovarianceEstimate estimate_covariance(const FieldSample& samples, std::span<const std::size_t> lags) {
  const std::size_t m = samples.rows, n = samples.columns;
  if (m < 2) throw StatisticsError("estimate_covariance: need at least 2 samples");
  std::vector<double> mean(n, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t i = 0; i < n; ++i) mean[i] += samples.row(r)[i];
  for (double& v : mean) v /= static_cast<double>(m);
  CovarianceEstimate est;
  est.lags.assign(lags.begin(), lags.end());
  for (std::size_t lag : lags) {
    if (lag > n / 4) throw InputError("estimate_covariance: lag " + std::to_string(lag) + " exceeds n/4");
    // Per-sample spatial averages are iid across samples; their spread gives the standard error.
    std::vector<double> per(m);
    for (std::size_t r = 0; r < m; ++r) {
      const auto x = samples.row(r);
      double s = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean[i]) * (x[i + lag] - mean[i + lag]);
      per[r] = s / static_cast<double>(n - lag) * static_cast<double>(m) / static_cast<double>(m - 1);
    }
    const double g = pairwise_sum(per) / static_cast<double>(m);
    double var = 0.0;
    for (double p : per) var += (p - g) * (p - g);
    var /= static_cast<double>(m - 1);
    est.gamma_hat.push_back(g);
    est.stderr_.push_back(std::sqrt(var / static_cast<double>(m)));
  }
  return est;
}

// ---------------------------------------------------------------------------

namespace {

void check_shape(const RkhsElement& e, const DiscreteSpectralMeasure& mu) {
  if (e.density.size() != 2 * mu.k_max + 1 || e.pairs.size() != mu.atom_pairs.size())
    throw InputError("RKHS element does not match the measure's support");
}

void check_hermitian(const RkhsElement& e, const DiscreteSpectralMeasure& mu) {
  auto close = [](cplx a, cplx b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); };
  const std::size_t K = mu.k_max;
  for (std::size_t k = 0; k <= K; ++k)
    if (!close(e.density[K + k], std::conj(e.density[K - k])))
      throw InputError("RKHS element is not hermitian at frequency index " + std::to_string(k));
  if (std::abs(e.zero_atom.imag()) > 1e-12 * std::max(1.0, std::abs(e.zero_atom)))
    throw InputError("RKHS element must be real at the atom at 0");
  for (const auto& p : e.pairs)
    if (!close(p[0], std::conj(p[1]))) throw InputError("RKHS element is not hermitian on an atom pair");
}

RkhsElement empty_element(const DiscreteSpectralMeasure& mu) {
  RkhsElement e;
  e.density.assign(2 * mu.k_max + 1, 0.0);
  e.pairs.assign(mu.atom_pairs.size(), {cplx(0.0), cplx(0.0)});
  return e;
}

struct BasisSlot {
  double frequency;
  int order;  // 0 density, 1 atom
  bool atom;
  std::size_t index;
};

std::vector<BasisSlot> basis_slots(const DiscreteSpectralMeasure& mu) {
  std::vector<BasisSlot> slots;
  for (std::size_t k = 0; k <= mu.k_max; ++k)
    if (mu.weights[k] > 0.0) slots.push_back({mu.frequency(k), 0, false, k});
  if (mu.zero_atom > 0.0) slots.push_back({0.0, 1, true, std::size_t(-1)});
  for (std::size_t j = 0; j < mu.atom_pairs.size(); ++j) slots.push_back({mu.atom_pairs[j].location, 1, true, j});
  std::stable_sort(slots.begin(), slots.end(), [](const BasisSlot& a, const BasisSlot& b) {
    return a.frequency < b.frequency || (a.frequency == b.frequency && a.order < b.order);
  });
  return slots;
}

}  // namespace

std::complex<double> rkhs_inner(const RkhsElement& a, const RkhsElement& b, const DiscreteSpectralMeasure& mu) {
  check_shape(a, mu);
  check_shape(b, mu);
  const std::size_t K = mu.k_max;
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.density.size(); ++i) {
    const std::size_t k = i >= K ? i - K : K - i;
    s += a.density[i] * std::conj(b.density[i]) * mu.weights[k];
  }
  s += a.zero_atom * std::conj(b.zero_atom) * mu.zero_atom;
  for (std::size_t j = 0; j < a.pairs.size(); ++j)
    s += (a.pairs[j][0] * std::conj(b.pairs[j][0]) + a.pairs[j][1] * std::conj(b.pairs[j][1])) * mu.atom_pairs[j].mass;
  return s;
}

double rkhs_norm(const RkhsElement& element, const DiscreteSpectralMeasure& mu) {
  check_shape(element, mu);
  check_hermitian(element, mu);
  return std::sqrt(std::max(0.0, rkhs_inner(element, element, mu).real()));
}

std::size_t rkhs_dimension(const DiscreteSpectralMeasure& mu) {
  std::size_t count = 0;
  for (const auto& s : basis_slots(mu)) count += s.frequency == 0.0 ? 1 : 2;
  return count;
}

std::vector<RkhsElement> rkhs_basis(const DiscreteSpectralMeasure& mu, std::size_t n) {
  const std::size_t available = rkhs_dimension(mu);
  if (n > available)
    throw BasisError("rkhs_basis: requested " + std::to_string(n) + " elements but the measure supports only " +
                     std::to_string(available));
  const std::size_t K = mu.k_max;
  std::vector<RkhsElement> basis;
  basis.reserve(n);
  for (const auto& slot : basis_slots(mu)) {
    if (basis.size() >= n) break;
    if (slot.frequency == 0.0) {
      RkhsElement e = empty_element(mu);
      if (slot.atom)
        e.zero_atom = 1.0 / std::sqrt(mu.zero_atom);
      else
        e.density[K] = 1.0 / std::sqrt(mu.weights[0]);
      basis.push_back(std::move(e));
      continue;
    }
    const double w = slot.atom ? mu.atom_pairs[slot.index].mass : mu.weights[slot.index];
    const double c = 1.0 / std::sqrt(2.0 * w);
    // cos element: u = c at +-xi; sin element: u = -i c at +xi, +i c at -xi.
    for (int kind = 0; kind < 2 && basis.size() < n; ++kind) {
      RkhsElement e = empty_element(mu);
      const cplx plus = kind == 0 ? cplx(c, 0.0) : cplx(0.0, -c);
      if (slot.atom) {
        e.pairs[slot.index] = {plus, std::conj(plus)};
      } else {
        e.density[K + slot.index] = plus;
        e.density[K - slot.index] = std::conj(plus);
      }
      basis.push_back(std::move(e));
    }
  }
  return basis;
}

std::vector<double> rkhs_function(const RkhsElement& element, const DiscreteSpectralMeasure& mu,
                                  const KernelGrid& grid) {
  check_shape(element, mu);
  if (grid.size() != mu.n) throw InputError("rkhs_function: grid does not match the measure");
  const std::size_t K = mu.k_max;
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < element.density.size(); ++i)
    if (element.density[i] != cplx(0.0)) active.push_back(i);
  std::vector<double> out(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double x = grid.node(j);
    cplx s = element.zero_atom * mu.zero_atom;
    for (std::size_t i : active) {
      const double k = static_cast<double>(i) - static_cast<double>(K);
      const std::size_t ak = i >= K ? i - K : K - i;
      s += element.density[i] * mu.weights[ak] * std::polar(1.0, k * mu.dxi * x);
    }
    for (std::size_t p = 0; p < element.pairs.size(); ++p) {
      const double loc = mu.atom_pairs[p].location, m = mu.atom_pairs[p].mass;
      s += element.pairs[p][0] * m * std::polar(1.0, loc * x) + element.pairs[p][1] * m * std::polar(1.0, -loc * x);
    }
    out[j] = s.real();
  }
  return out;
}

}  // namespace fracconv
