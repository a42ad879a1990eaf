#include "fracconv/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

#include "fracconv/errors.hpp"

namespace fracconv {

namespace {
// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct RealFft::Impl {
  double* real = nullptr;
  fftw_complex* spectrum = nullptr;
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (r2c) fftw_destroy_plan(r2c);
    if (c2r) fftw_destroy_plan(c2r);
    fftw_free(real);
    fftw_free(spectrum);
  }
};

RealFft::RealFft(std::size_t n) : n_(n), impl_(std::make_unique<Impl>()) {
  if (n == 0) throw DomainError("RealFft: length must be positive");
  std::lock_guard lock(planner_mutex());
  impl_->real = fftw_alloc_real(n);
  impl_->spectrum = fftw_alloc_complex(n / 2 + 1);
  const int len = static_cast<int>(n);
  impl_->r2c = fftw_plan_dft_r2c_1d(len, impl_->real, impl_->spectrum, FFTW_ESTIMATE);
  impl_->c2r = fftw_plan_dft_c2r_1d(len, impl_->spectrum, impl_->real, FFTW_ESTIMATE);
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
  if (in.size() != n_ || out.size() != spectrum_size()) throw InputError("RealFft::forward: size mismatch");
  std::copy(in.begin(), in.end(), impl_->real);
  fftw_execute(impl_->r2c);
  const auto* s = reinterpret_cast<const std::complex<double>*>(impl_->spectrum);
  std::copy(s, s + spectrum_size(), out.begin());
}

void RealFft::backward(std::span<const std::complex<double>> in, std::span<double> out) {
  if (in.size() != spectrum_size() || out.size() != n_) throw InputError("RealFft::backward: size mismatch");
  auto* s = reinterpret_cast<std::complex<double>*>(impl_->spectrum);
  std::copy(in.begin(), in.end(), s);
  fftw_execute(impl_->c2r);  // destroys the input buffer, which is ours
  std::copy(impl_->real, impl_->real + n_, out.begin());
}

std::size_t good_fft_size(std::size_t n) {
  for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

}  // namespace fracconv
