#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace fracconv {

/// Real-input discrete Fourier transform of fixed length n backed by FFTW.
///
/// forward:  X[k] = sum_j x[j] exp(-2 pi i j k / n),  k = 0..n/2
/// backward: x[j] = sum_k X[k] exp(+2 pi i j k / n),  Hermitian completion, unnormalized
///
/// Instances own their buffers and plans; use one instance per thread.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const noexcept { return n_; }
  std::size_t spectrum_size() const noexcept { return n_ / 2 + 1; }

  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  void backward(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  struct Impl;
  std::size_t n_;
  std::unique_ptr<Impl> impl_;
};

/// Smallest m >= n whose only prime factors are 2, 3 and 5.
std::size_t good_fft_size(std::size_t n);

}  // namespace fracconv
