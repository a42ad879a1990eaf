#pragma once

#include <stdexcept>
#include <string>

namespace fracconv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (t <= 0, alpha > 2, R > L, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data: shape mismatches, non-finite samples, negative densities.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent numerical configuration (grid vs. frequency pairing, unknown keys, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An adaptive quadrature did not reach its tolerance.
class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double achieved_error)
      : Error(what + " (achieved error estimate " + std::to_string(achieved_error) + ")"),
        achieved_error_(achieved_error) {}
  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double achieved_error_;
};

/// The grid is too coarse to resolve the feature being located.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Too few samples for the requested statistic.
class StatisticsError : public Error {
 public:
  using Error::Error;
};

/// Tail fit could not be performed in the asymptotic regime.
class AsymptoteError : public Error {
 public:
  using Error::Error;
};

/// A spectral measure was refused (int mu(dxi)/(1+xi^2) = inf) or a series did not stabilize.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Requested more orthonormal basis elements than the discretized measure supports.
class BasisError : public Error {
 public:
  using Error::Error;
};

}  // namespace fracconv
