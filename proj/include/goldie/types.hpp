#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace goldie {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

template <class S>
using VectorT = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Violation of a mathematical domain restriction: carrier membership,
/// branch domain, an inverse that does not exist.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Mismatched dimensions between vectors, functionals and groups.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A descriptor that fails its construction-time validation gate.
struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace tol {
inline constexpr double carrier = 1e-12;   // strict-positivity margin for 1 + rho(x)
inline constexpr double residual = 1e-9;   // default pass bound for identity residuals
inline constexpr double gate = 1e-8;       // construction / verification gate
inline constexpr double rank = 1e-10;      // relative SVD rank threshold
inline constexpr double branch = 1e-8;     // scalar branch-selection window
inline constexpr double root = 1e-8;       // root-location tolerance
inline constexpr double classify = 1e-5;   // derivative-based case separation
inline constexpr double fd = 1e-6;         // finite-difference agreement
inline constexpr double horner = 1e-4;     // |x - 1| window for the Horner path
}  // namespace tol

/// Base step for central finite differences.
inline constexpr double kFdStep = 1e-3;

/// Real linear functional x -> <coeffs, x> on R^d.
struct LinearFunctional {
  Vector coeffs;

  LinearFunctional() = default;
  explicit LinearFunctional(Vector c) : coeffs(std::move(c)) {}

  static LinearFunctional zero(Eigen::Index d) {
    return LinearFunctional{Vector::Zero(d)};
  }

  Eigen::Index dim() const { return coeffs.size(); }

  double operator()(const Vector& x) const {
    if (x.size() != coeffs.size())
      throw DimensionError("LinearFunctional: argument dimension mismatch");
    return coeffs.dot(x);
  }

  bool is_zero(double eps = tol::residual) const {
    return coeffs.size() == 0 || coeffs.lpNorm<Eigen::Infinity>() <= eps;
  }
};

/// Residual scaled as |r| / (1 + |scale|), with scale the magnitude of the
/// larger side of the identity being checked.
inline double rel_residual(double r, double scale) {
  return std::abs(r) / (1.0 + std::abs(scale));
}

inline double rel_residual(const Vector& r, const Vector& scale) {
  return r.lpNorm<Eigen::Infinity>() / (1.0 + scale.lpNorm<Eigen::Infinity>());
}

inline double rel_residual(const Vector& r, double scale) {
  return r.lpNorm<Eigen::Infinity>() / (1.0 + std::abs(scale));
}

/// Deterministic uniform sampler. The 64-bit engine and the explicit
/// bits-to-double mapping keep streams reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) {
    const double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  Vector vector(Eigen::Index d, double lo, double hi) {
    Vector x(d);
    for (Eigen::Index i = 0; i < d; ++i) x[i] = uniform(lo, hi);
    return x;
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

/// Accumulates a batch of residuals and summarizes max / mean / p99.
class ResidualStats {
 public:
  void add(double r) { values_.push_back(r); }

  std::size_t count() const { return values_.size(); }

  double max() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, v);
    return m;
  }

  double mean() const {
    if (values_.empty()) return 0.0;
    double s = 0.0;
    for (double v : values_) s += v;
    return s / static_cast<double>(values_.size());
  }

  double p99() const {
    if (values_.empty()) return 0.0;
    std::vector<double> sorted = values_;
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    const auto idx = std::min(n - 1, static_cast<std::size_t>(
                                         std::ceil(0.99 * static_cast<double>(n))) -
                                         (n > 1 ? 1 : 0));
    return sorted[idx];
  }

  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

}  // namespace goldie
