#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "goldie/types.hpp"

namespace goldie {

/// a^z - 1 without cancellation when a^z is near 1: expm1(z log a) for
/// positive a and moderate exponent, the direct form otherwise.
template <class S>
S powm1(S a, S z) {
  using std::abs;
  using std::expm1;
  using std::log;
  using std::pow;
  if (a > S(0)) {
    const S p = z * log(a);
    if (abs(p) < S(2)) return expm1(p);
    return pow(a, z) - S(1);
  }
  return pow(a, z) - S(1);
}

/// (1 + t)^e - 1, stable for small |t| or small |e|.
template <class S>
S pow1pm1(S t, S e) {
  using std::expm1;
  using std::log1p;
  if (!(t > S(-1))) throw DomainError("pow1pm1: requires 1 + t > 0");
  return expm1(e * log1p(t));
}

/// Geometric sum 1 + x + ... + x^{m-1}. Inside a window around x = 1 the
/// closed quotient cancels, so a Horner pass is used there; at x = 1 it
/// returns exactly m.
template <class S>
S geometric_sum(S x, int m) {
  using std::abs;
  using std::expm1;
  using std::log;
  using std::pow;
  if (m < 0) throw std::invalid_argument("geometric_sum: order must be nonnegative");
  if (m == 0) return S(0);
  if (abs(x - S(1)) <= S(tol::horner)) {
    S acc = S(1);
    for (int j = 1; j < m; ++j) acc = S(1) + x * acc;
    return acc;
  }
  if (x > S(0)) return expm1(S(m) * log(x)) / (x - S(1));
  return (pow(x, S(m)) - S(1)) / (x - S(1));
}

/// Central difference derivative of f at x, refined by two Richardson steps
/// over h, h/2, h/4; error O(h^6) for smooth f.
template <class F>
double richardson_derivative_at(F&& f, double x, double h = kFdStep) {
  const auto central = [&](double step) {
    return (f(x + step) - f(x - step)) / (2.0 * step);
  };
  const double d0 = central(h);
  const double d1 = central(h / 2.0);
  const double d2 = central(h / 4.0);
  const double r0 = (4.0 * d1 - d0) / 3.0;
  const double r1 = (4.0 * d2 - d1) / 3.0;
  return (16.0 * r1 - r0) / 15.0;
}

template <class F>
double richardson_derivative(F&& f, double h = kFdStep) {
  return richardson_derivative_at(static_cast<F&&>(f), 0.0, h);
}

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_slope: need two or more points");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_slope: degenerate abscissae");
  return (n * sxy - sx * sy) / denom;
}

}  // namespace goldie
