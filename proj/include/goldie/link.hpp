#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "goldie/numeric.hpp"
#include "goldie/types.hpp"

namespace goldie {

/// Ray data (gamma, rho): the multiplicative index and the Popa parameter
/// along a fixed direction.
struct RadialParams {
  double gamma = 0.0;
  double rho = 0.0;
};

namespace detail {

/// General-position radial auxiliary (rho != 0): (1 + t rho)^{gamma/rho}.
template <class S>
S g_radial_general(S gamma, S rho, S t) {
  using std::exp;
  using std::log1p;
  if (!(S(1) + t * rho > S(0)))
    throw DomainError("g_radial: 1 + t rho must be positive");
  return exp((gamma / rho) * log1p(t * rho));
}

/// General-position link branch (rho != 0, gamma != 0), written as a ratio
/// of expm1 forms so it stays accurate arbitrarily close to the limits.
template <class S>
S lambda_general(S gamma, S rho, S t) {
  const S c = gamma / rho;
  const S num = pow1pm1(t * rho, c);
  const S den = pow1pm1(rho, c);
  return num / den;
}

/// rho = 0 limit: (e^{gamma t} - 1) / (e^{gamma} - 1).
template <class S>
S lambda_exp(S gamma, S t) {
  using std::expm1;
  return expm1(gamma * t) / expm1(gamma);
}

/// gamma = 0 limit: log(1 + rho t) / log(1 + rho).
template <class S>
S lambda_log(S rho, S t) {
  using std::log1p;
  if (!(S(1) + t * rho > S(0)))
    throw DomainError("lambda_link: 1 + t rho must be positive");
  return log1p(rho * t) / log1p(rho);
}

}  // namespace detail

/// Radial auxiliary g_{gamma,rho}(t): (1 + t rho)^{gamma/rho} away from
/// rho = 0, and its limit e^{gamma t} at rho = 0. Multiplicative along the
/// ray: g(s o_rho t) = g(s) g(t).
inline double g_radial(RadialParams p, double t) {
  if (std::abs(p.rho) <= tol::branch) return std::exp(p.gamma * t);
  return detail::g_radial_general(p.gamma, p.rho, t);
}

/// The link function lambda(t; gamma, rho), normalized to lambda(0) = 0 and
/// lambda(1) = 1. Four branches joined continuously:
///
///   rho != 0, gamma != 0 :  [(1+t rho)^{gamma/rho} - 1] / [(1+rho)^{gamma/rho} - 1]
///   rho != 0, gamma  = 0 :  log(1 + rho t) / log(1 + rho)
///   rho  = 0, gamma != 0 :  (e^{gamma t} - 1) / (e^{gamma} - 1)
///   rho  = 0, gamma  = 0 :  t
///
/// Branch selection snaps parameters within the branch window to their limit
/// form; each limit is the pointwise limit of the general branch.
inline double lambda_link(RadialParams p, double t) {
  const bool rho0 = std::abs(p.rho) <= tol::branch;
  const bool gamma0 = std::abs(p.gamma) <= tol::branch;
  if (rho0 && gamma0) return t;
  if (rho0) return detail::lambda_exp(p.gamma, t);
  if (!(1.0 + p.rho > 0.0))
    throw DomainError("lambda_link: 1 + rho must be positive");
  if (gamma0) return detail::lambda_log(p.rho, t);
  if (!(1.0 + t * p.rho > 0.0))
    throw DomainError("lambda_link: 1 + t rho must be positive");
  return detail::lambda_general(p.gamma, p.rho, t);
}

/// Max residual of the two equivalent composition laws of the link on
/// scalars: the additive form lambda(s o t) = lambda(s) + g(s) lambda(t)
/// and the circle form lambda(s o t) = lambda(s) o_sigma lambda(t) with
/// sigma = g(1) - 1.
inline double lambda_law_residual(RadialParams p, double s, double t) {
  const double st = s + t + p.rho * s * t;
  const double whole = lambda_link(p, st);
  const double ls = lambda_link(p, s);
  const double lt = lambda_link(p, t);
  const double additive = ls + g_radial(p, s) * lt;
  const double sigma = g_radial(p, 1.0) - 1.0;
  const double circled = ls + lt + sigma * ls * lt;
  return std::max(rel_residual(whole - additive, whole),
                  rel_residual(whole - circled, whole));
}

/// Result of a dense fixed-point scan of lambda(t) = t.
///
/// t = 0 is always fixed (lambda(0) = 0), so the meaningful statement is
/// that the root set is exactly {0, 1}: a unique nonzero fixed point at
/// t = 1. gamma = rho makes lambda the identity; that degenerate situation
/// is reported via identity_like instead of a root list.
struct FixedPointScan {
  bool unique_nonzero = false;
  bool identity_like = false;
  std::vector<double> roots;
};

inline FixedPointScan lambda_fixed_point_scan(RadialParams p, int grid = 100000) {
  if (std::abs(p.rho) <= tol::branch && std::abs(p.gamma) <= tol::branch)
    throw DomainError(
        "lambda_fixed_point_scan: gamma = rho = 0 fixes every point");

  double lo = -10.0, hi = 10.0;
  if (p.rho > tol::branch) lo = std::max(lo, -1.0 / p.rho + 1e-6);
  if (p.rho < -tol::branch) hi = std::min(hi, -1.0 / p.rho - 1e-6);

  const auto f = [&](double t) { return lambda_link(p, t) - t; };

  FixedPointScan out;
  const double step = (hi - lo) / grid;
  double prev_t = lo + step * 1e-3;  // keep strictly inside the open end
  double prev_f = f(prev_t);
  int near_zero = 0;
  int evaluated = 1;

  const auto push_root = [&](double r) {
    for (double seen : out.roots)
      if (std::abs(seen - r) < 1e-6) return;
    out.roots.push_back(r);
  };

  for (int i = 1; i <= grid; ++i) {
    const double t = lo + step * i;
    const double ft = f(t);
    ++evaluated;
    if (std::abs(ft) <= 1e-12 * (1.0 + std::abs(t))) ++near_zero;
    if (prev_f == 0.0) {
      push_root(prev_t);
    } else if (prev_f * ft < 0.0) {
      double a = prev_t, b = t, fa = prev_f;
      for (int it = 0; it < 100 && (b - a) > 1e-13 * (1.0 + std::abs(a)); ++it) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if (fm == 0.0) {
          a = b = m;
          break;
        }
        if (fa * fm < 0.0) {
          b = m;
        } else {
          a = m;
          fa = fm;
        }
      }
      push_root(0.5 * (a + b));
    }
    prev_t = t;
    prev_f = ft;
  }

  if (near_zero > evaluated / 2) {
    out.identity_like = true;
    return out;
  }

  bool saw_zero = false, saw_one = false, stray = false;
  for (double r : out.roots) {
    if (std::abs(r) <= tol::root) {
      saw_zero = true;
    } else if (std::abs(r - 1.0) <= tol::root) {
      saw_one = true;
    } else {
      stray = true;
    }
  }
  out.unique_nonzero = saw_zero && saw_one && !stray;
  return out;
}

/// Popa parameter of a scalar group: 0 (the additive line), a positive
/// finite value, or infinity (the multiplicative half-line). Infinity is a
/// state of the type, never a large float.
class PopaParameter {
 public:
  enum class Kind { zero, finite, infinity };

  static PopaParameter zero() { return PopaParameter(Kind::zero, 0.0); }
  static PopaParameter finite(double v) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw DomainError("PopaParameter: finite parameter must be positive");
    return PopaParameter(Kind::finite, v);
  }
  static PopaParameter inf() { return PopaParameter(Kind::infinity, 0.0); }

  Kind kind() const { return kind_; }
  bool is_zero() const { return kind_ == Kind::zero; }
  bool is_finite() const { return kind_ == Kind::finite; }
  bool is_inf() const { return kind_ == Kind::infinity; }

  /// The finite parameter value; only meaningful for Kind::finite.
  double value() const {
    if (!is_finite())
      throw DomainError("PopaParameter: no finite value to read");
    return value_;
  }

  bool in_carrier(double t) const {
    switch (kind_) {
      case Kind::zero:
        return std::isfinite(t);
      case Kind::finite:
        return 1.0 + value_ * t > 0.0;
      case Kind::infinity:
        return t > 0.0;
    }
    return false;
  }

  /// The group law: addition, the circle operation, or multiplication.
  double circle(double a, double b) const {
    switch (kind_) {
      case Kind::zero:
        return a + b;
      case Kind::finite:
        return a + b + value_ * a * b;
      case Kind::infinity:
        return a * b;
    }
    return 0.0;
  }

 private:
  PopaParameter(Kind k, double v) : kind_(k), value_(v) {}
  Kind kind_;
  double value_;
};

/// One cell of the scalar homomorphism table G_rho(R) -> G_sigma(R).
/// kappa = 0 is admitted; such a map collapses to the target identity and
/// is reported non-injective.
struct ScalarHom {
  PopaParameter rho = PopaParameter::zero();
  PopaParameter sigma = PopaParameter::zero();
  double kappa = 0.0;

  bool injective() const { return kappa != 0.0; }
};

/// Evaluate the table map at t. Nine cells, arranged by (source, target):
///
///           sigma = 0         sigma = s in (0,inf)                sigma = inf
///   rho=0   kappa t           [e^{s kappa t} - 1]/s               e^{kappa t}
///   rho=r   (kappa/r) log(1+rt)  [(1+rt)^{s kappa/r} - 1]/s       (1+rt)^{kappa/r}
///   rho=inf kappa log t       [t^{s kappa} - 1]/s                 t^kappa
inline double scalar_hom_eval(const ScalarHom& hom, double t) {
  if (!hom.rho.in_carrier(t))
    throw DomainError("scalar_hom_eval: t outside the source carrier");
  const double k = hom.kappa;
  switch (hom.rho.kind()) {
    case PopaParameter::Kind::zero:
      switch (hom.sigma.kind()) {
        case PopaParameter::Kind::zero:
          return k * t;
        case PopaParameter::Kind::finite: {
          const double s = hom.sigma.value();
          return std::expm1(s * k * t) / s;
        }
        case PopaParameter::Kind::infinity:
          return std::exp(k * t);
      }
      break;
    case PopaParameter::Kind::finite: {
      const double r = hom.rho.value();
      switch (hom.sigma.kind()) {
        case PopaParameter::Kind::zero:
          return (k / r) * std::log1p(r * t);
        case PopaParameter::Kind::finite: {
          const double s = hom.sigma.value();
          return pow1pm1(r * t, s * k / r) / s;
        }
        case PopaParameter::Kind::infinity:
          return std::exp((k / r) * std::log1p(r * t));
      }
      break;
    }
    case PopaParameter::Kind::infinity:
      switch (hom.sigma.kind()) {
        case PopaParameter::Kind::zero:
          return k * std::log(t);
        case PopaParameter::Kind::finite: {
          const double s = hom.sigma.value();
          return powm1(t, s * k) / s;
        }
        case PopaParameter::Kind::infinity:
          return std::pow(t, k);
      }
      break;
  }
  throw DomainError("scalar_hom_eval: unreachable cell");
}

/// Residual of the homomorphism law k(s o_rho t) = k(s) o_sigma k(t).
inline double scalar_hom_residual(const ScalarHom& hom, double s, double t) {
  const double st = hom.rho.circle(s, t);
  if (!hom.rho.in_carrier(st))
    throw DomainError("scalar_hom_residual: s o t outside the source carrier");
  const double lhs = scalar_hom_eval(hom, st);
  const double rhs = hom.sigma.circle(scalar_hom_eval(hom, s), scalar_hom_eval(hom, t));
  return rel_residual(lhs - rhs, rhs);
}

}  // namespace goldie
