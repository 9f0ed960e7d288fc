#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "goldie/types.hpp"

namespace goldie {

/// eta_rho(u) = 1 + rho(u), the multiplier of the circle operation.
inline double eta(const LinearFunctional& rho, const Vector& u) {
  return 1.0 + rho(u);
}

/// The group G_rho(X) = { x in R^d : 1 + rho(x) > 0 } under the circle
/// operation u o v = u + v + rho(u) v, with identity 0 and inverse
/// u^{-1} = -u / (1 + rho(u)). Membership uses a strict margin: points with
/// 1 + rho(x) at or below it are rejected as boundary cases.
class PopaGroup {
 public:
  PopaGroup(Eigen::Index dim, LinearFunctional rho,
            double carrier_margin = tol::carrier)
      : dim_(dim), rho_(std::move(rho)), margin_(carrier_margin) {
    if (dim_ < 1) throw DimensionError("PopaGroup: dimension must be at least 1");
    if (rho_.dim() != dim_)
      throw DimensionError("PopaGroup: functional dimension mismatch");
    if (!rho_.coeffs.allFinite())
      throw SpecError("PopaGroup: functional has non-finite coefficients");
  }

  Eigen::Index dim() const { return dim_; }
  const LinearFunctional& rho() const { return rho_; }
  double margin() const { return margin_; }

  bool contains(const Vector& x) const {
    return x.size() == dim_ && x.allFinite() && 1.0 + rho_(x) > margin_;
  }

  void require_member(const Vector& x, const char* who) const {
    if (x.size() != dim_)
      throw DimensionError(std::string(who) + ": dimension mismatch");
    if (!x.allFinite())
      throw DomainError(std::string(who) + ": non-finite coordinates");
    if (!(1.0 + rho_(x) > margin_))
      throw DomainError(std::string(who) +
                        ": 1 + rho(x) is not positive, x is outside the group");
  }

  double eta(const Vector& u) const {
    require_member(u, "eta");
    return 1.0 + rho_(u);
  }

  /// u o v. The multiplier identity eta(u o v) = eta(u) eta(v) guarantees
  /// closure; it is asserted numerically because a gross violation can only
  /// mean the inputs were bad.
  Vector circle(const Vector& u, const Vector& v) const {
    require_member(u, "circle");
    require_member(v, "circle");
    Vector w = u + v + rho_(u) * v;
    const double lhs = 1.0 + rho_(w);
    const double rhs = (1.0 + rho_(u)) * (1.0 + rho_(v));
    if (rel_residual(lhs - rhs, rhs) > 1e-9)
      throw DomainError("circle: eta multiplicativity violated");
    if (!(lhs > margin_))
      throw DomainError("circle: result fell below the carrier margin");
    return w;
  }

  Vector inverse(const Vector& u) const {
    require_member(u, "inverse");
    return Vector(-u / (1.0 + rho_(u)));
  }

 private:
  Eigen::Index dim_;
  LinearFunctional rho_;
  double margin_;
};

/// x - rho(x) u_ref, the component of x in the null space of rho. The
/// reference direction must be normalized to rho(u_ref) = 1.
inline Vector project_off(const LinearFunctional& rho, const Vector& u_ref,
                          const Vector& x, double eps = tol::residual) {
  if (std::abs(rho(u_ref) - 1.0) > eps)
    throw DomainError("project_off: rho(u_ref) must equal 1");
  return x - rho(x) * u_ref;
}

/// Uniform sample from a box, rejected until comfortably inside the carrier.
/// The eta floor keeps batteries away from the boundary, where relative
/// residuals are dominated by the vanishing multiplier.
inline Vector sample_carrier(const PopaGroup& g, Rng& rng, double lo = -0.6,
                             double hi = 0.6, double eta_floor = 0.05) {
  for (int tries = 0; tries < 10000; ++tries) {
    Vector x = rng.vector(g.dim(), lo, hi);
    if (1.0 + g.rho()(x) > eta_floor) return x;
  }
  throw DomainError("sample_carrier: rejection sampling failed");
}

}  // namespace goldie
