#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "goldie/linalg.hpp"
#include "goldie/popa.hpp"
#include "goldie/types.hpp"

namespace goldie {

/// Auxiliary in index form: g(x) = e^{alpha(x)} (1 + rho(x))^beta, with the
/// log-index gamma(x) = alpha(x) + beta log(1 + rho(x)).
///
/// When rho is not identically zero the frame is anchored at a reference
/// point u_ref with rho(u_ref) = 1 and alpha(u_ref) = 0, which pins beta as
/// gamma(u_ref)/log 2. When rho vanishes identically no reference point
/// exists and beta is redundant (it must be zero).
class AuxiliarySpec {
 public:
  static AuxiliarySpec make(LinearFunctional alpha, LinearFunctional rho,
                            double beta, std::optional<Vector> u_ref,
                            double frame_tol = tol::residual) {
    if (alpha.dim() != rho.dim())
      throw DimensionError("AuxiliarySpec: alpha and rho dimensions differ");
    if (!std::isfinite(beta))
      throw DomainError("AuxiliarySpec: beta must be finite");
    const bool rho_zero = rho.is_zero();
    if (rho_zero) {
      if (u_ref.has_value())
        throw SpecError("AuxiliarySpec: u_ref is meaningless when rho = 0");
      if (beta != 0.0)
        throw SpecError("AuxiliarySpec: beta must be 0 when rho = 0");
    } else {
      if (!u_ref.has_value())
        throw SpecError("AuxiliarySpec: u_ref required when rho != 0");
      if (u_ref->size() != rho.dim())
        throw DimensionError("AuxiliarySpec: u_ref dimension mismatch");
      if (std::abs(rho(*u_ref) - 1.0) > frame_tol)
        throw SpecError("AuxiliarySpec: rho(u_ref) must equal 1");
      if (std::abs(alpha(*u_ref)) > frame_tol)
        throw SpecError("AuxiliarySpec: alpha(u_ref) must vanish");
    }
    return AuxiliarySpec(std::move(alpha), std::move(rho), beta,
                         std::move(u_ref));
  }

  int dim() const { return alpha_.dim(); }
  const LinearFunctional& alpha() const { return alpha_; }
  const LinearFunctional& rho() const { return rho_; }
  double beta() const { return beta_; }
  const std::optional<Vector>& u_ref() const { return u_ref_; }
  bool rho_is_zero() const { return rho_.is_zero(); }
  bool alpha_is_zero() const { return alpha_.is_zero(); }

  /// True when g is an actual homomorphism of the group: rho = 0 (free
  /// alpha) or alpha = 0 (rho carries everything).
  bool multiplicative() const { return rho_is_zero() || alpha_is_zero(); }

  /// log g(x) = alpha(x) + beta log(1 + rho(x)).
  double gamma_log(const Vector& x) const {
    const double r = rho_(x);
    if (!(1.0 + r > 0.0))
      throw DomainError("AuxiliarySpec: x outside the carrier");
    return alpha_(x) + beta_ * std::log1p(r);
  }

  double g_eval(const Vector& x) const { return std::exp(gamma_log(x)); }

  /// gamma at the reference point: beta log 2, since rho(u_ref) = 1 and
  /// alpha(u_ref) = 0.
  double gamma_of_uref() const {
    if (!u_ref_.has_value())
      throw DomainError("AuxiliarySpec: no reference point when rho = 0");
    return beta_ * std::numbers::ln2;
  }

 private:
  AuxiliarySpec(LinearFunctional alpha, LinearFunctional rho, double beta,
                std::optional<Vector> u_ref)
      : alpha_(std::move(alpha)),
        rho_(std::move(rho)),
        beta_(beta),
        u_ref_(std::move(u_ref)) {}

  LinearFunctional alpha_;
  LinearFunctional rho_;
  double beta_;
  std::optional<Vector> u_ref_;
};

/// Exact multiplicativity defect of the index form:
/// g(u o v) = g(u) g(v) exp(rho(u) alpha(v)).
inline double multiplicativity_defect(const AuxiliarySpec& spec,
                                      const Vector& u, const Vector& v) {
  return std::exp(spec.rho()(u) * spec.alpha()(v));
}

/// Relative residual of g(u o v) - g(u) g(v). Zero (to rounding) exactly
/// when the defect is 1.
inline double multiplicativity_residual(const AuxiliarySpec& spec,
                                        const Vector& u, const Vector& v) {
  const Vector w = u + v + spec.rho()(u) * v;
  const double lhs = spec.g_eval(w);
  const double rhs = spec.g_eval(u) * spec.g_eval(v);
  return rel_residual(lhs - rhs, rhs);
}

/// Residual of the defect identity itself, which holds for every index
/// form, multiplicative or not.
inline double defect_identity_residual(const AuxiliarySpec& spec,
                                       const Vector& u, const Vector& v) {
  const Vector w = u + v + spec.rho()(u) * v;
  const double lhs = spec.g_eval(w);
  const double rhs =
      spec.g_eval(u) * spec.g_eval(v) * multiplicativity_defect(spec, u, v);
  return rel_residual(lhs - rhs, rhs);
}

/// Check of the closed radial form of a multiplicative index auxiliary
/// along the ray through w:
///   rho(w) != 0 :  g(tw) = (1 + t rho(w))^{gamma(w)/log(1 + rho(w))}
///   rho(w)  = 0 :  g(tw) = e^{t gamma(w)}
struct RadialFormCheck {
  bool power_branch = false;
  double max_residual = 0.0;
  bool ok = false;
};

inline RadialFormCheck radial_g_form(const AuxiliarySpec& spec, const Vector& w,
                                     const std::vector<double>& ts,
                                     double pass_tol = tol::residual) {
  RadialFormCheck out;
  const double rw = spec.rho()(w);
  const double gw = spec.gamma_log(w);
  out.power_branch = std::abs(rw) > tol::branch;
  for (double t : ts) {
    if (!(1.0 + t * rw > 0.0)) continue;
    const double predicted = out.power_branch
                                 ? std::exp(gw * std::log1p(t * rw) / std::log1p(rw))
                                 : std::exp(t * gw);
    const double actual = spec.g_eval(t * w);
    out.max_residual =
        std::max(out.max_residual, rel_residual(actual - predicted, predicted));
  }
  out.ok = out.max_residual <= pass_tol;
  return out;
}

/// The two solution regimes: NA has gamma vanishing on the nullspace of rho
/// (covers every multiplicative auxiliary with rho != 0, and the trivial
/// g = 1); NB is the purely exponential situation rho = 0, alpha != 0.
enum class Regime { NA, NB };

/// Outcome of classifying an auxiliary by its behavior on N(rho).
struct NullspaceClassification {
  Regime regime = Regime::NA;
  Matrix null_basis;                  // orthonormal basis of N(rho)
  std::vector<double> gamma_on_basis; // gamma at each basis column
  std::optional<Vector> witness;      // NB only: basis column maximizing |gamma|
  double max_gamma = 0.0;
};

inline NullspaceClassification nullspace_classify(const AuxiliarySpec& spec,
                                                  double zero_tol = 1e-9) {
  NullspaceClassification out;
  Matrix rows(spec.rho_is_zero() ? 0 : 1, spec.dim());
  if (!spec.rho_is_zero()) rows.row(0) = spec.rho().coeffs.transpose();
  out.null_basis = nullspace(rows);

  Eigen::Index arg = -1;
  for (Eigen::Index j = 0; j < out.null_basis.cols(); ++j) {
    const double gj = spec.gamma_log(out.null_basis.col(j));
    out.gamma_on_basis.push_back(gj);
    if (std::abs(gj) > out.max_gamma) {
      out.max_gamma = std::abs(gj);
      arg = j;
    }
  }
  if (out.max_gamma > zero_tol) {
    out.regime = Regime::NB;
    out.witness = out.null_basis.col(arg);
  }
  return out;
}

}  // namespace goldie
