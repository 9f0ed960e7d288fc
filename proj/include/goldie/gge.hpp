#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "goldie/index.hpp"
#include "goldie/kernel.hpp"
#include "goldie/linalg.hpp"
#include "goldie/link.hpp"
#include "goldie/numeric.hpp"
#include "goldie/types.hpp"

namespace goldie {

/// A black-box triple (K, h, g) for the generalized equation
/// K(u + h(u)v) = K(u) + g(u)K(v), with an explicit domain guard.
/// Standardization h(0) = g(0) = 1 is enforced at construction.
struct GgeTriple {
  VectorFn K;
  ScalarFn h;
  ScalarFn g;
  GuardFn domain;
  int dim_x = 0;
  int dim_y = 0;

  static GgeTriple make(VectorFn K, ScalarFn h, ScalarFn g, GuardFn domain,
                        int dim_x, int dim_y) {
    if (dim_x < 1 || dim_y < 1)
      throw DimensionError("GgeTriple: dimensions must be >= 1");
    GgeTriple t{std::move(K), std::move(h), std::move(g), std::move(domain),
                dim_x, dim_y};
    const Vector zero = Vector::Zero(dim_x);
    if (!t.domain(zero)) throw DomainError("GgeTriple: 0 outside domain");
    if (std::abs(t.h(zero) - 1.0) > 1e-9 || std::abs(t.g(zero) - 1.0) > 1e-9)
      throw SpecError("GgeTriple: not standardized, h(0) and g(0) must be 1");
    return t;
  }
};

/// Directional derivative of f at 0 along u by central differences with
/// Richardson extrapolation, plus the homogeneity diagnostic
/// f'_{su}(0) = s f'_u(0) at probes s in {2, -1, 0.5}.
struct Gateaux {
  double value = 0.0;
  double homogeneity_residual = 0.0;
};

inline double gateaux_at_zero(const ScalarFn& f, const GuardFn& domain,
                              const Vector& u, double h0 = kFdStep) {
  const auto ray = [&](double t) {
    const Vector p = t * u;
    if (!domain(p)) throw DomainError("gateaux_at_zero: probe left the domain");
    const double y = f(p);
    if (!std::isfinite(y))
      throw DomainError("gateaux_at_zero: non-finite evaluation");
    return y;
  };
  return richardson_derivative(ray, h0);
}

inline Gateaux gateaux_with_probes(const ScalarFn& f, const GuardFn& domain,
                                   const Vector& u, double h0 = kFdStep) {
  Gateaux out;
  out.value = gateaux_at_zero(f, domain, u, h0);
  for (double s : {2.0, -1.0, 0.5}) {
    const double scaled = gateaux_at_zero(f, domain, s * u, h0);
    out.homogeneity_residual = std::max(
        out.homogeneity_residual, rel_residual(scaled - s * out.value, s * out.value));
  }
  return out;
}

/// Relative residual of K(u + h(u)v) = K(u) + g(u)K(v) at one pair.
inline double gge_residual(const GgeTriple& t, const Vector& u, const Vector& v) {
  if (!t.domain(u) || !t.domain(v))
    throw DomainError("gge_residual: point outside domain");
  const Vector w = u + t.h(u) * v;
  if (!t.domain(w)) throw DomainError("gge_residual: composite point outside domain");
  const Vector lhs = t.K(w);
  const Vector rhs = t.K(u) + t.g(u) * t.K(v);
  const double scale = std::max(lhs.lpNorm<Eigen::Infinity>(),
                                rhs.lpNorm<Eigen::Infinity>());
  return rel_residual(Vector(lhs - rhs), scale);
}

/// Radial-equivalence identity along the ray through w, with a and b scalar
/// coordinates: lambda_w(h-defect) = g-defect, where
///   h-defect = h(c w) / (h(a w) h(b w)),  g-defect = g(c w)/(g(a w) g(b w)),
///   c = a + h(a w) b,
/// and lambda_w uses the Gateaux data (gamma(w), rho(w)).
inline double radial_equivalence_residual(const GgeTriple& t, const Vector& w,
                                          double a, double b) {
  if (t.K(w).lpNorm<Eigen::Infinity>() == 0.0)
    throw DomainError("radial_equivalence_residual: K(w) = 0");
  const RadialParams p{gateaux_at_zero(t.g, t.domain, w),
                       gateaux_at_zero(t.h, t.domain, w)};
  const Vector pa = a * w;
  const Vector pb = b * w;
  if (!t.domain(pa) || !t.domain(pb))
    throw DomainError("radial_equivalence_residual: ray point outside domain");
  const double c = a + t.h(pa) * b;
  const Vector pc = c * w;
  if (!t.domain(pc))
    throw DomainError("radial_equivalence_residual: composite point outside domain");
  const double x = t.h(pc) / (t.h(pa) * t.h(pb));
  const double lhs = lambda_link(p, x);
  const double rhs = t.g(pc) / (t.g(pa) * t.g(pb));
  return rel_residual(lhs - rhs, rhs);
}

/// The one-function equation g(a + g(a)b) = g(a)g(b) along the ray through
/// u, with the companion affinity check g(su) = 1 + s gamma(u) that its
/// continuous ray solutions must satisfy.
struct GsCheck {
  double gs_residual = 0.0;
  bool gs_pass = false;
  double affine_residual = 0.0;  // evaluated only when the equation passes
};

inline GsCheck gs_check(const ScalarFn& f, const GuardFn& domain, const Vector& u,
                        double a, double b, double pass_tol = tol::residual) {
  GsCheck out;
  const Vector pa = a * u;
  const Vector pb = b * u;
  if (!domain(pa) || !domain(pb))
    throw DomainError("gs_check: ray point outside domain");
  const double c = a + f(pa) * b;
  const Vector pc = c * u;
  if (!domain(pc)) throw DomainError("gs_check: composite point outside domain");
  const double rhs = f(pa) * f(pb);
  out.gs_residual = rel_residual(f(pc) - rhs, rhs);
  out.gs_pass = out.gs_residual <= pass_tol;
  if (out.gs_pass) {
    const double slope = gateaux_at_zero(f, domain, u);
    for (double s : {a, b, c}) {
      const double affine = 1.0 + s * slope;
      out.affine_residual =
          std::max(out.affine_residual, rel_residual(f(s * u) - affine, affine));
    }
  }
  return out;
}

/// The four ray classes of a triple, keyed to vanishing of rho(u) = Dh and
/// gamma(u) = Dg along the ray:
///   flat:        h_u = g_u = 1
///   exponential: h_u = 1,            g(su) = e^{s gamma(u)}
///   affine:      g_u = 1,            h(su) = 1 + s rho(u)
///   power:       h(su) = 1+s rho(u), g(su) = (1+s rho(u))^{gamma/rho}
enum class TetraCase { flat, exponential, affine, power };

inline const char* to_string(TetraCase c) {
  switch (c) {
    case TetraCase::flat: return "flat";
    case TetraCase::exponential: return "exponential";
    case TetraCase::affine: return "affine";
    case TetraCase::power: return "power";
  }
  return "?";
}

struct TetraClass {
  TetraCase kind = TetraCase::flat;
  double rho_u = 0.0;
  double gamma_u = 0.0;
  Vector direction;
  double homogeneity_residual = 0.0;  // worst probe deviation of either derivative
  double validation_residual = 0.0;   // closed forms of the assigned case
  bool validated = false;
  bool nontrivial = false;            // surrogate: some ray map is not the identity
  double exponent_constancy = 0.0;    // power case: s-sweep drift of gamma/rho
};

inline TetraClass classify_tetrachotomy(const GgeTriple& t, const Vector& u,
                                        double tau = tol::classify,
                                        double val_tol = tol::fd) {
  if (t.K(u).lpNorm<Eigen::Infinity>() == 0.0)
    throw DomainError("classify_tetrachotomy: K(u) = 0 along this direction");

  TetraClass out;
  out.direction = u;

  // Nontriviality probes evaluate K at w and 2w; keep both inside the domain.
  std::vector<Vector> dirs;
  const auto probe = [&](const Vector& w) {
    if (t.domain(w) && t.domain(2.0 * w)) dirs.push_back(w);
  };
  probe(u);
  for (int i = 0; i < t.dim_x; ++i) probe(Vector::Unit(t.dim_x, i));
  out.nontrivial = kernel_nontrivial(t.K, dirs).nontrivial;

  const Gateaux dh = gateaux_with_probes(t.h, t.domain, u);
  const Gateaux dg = gateaux_with_probes(t.g, t.domain, u);
  out.rho_u = dh.value;
  out.gamma_u = dg.value;
  out.homogeneity_residual =
      std::max(dh.homogeneity_residual, dg.homogeneity_residual);

  const bool rho0 = std::abs(out.rho_u) <= tau;
  const bool gamma0 = std::abs(out.gamma_u) <= tau;
  out.kind = rho0 ? (gamma0 ? TetraCase::flat : TetraCase::exponential)
                  : (gamma0 ? TetraCase::affine : TetraCase::power);

  for (double s : {-0.4, 0.3, 0.8, 1.5, 2.0}) {
    const Vector p = s * u;
    if (!t.domain(p)) continue;
    double h_pred = 1.0, g_pred = 1.0;
    switch (out.kind) {
      case TetraCase::flat:
        break;
      case TetraCase::exponential:
        g_pred = std::exp(s * out.gamma_u);
        break;
      case TetraCase::affine:
        h_pred = 1.0 + s * out.rho_u;
        break;
      case TetraCase::power:
        h_pred = 1.0 + s * out.rho_u;
        if (!(h_pred > 0.0)) continue;
        g_pred = std::exp((out.gamma_u / out.rho_u) * std::log1p(s * out.rho_u));
        break;
    }
    out.validation_residual = std::max(
        out.validation_residual,
        std::max(rel_residual(t.h(p) - h_pred, h_pred),
                 rel_residual(t.g(p) - g_pred, g_pred)));
  }
  out.validated = out.validation_residual <= val_tol;

  if (out.kind == TetraCase::power) {
    const double base = out.gamma_u / out.rho_u;
    for (double s : {0.5, 2.0}) {
      const double rs = gateaux_at_zero(t.h, t.domain, s * u);
      const double gs = gateaux_at_zero(t.g, t.domain, s * u);
      if (std::abs(rs) <= tau) continue;
      out.exponent_constancy =
          std::max(out.exponent_constancy, rel_residual(gs / rs - base, base));
    }
  }
  return out;
}

/// The two derivative identities behind the ray classification, with the
/// link derivative taken by finite differences:
///   D1: lambda'_{su}(1 + t h(su)) h(su) = g(su) lambda'_{su}(t)
///   D2: the t = 0 instance of D1.
struct DerivativeLaw {
  double d1 = 0.0;
  double d2 = 0.0;
};

inline DerivativeLaw derivative_law_residuals(const GgeTriple& t, const Vector& u,
                                              double s, double tt) {
  const Vector su = s * u;
  if (!t.domain(su)) throw DomainError("derivative_law_residuals: su outside domain");
  const RadialParams p{gateaux_at_zero(t.g, t.domain, su),
                       gateaux_at_zero(t.h, t.domain, su)};
  const auto lam_prime = [&](double x) {
    return richardson_derivative_at([&](double y) { return lambda_link(p, y); }, x);
  };
  const double hsu = t.h(su);
  const double gsu = t.g(su);

  DerivativeLaw out;
  const double lhs1 = lam_prime(1.0 + tt * hsu) * hsu;
  const double rhs1 = gsu * lam_prime(tt);
  out.d1 = rel_residual(lhs1 - rhs1, rhs1);
  const double lhs2 = lam_prime(1.0) * hsu;
  const double rhs2 = gsu * lam_prime(0.0);
  out.d2 = rel_residual(lhs2 - rhs2, rhs2);
  return out;
}

/// Reduction of a differentiable triple to standard form: rho is assembled
/// from basis directional derivatives of h, the auxiliary (alpha, beta)
/// from g on a nullspace basis and the reference point, and the result is
/// validated against the original equation on fresh samples.
struct ReduceResult {
  LinearFunctional rho;
  std::optional<AuxiliarySpec> aux;
  std::optional<Vector> u_ref;
  double linearity_residual = 0.0;   // Dh additivity over basis pairs
  double equation_residual = 0.0;    // K, g against the circle op of rho
  double aux_residual = 0.0;         // multiplicativity of the fitted form
  std::vector<int> null_k_directions;  // basis indices with K = 0 (unconstrained)
  bool pass = false;
};

inline ReduceResult reduce_to_standard(const GgeTriple& t, std::uint64_t seed = 0,
                                       int samples = 200,
                                       double lin_tol = tol::fd,
                                       double eq_tol = tol::gate) {
  const int d = t.dim_x;
  ReduceResult out;

  Vector rho_vec(d);
  for (int i = 0; i < d; ++i)
    rho_vec(i) = gateaux_at_zero(t.h, t.domain, Vector::Unit(d, i));
  const double rho_scale = rho_vec.lpNorm<Eigen::Infinity>();
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const double dij =
          gateaux_at_zero(t.h, t.domain, Vector::Unit(d, i) + Vector::Unit(d, j));
      out.linearity_residual = std::max(
          out.linearity_residual,
          std::abs(dij - rho_vec(i) - rho_vec(j)) / (1.0 + rho_scale));
    }
  if (out.linearity_residual > lin_tol)
    throw SpecError("reduce_to_standard: Dh(0) is not linear (residual " +
                    std::to_string(out.linearity_residual) + ")");

  const bool rho_zero = rho_scale <= tol::classify;
  if (rho_zero) rho_vec.setZero();
  out.rho.coeffs = rho_vec;

  for (int i = 0; i < d; ++i)
    if (t.K(Vector::Unit(d, i)).lpNorm<Eigen::Infinity>() <= 1e-9)
      out.null_k_directions.push_back(i);

  LinearFunctional alpha;
  double beta = 0.0;
  if (rho_zero) {
    alpha.coeffs = Vector(d);
    for (int i = 0; i < d; ++i) {
      const Vector e = Vector::Unit(d, i);
      if (!t.domain(e)) throw DomainError("reduce_to_standard: basis point outside domain");
      alpha.coeffs(i) = std::log(t.g(e));
    }
    out.aux = AuxiliarySpec::make(alpha, out.rho, 0.0, std::nullopt);
  } else {
    int jmax = 0;
    for (int j = 1; j < d; ++j)
      if (std::abs(rho_vec(j)) > std::abs(rho_vec(jmax))) jmax = j;
    const Vector u_ref = Vector::Unit(d, jmax) / rho_vec(jmax);
    if (!t.domain(u_ref))
      throw DomainError("reduce_to_standard: reference point outside domain");
    out.u_ref = u_ref;
    beta = std::log(t.g(u_ref)) / std::numbers::ln2;

    Matrix row(1, d);
    row.row(0) = rho_vec.transpose();
    const Matrix basis = nullspace(row);
    Vector c(basis.cols());
    for (Eigen::Index j = 0; j < basis.cols(); ++j) {
      const Vector b = basis.col(j);
      if (!t.domain(b)) throw DomainError("reduce_to_standard: nullspace point outside domain");
      c(j) = std::log(t.g(b));
    }
    const Vector bc = basis * c;
    alpha.coeffs = bc - bc.dot(u_ref) * rho_vec;
    out.aux = AuxiliarySpec::make(alpha, out.rho, beta, u_ref);
  }

  // Validate: (K, g) solves the equation for the circle op of the fitted
  // rho, and the fitted index form is multiplicative.
  const PopaGroup group(d, out.rho);
  Rng rng(seed);
  for (int i = 0; i < samples; ++i) {
    const Vector u = sample_carrier(group, rng);
    const Vector v = sample_carrier(group, rng);
    out.equation_residual = std::max(
        out.equation_residual, gfe_residual(t.K, t.g, group, u, v));
    out.aux_residual =
        std::max(out.aux_residual, multiplicativity_residual(*out.aux, u, v));
  }
  out.pass = out.equation_residual <= eq_tol && out.aux_residual <= eq_tol;
  return out;
}

}  // namespace goldie
