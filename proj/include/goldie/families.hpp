#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "goldie/gge.hpp"
#include "goldie/kernel.hpp"
#include "goldie/linalg.hpp"
#include "goldie/sigma.hpp"
#include "goldie/types.hpp"

namespace goldie {

namespace detail {

inline VectorFn with_perturbation(VectorFn base, LinearFunctional driver,
                                  std::optional<Perturbation> p, int dim_y) {
  if (!p.has_value()) return base;
  if (p->coord < 0 || p->coord >= dim_y)
    throw DimensionError("Perturbation: coordinate out of range");
  const Vector bump = Vector::Unit(dim_y, p->coord) * p->eps;
  return [base = std::move(base), driver = std::move(driver), bump](const Vector& x) {
    return Vector(base(x) + driver(x) * bump);
  };
}

inline int argmax_abs(const Vector& v) {
  int j = 0;
  for (int i = 1; i < v.size(); ++i)
    if (std::abs(v(i)) > std::abs(v(j))) j = i;
  return j;
}

}  // namespace detail

/// Ray family on G_rho: K(x) = k(rho(x)) y0 with k the scalar homomorphism
/// G_1(R) -> G_s(R) of weight kappa, so
///   s != 0:  K(x) = [(1+rho(x))^{s kappa} - 1]/s y0,  g = (1+rho)^{s kappa}
///   s  = 0:  K(x) = kappa log(1+rho(x)) y0,           g = 1.
inline KernelSpec make_ray_kernel(Vector rho, Vector y0, double s, double kappa,
                                  std::optional<Perturbation> perturb = {},
                                  bool gated = true) {
  const int d = int(rho.size());
  const int m = int(y0.size());
  LinearFunctional rf{std::move(rho)};
  if (rf.is_zero())
    throw SpecError("make_ray_kernel: rho must not vanish (use a linear family)");
  const int j = detail::argmax_abs(rf.coeffs);
  const Vector u_ref = Vector::Unit(d, j) / rf.coeffs(j);
  const double sk = s * kappa;

  VectorFn K;
  ScalarFn g;
  if (s != 0.0) {
    K = [rf, y0, s, sk](const Vector& x) { return Vector(pow1pm1(rf(x), sk) / s * y0); };
    g = [rf, sk](const Vector& x) { return std::exp(sk * std::log1p(rf(x))); };
  } else {
    K = [rf, y0, kappa](const Vector& x) { return Vector(kappa * std::log1p(rf(x)) * y0); };
    g = [](const Vector&) { return 1.0; };
  }
  K = detail::with_perturbation(std::move(K), rf, perturb, m);

  AuxiliarySpec aux = AuxiliarySpec::make(LinearFunctional::zero(d), rf,
                                          s != 0.0 ? sk : 0.0, u_ref);
  auto radial = [rf, sk, s](const Vector& u) {
    return RadialParams{s != 0.0 ? sk * rf(u) : 0.0, rf(u)};
  };
  PopaGroup group(d, rf);
  return gated ? KernelSpec::make(std::move(group), m, std::move(K), std::move(g),
                                  std::move(aux), radial)
               : KernelSpec::make_unchecked(std::move(group), m, std::move(K),
                                            std::move(g), std::move(aux), radial);
}

/// Exponential family on the additive group (rho = 0):
///   s != 0:  K(x) = [e^{s kappa alpha(x)} - 1]/s y0,  g = e^{s kappa alpha}
///   s  = 0:  K(x) = kappa alpha(x) y0,                g = 1.
inline KernelSpec make_exp_kernel(Vector alpha, Vector y0, double s, double kappa,
                                  std::optional<Perturbation> perturb = {},
                                  bool gated = true) {
  const int d = int(alpha.size());
  const int m = int(y0.size());
  LinearFunctional af{std::move(alpha)};
  const double sk = s * kappa;

  VectorFn K;
  ScalarFn g;
  LinearFunctional alpha_index = LinearFunctional::zero(d);
  if (s != 0.0) {
    K = [af, y0, s, sk](const Vector& x) { return Vector(std::expm1(sk * af(x)) / s * y0); };
    g = [af, sk](const Vector& x) { return std::exp(sk * af(x)); };
    alpha_index.coeffs = sk * af.coeffs;
  } else {
    K = [af, y0, kappa](const Vector& x) { return Vector(kappa * af(x) * y0); };
    g = [](const Vector&) { return 1.0; };
  }
  K = detail::with_perturbation(std::move(K), af, perturb, m);

  AuxiliarySpec aux = AuxiliarySpec::make(alpha_index, LinearFunctional::zero(d),
                                          0.0, std::nullopt);
  auto radial = [af, sk, s](const Vector& u) {
    return RadialParams{s != 0.0 ? sk * af(u) : 0.0, 0.0};
  };
  PopaGroup group(d, LinearFunctional::zero(d));
  return gated ? KernelSpec::make(std::move(group), m, std::move(K), std::move(g),
                                  std::move(aux), radial)
               : KernelSpec::make_unchecked(std::move(group), m, std::move(K),
                                            std::move(g), std::move(aux), radial);
}

/// Purely additive family: K = Lx on the additive group, g = 1.
inline KernelSpec make_linear_kernel(Matrix l, bool gated = true) {
  const int d = int(l.cols());
  const int m = int(l.rows());
  VectorFn K = [l](const Vector& x) { return Vector(l * x); };
  ScalarFn g = [](const Vector&) { return 1.0; };
  AuxiliarySpec aux = AuxiliarySpec::make(LinearFunctional::zero(d),
                                          LinearFunctional::zero(d), 0.0,
                                          std::nullopt);
  auto radial = [](const Vector&) { return RadialParams{0.0, 0.0}; };
  PopaGroup group(d, LinearFunctional::zero(d));
  return gated ? KernelSpec::make(std::move(group), m, std::move(K), std::move(g),
                                  std::move(aux), radial)
               : KernelSpec::make_unchecked(std::move(group), m, std::move(K),
                                            std::move(g), std::move(aux), radial);
}

/// Composite family: a linear part on the rho-nullspace plus a ray along
/// the reference direction, K(x) = L(x - rho(x) u_ref) + kappa rho(x) y0
/// with g = eta. Linear overall, so the equation holds with g = 1 + rho.
inline KernelSpec make_composite_kernel(Vector rho, Matrix l, Vector y0,
                                        double kappa, bool gated = true) {
  const int d = int(rho.size());
  const int m = int(y0.size());
  if (l.cols() != d || l.rows() != m)
    throw DimensionError("make_composite_kernel: L shape mismatch");
  LinearFunctional rf{std::move(rho)};
  if (rf.is_zero())
    throw SpecError("make_composite_kernel: rho must not vanish");
  const int j = detail::argmax_abs(rf.coeffs);
  const Vector u_ref = Vector::Unit(d, j) / rf.coeffs(j);

  VectorFn K = [rf, l, y0, kappa, u_ref](const Vector& x) {
    return Vector(l * (x - rf(x) * u_ref) + kappa * rf(x) * y0);
  };
  PopaGroup group(d, rf);
  ScalarFn g = [rf](const Vector& x) { return 1.0 + rf(x); };
  AuxiliarySpec aux =
      AuxiliarySpec::make(LinearFunctional::zero(d), rf, 1.0, u_ref);
  auto radial = [rf](const Vector& u) { return RadialParams{rf(u), rf(u)}; };
  return gated ? KernelSpec::make(std::move(group), m, std::move(K), std::move(g),
                                  std::move(aux), radial)
               : KernelSpec::make_unchecked(std::move(group), m, std::move(K),
                                            std::move(g), std::move(aux), radial);
}

/// A solution family with its planted ground truth.
struct PlantedFamily {
  std::string name;
  KernelSpec spec;
  LinearFunctional sigma_expected;
  Regime regime = Regime::NA;
};

namespace detail {

inline Vector gen_coeffs(Rng& rng, int d, double min_inf_norm = 0.5) {
  Vector v(d);
  do {
    for (int i = 0; i < d; ++i) v(i) = rng.uniform(-1.0, 1.0);
  } while (v.lpNorm<Eigen::Infinity>() < min_inf_norm);
  return v;
}

inline Vector gen_y0(Rng& rng, int m) {
  Vector v(m);
  do {
    for (int i = 0; i < m; ++i) v(i) = rng.uniform(-1.5, 1.5);
  } while (v.norm() < 0.6);
  return v;
}

inline double gen_weight(Rng& rng) {
  const double mag = rng.uniform(0.3, 1.5);
  return rng.uniform(0.0, 1.0) < 0.5 ? -mag : mag;
}

/// Expected sigma of a composite family: the minimum-norm functional that
/// kills the linear block on N(rho) and sends the ray image to rho.
inline LinearFunctional composite_sigma(const Vector& rho, const Matrix& l,
                                        const Vector& y0, double kappa) {
  Matrix row(1, rho.size());
  row.row(0) = rho.transpose();
  const Matrix basis = nullspace(row);
  Matrix a(basis.cols() + 1, y0.size());
  Vector b = Vector::Zero(basis.cols() + 1);
  for (Eigen::Index j = 0; j < basis.cols(); ++j)
    a.row(j) = (l * basis.col(j)).transpose();
  a.row(basis.cols()) = kappa * y0.transpose();
  b(basis.cols()) = 1.0;
  return LinearFunctional{min_norm_solve(a, b)};
}

}  // namespace detail

/// Deterministic regime-A instances, i in [0, 10): six power rays of
/// increasing dimension, a logarithmic ray (g = 1), a purely additive
/// family, a composite family, and one more wide ray.
inline PlantedFamily planted_na(int i) {
  if (i < 0 || i >= 10) throw std::invalid_argument("planted_na: index in [0,10)");
  Rng rng(1000 + std::uint64_t(i));
  if (i <= 5 || i == 9) {
    const int d = i <= 5 ? i + 1 : 6;
    const int m = 1 + i % 3;
    const Vector rho = detail::gen_coeffs(rng, d);
    const Vector y0 = detail::gen_y0(rng, m);
    const double s = rng.uniform(0.4, 2.4);
    const double kappa = detail::gen_weight(rng);
    PlantedFamily out{"na-ray-" + std::to_string(i),
                      make_ray_kernel(rho, y0, s, kappa), {}, Regime::NA};
    out.sigma_expected.coeffs = s / y0.squaredNorm() * y0;
    return out;
  }
  if (i == 6) {
    const Vector rho = detail::gen_coeffs(rng, 2);
    const Vector y0 = detail::gen_y0(rng, 2);
    PlantedFamily out{"na-logray-6", make_ray_kernel(rho, y0, 0.0, 0.8), {},
                      Regime::NA};
    out.sigma_expected = LinearFunctional::zero(2);
    return out;
  }
  if (i == 7) {
    Matrix l(2, 3);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c) l(r, c) = rng.uniform(-1.0, 1.0);
    l(0, 0) += 1.0;  // keep L away from rank collapse
    PlantedFamily out{"na-linear-7", make_linear_kernel(l), {}, Regime::NA};
    out.sigma_expected = LinearFunctional::zero(2);
    return out;
  }
  // i == 8: composite in d = 5, m = 4, ray image orthogonal to the linear block.
  const Vector rho = detail::gen_coeffs(rng, 5);
  Matrix l = Matrix::Zero(4, 5);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 5; ++c) l(r, c) = rng.uniform(-1.0, 1.0);
  Vector y0 = Vector::Zero(4);
  y0(3) = 1.5;
  const double kappa = 2.0;
  PlantedFamily out{"na-composite-8", make_composite_kernel(rho, l, y0, kappa),
                    {}, Regime::NA};
  out.sigma_expected = detail::composite_sigma(rho, l, y0, kappa);
  return out;
}

/// Deterministic regime-B instances, i in [0, 10): exponential families on
/// the additive group with varied alpha, y0, and weights.
inline PlantedFamily planted_nb(int i) {
  if (i < 0 || i >= 10) throw std::invalid_argument("planted_nb: index in [0,10)");
  Rng rng(3000 + std::uint64_t(i));
  const int d = i % 6 + 1;
  const int m = 1 + i % 3;
  Vector alpha = detail::gen_coeffs(rng, d);
  if (i >= 6 && d >= 2) {
    alpha(d - 1) = 0.0;  // give N*(gamma) real content
    if (alpha.lpNorm<Eigen::Infinity>() < 0.5) alpha(0) = 0.75;
  }
  const Vector y0 = detail::gen_y0(rng, m);
  const double s = rng.uniform(0.4, 2.4);
  const double kappa = detail::gen_weight(rng);
  PlantedFamily out{"nb-exp-" + std::to_string(i),
                    make_exp_kernel(alpha, y0, s, kappa), {}, Regime::NB};
  out.sigma_expected.coeffs = s / y0.squaredNorm() * y0;
  return out;
}

/// The deliberately broken instance: a power ray with one output coordinate
/// bumped by eps * rho(x). Constructed without the gate so that downstream
/// verifiers are the ones to reject it.
inline KernelSpec corrupted_ray(double eps = 1e-3, int coord = 0) {
  Vector rho(3);
  rho << 1.0, 0.7, -0.4;
  Vector y0(2);
  y0 << 1.2, -0.8;
  return make_ray_kernel(rho, y0, 1.25, 2.0, Perturbation{coord, eps},
                         /*gated=*/false);
}

/// A (GGE) triple with its planted ray data along `direction`.
struct PlantedTriple {
  std::string name;
  GgeTriple triple;
  TetraCase expected = TetraCase::flat;
  Vector direction;
  double rho_u = 0.0;
  double gamma_u = 0.0;
  LinearFunctional rho_expected;  // h's linear part (zero when h = 1)
};

/// Deterministic (GGE) instances, 10 per case. Directions are normalized so
/// the planted directional derivatives are 0.3 (when nonzero).
inline PlantedTriple planted_triple(TetraCase c, int i) {
  if (i < 0 || i >= 10)
    throw std::invalid_argument("planted_triple: index in [0,10)");
  Rng rng(2000 + 100 * std::uint64_t(static_cast<int>(c)) + std::uint64_t(i));
  const int d = i % 6 + 1;
  const int m = 1 + i % 3;

  PlantedTriple out;
  out.name = std::string(to_string(c)) + "-" + std::to_string(i);
  out.expected = c;
  out.rho_expected = LinearFunctional::zero(d);

  const auto directed = [&](const LinearFunctional& driver, double value) {
    Vector u;
    double raw = 0.0;
    do {
      u = detail::gen_coeffs(rng, d, 0.2);
      raw = driver(u);
    } while (std::abs(raw) < 0.05);
    return Vector(value / raw * u);
  };

  const GuardFn everywhere = [](const Vector&) { return true; };

  switch (c) {
    case TetraCase::flat: {
      Matrix l(m, d);
      for (int r = 0; r < m; ++r)
        for (int cc = 0; cc < d; ++cc) l(r, cc) = rng.uniform(-1.0, 1.0);
      l(0, 0) += 1.0;
      Vector u;
      do {
        u = detail::gen_coeffs(rng, d, 0.2) * 0.3;
      } while ((l * u).lpNorm<Eigen::Infinity>() < 1e-3);
      out.direction = u;
      out.triple = GgeTriple::make(
          [l](const Vector& x) { return Vector(l * x); },
          [](const Vector&) { return 1.0; }, [](const Vector&) { return 1.0; },
          everywhere, d, m);
      return out;
    }
    case TetraCase::exponential: {
      const LinearFunctional af{detail::gen_coeffs(rng, d)};
      const Vector y0 = detail::gen_y0(rng, m);
      const double s = rng.uniform(0.4, 2.0);
      const double kappa = detail::gen_weight(rng);
      const double sk = s * kappa;
      out.direction = directed(af, 0.3 / sk);  // gamma(u) = sk alpha(u) = 0.3
      out.gamma_u = 0.3;
      out.triple = GgeTriple::make(
          [af, y0, s, sk](const Vector& x) {
            return Vector(std::expm1(sk * af(x)) / s * y0);
          },
          [](const Vector&) { return 1.0; },
          [af, sk](const Vector& x) { return std::exp(sk * af(x)); },
          everywhere, d, m);
      return out;
    }
    case TetraCase::affine: {
      const LinearFunctional rf{detail::gen_coeffs(rng, d)};
      const Vector y0 = detail::gen_y0(rng, m);
      const double kappa = detail::gen_weight(rng);
      out.direction = directed(rf, 0.3);
      out.rho_u = 0.3;
      out.rho_expected = rf;
      const PopaGroup group(d, rf);
      out.triple = GgeTriple::make(
          [rf, y0, kappa](const Vector& x) {
            return Vector(kappa * std::log1p(rf(x)) * y0);
          },
          [rf](const Vector& x) { return 1.0 + rf(x); },
          [](const Vector&) { return 1.0; },
          [group](const Vector& x) { return group.contains(x); }, d, m);
      return out;
    }
    case TetraCase::power: {
      const LinearFunctional rf{detail::gen_coeffs(rng, d)};
      const Vector y0 = detail::gen_y0(rng, m);
      const double s = rng.uniform(0.4, 2.0);
      double kappa;
      do {
        kappa = detail::gen_weight(rng);
      } while (std::abs(s * kappa - 1.0) < 0.15);  // keep the ray map off identity
      const double sk = s * kappa;
      out.direction = directed(rf, 0.3);
      out.rho_u = 0.3;
      out.gamma_u = sk * 0.3;
      out.rho_expected = rf;
      const PopaGroup group(d, rf);
      out.triple = GgeTriple::make(
          [rf, y0, s, sk](const Vector& x) {
            return Vector(pow1pm1(rf(x), sk) / s * y0);
          },
          [rf](const Vector& x) { return 1.0 + rf(x); },
          [rf, sk](const Vector& x) { return std::exp(sk * std::log1p(rf(x))); },
          [group](const Vector& x) { return group.contains(x); }, d, m);
      return out;
    }
  }
  throw std::invalid_argument("planted_triple: unknown case");
}

}  // namespace goldie
