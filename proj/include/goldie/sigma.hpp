#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "goldie/kernel.hpp"
#include "goldie/linalg.hpp"
#include "goldie/types.hpp"

namespace goldie {

/// One named intermediate identity with its sampled residual. A failing
/// entry localizes which step of the construction broke.
struct LedgerEntry {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

using Ledger = std::vector<LedgerEntry>;

inline bool ledger_pass(const Ledger& ledger) {
  return std::all_of(ledger.begin(), ledger.end(),
                     [](const LedgerEntry& e) { return e.pass; });
}

struct RegimeDecision {
  Regime regime = Regime::NA;
  std::optional<Vector> witness;  // NB: nullspace direction with gamma != 0
  NullspaceClassification detail;
};

/// Regime is decided from the auxiliary data alone (a nullspace basis, not
/// samples), so it is deterministic and permutation-stable.
inline RegimeDecision decide_regime(const KernelSpec& spec) {
  RegimeDecision out;
  out.detail = nullspace_classify(spec.aux());
  out.regime = out.detail.regime;
  out.witness = out.detail.witness;
  return out;
}

struct SigmaOptions {
  std::uint64_t seed = 0;
  int ledger_samples = 256;
  int validation_samples = 10000;
  int triviality_samples = 1000;
  double ledger_tol = 1e-9;
  double equation_tol = 1e-8;
  std::optional<Vector> u_hint;  // alternative reference direction (A path)
};

struct SigmaBuild {
  LinearFunctional sigma;
  Regime regime = Regime::NA;
  Vector u;                  // reference with rho(u) = 1, or 0 when unused
  std::optional<Vector> v1;  // NB: rescaled witness with gamma(v1) = 1
  Matrix v0_basis;           // NB: basis of N(gamma) within N(rho)
  Matrix span_kx;            // orthonormal estimate of span K(X)
  double equation_residual = 0.0;
  Ledger ledger;
  bool pass = false;
};

namespace detail {

/// Orthonormal estimate of span K(X): K on the standard basis, the
/// reference point and its basis combinations, plus random carrier points.
inline Matrix estimate_span_kx(const KernelSpec& spec, std::uint64_t seed) {
  const int d = spec.dim_x();
  std::vector<Vector> points;
  for (int i = 0; i < d; ++i) points.push_back(Vector::Unit(d, i) * 0.5);
  if (spec.aux().u_ref().has_value()) {
    const Vector& ur = *spec.aux().u_ref();
    points.push_back(ur);
    for (int i = 0; i < d; ++i) points.push_back(0.25 * Vector::Unit(d, i) + 0.5 * ur);
  }
  Rng rng(seed ^ 0x5eed5eedULL);
  for (int i = 0; i < 2 * d; ++i) points.push_back(sample_carrier(spec.group(), rng));

  Matrix images(spec.dim_y(), Eigen::Index(points.size()));
  Eigen::Index col = 0;
  for (const Vector& p : points)
    if (spec.in_domain(p)) images.col(col++) = spec(p);
  return colspace(images.leftCols(col));
}

inline LedgerEntry make_entry(std::string name, double residual, double tolerance) {
  LedgerEntry e;
  e.name = std::move(name);
  e.residual = residual;
  e.tolerance = tolerance;
  e.pass = residual <= tolerance;
  return e;
}

/// Shared gate entry: the functional-equation residual on a fresh sample.
inline LedgerEntry gate_entry(const KernelSpec& spec, std::uint64_t seed,
                              int samples, double tolerance) {
  return make_entry("GATE", spec.gate_residual(seed, samples), tolerance);
}

}  // namespace detail

/// The regime-NA construction. sigma vanishes on span K(N(rho)) and takes
/// the value g(u) - 1 on the K(u) direction, zero-extended off span K(X).
/// The ledger records the identity chain justifying the extension:
///   A1: sigma K(x) = sigma K(rho(x) u)
///   A2: K(rho(x) u) = lambda_u(rho(x)) K(u)
///   A3: sigma K(x) = lambda_u(rho(x)) (g(u) - 1)
///   A4: g(x) = g(rho(x) u)
///   A5: g(rho(x) u) - 1 = lambda_u(rho(x)) (g(u) - 1)
/// plus GATE (the equation residual) and EQ (g(x) = 1 + sigma K(x) fresh).
inline SigmaBuild build_sigma_a(const KernelSpec& spec,
                                const SigmaOptions& opts = {}) {
  const auto& aux = spec.aux();
  const int d = spec.dim_x();
  const int dy = spec.dim_y();

  SigmaBuild out;
  out.regime = Regime::NA;
  out.span_kx = detail::estimate_span_kx(spec, opts.seed);

  // Span of K on the nullspace of rho.
  Matrix rho_rows(aux.rho_is_zero() ? 0 : 1, d);
  if (!aux.rho_is_zero()) rho_rows.row(0) = aux.rho().coeffs.transpose();
  const Matrix null_rho = nullspace(rho_rows);
  Matrix null_images(dy, null_rho.cols());
  for (Eigen::Index j = 0; j < null_rho.cols(); ++j)
    null_images.col(j) = spec(null_rho.col(j));
  // The computed basis vectors carry rounding-level rho components, so a
  // family that annihilates N(rho) still yields nonzero columns here; left
  // alone, colspace would normalize that noise into spurious directions and
  // swallow every reference candidate. Zero the columns that are rounding
  // artifacts on K's working scale.
  double k_scale = 0.0;
  {
    Rng scale_rng(opts.seed ^ 0x5ca1e5ULL);
    for (int i = 0; i < 8; ++i)
      k_scale = std::max(k_scale, spec(sample_carrier(spec.group(), scale_rng))
                                      .lpNorm<Eigen::Infinity>());
  }
  for (Eigen::Index j = 0; j < null_rho.cols(); ++j)
    if (null_images.col(j).lpNorm<Eigen::Infinity>() <= 1e-9 * k_scale)
      null_images.col(j).setZero();
  const Matrix q_null = colspace(null_images);

  // Deterministic reference candidates: the hint, the frame point, then
  // rescaled basis vectors ordered by |rho(e_j)| descending (first index
  // wins ties).
  std::vector<Vector> candidates;
  if (opts.u_hint.has_value() && !aux.rho_is_zero()) {
    const double r = aux.rho()(*opts.u_hint);
    if (std::abs(r) > tol::rank) candidates.push_back(*opts.u_hint / r);
  }
  if (aux.u_ref().has_value()) candidates.push_back(*aux.u_ref());
  if (!aux.rho_is_zero()) {
    std::vector<int> order;
    for (int j = 0; j < d; ++j)
      if (std::abs(aux.rho().coeffs(j)) > tol::rank) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
      return std::abs(aux.rho().coeffs(i)) > std::abs(aux.rho().coeffs(j));
    });
    for (int j : order)
      candidates.push_back(Vector::Unit(d, j) / aux.rho().coeffs(j));
  }

  Vector u = Vector::Zero(d);
  Vector q = Vector::Zero(dy);
  bool have_u = false;
  for (const Vector& cand : candidates) {
    if (!spec.in_domain(cand)) continue;
    const Vector ku = spec(cand);
    if (ku.lpNorm<Eigen::Infinity>() == 0.0) continue;
    if (std::abs(spec.g(cand) - 1.0) <= 1e-9) continue;
    Vector proj = ku;
    if (q_null.cols() > 0) proj -= q_null * (q_null.transpose() * ku);
    if (proj.norm() <= 1e-12 * (1.0 + ku.norm())) continue;
    u = cand;
    q = proj;
    have_u = true;
    break;
  }

  if (have_u) {
    out.sigma.coeffs = (spec.g(u) - 1.0) / q.squaredNorm() * q;
  } else {
    // No usable reference: the construction degenerates and sigma = 0 is
    // the answer, which is only consistent if g is identically 1.
    out.sigma = LinearFunctional::zero(dy);
    Rng rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
    double worst = 0.0;
    for (int i = 0; i < opts.triviality_samples; ++i) {
      const Vector x = sample_carrier(spec.group(), rng);
      worst = std::max(worst, std::abs(spec.g(x) - 1.0));
    }
    if (worst > opts.ledger_tol)
      throw SpecError(
          "build_sigma_a: no reference direction found but g is not "
          "identically 1 (max |g-1| = " + std::to_string(worst) + ")");
  }
  out.u = u;

  // Ray data at u for the lambda factor: gamma(u) = alpha(u) + beta rho(u).
  const RadialParams pu{have_u ? aux.alpha()(u) + aux.beta() : 0.0,
                        have_u ? 1.0 : 0.0};
  const double gu1 = have_u ? spec.g(u) - 1.0 : 0.0;
  const Vector ku = have_u ? Vector(spec(u)) : Vector(Vector::Zero(dy));
  const double ku_scale = ku.lpNorm<Eigen::Infinity>();

  out.ledger.push_back(
      detail::gate_entry(spec, opts.seed + 17, opts.ledger_samples, tol::gate));

  double a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0;
  Rng rng(opts.seed);
  for (int i = 0; i < opts.ledger_samples; ++i) {
    const Vector x = sample_carrier(spec.group(), rng);
    const double rx = aux.rho()(x);
    const Vector xu = rx * u;
    if (!spec.in_domain(xu)) continue;
    const double lam = lambda_link(pu, rx);
    const double skx = out.sigma(spec(x));
    const double skxu = out.sigma(spec(xu));
    a1 = std::max(a1, rel_residual(skx - skxu, skxu));
    a2 = std::max(a2, rel_residual(Vector(spec(xu) - lam * ku), ku_scale));
    a3 = std::max(a3, rel_residual(skx - lam * gu1, lam * gu1));
    a4 = std::max(a4, rel_residual(spec.g(x) - spec.g(xu), spec.g(xu)));
    a5 = std::max(a5, rel_residual((spec.g(xu) - 1.0) - lam * gu1, lam * gu1));
  }
  out.ledger.push_back(detail::make_entry("A1", a1, opts.ledger_tol));
  out.ledger.push_back(detail::make_entry("A2", a2, opts.ledger_tol));
  out.ledger.push_back(detail::make_entry("A3", a3, opts.ledger_tol));
  out.ledger.push_back(detail::make_entry("A4", a4, opts.ledger_tol));
  out.ledger.push_back(detail::make_entry("A5", a5, opts.ledger_tol));

  Rng fresh(opts.seed + 1);
  double eq = 0.0;
  for (int i = 0; i < opts.validation_samples; ++i) {
    const Vector x = sample_carrier(spec.group(), fresh);
    const double lhs = spec.g(x) - 1.0;
    eq = std::max(eq, rel_residual(lhs - out.sigma(spec(x)), lhs));
  }
  out.equation_residual = eq;
  out.ledger.push_back(detail::make_entry("EQ", eq, opts.equation_tol));
  out.pass = ledger_pass(out.ledger);
  return out;
}

/// The regime-NB construction. The carrier splits as V0 + <v1> + <u> with
/// V0 the common nullspace of gamma and rho, gamma(v1) = 1, rho(u) = 1
/// (u = 0 when rho vanishes identically); sigma is assembled from its
/// required values on K(V0), K(v1), K(u) by a minimum-norm solve, which
/// realizes the zero-extension off their span. Ledger:
///   B1: sigma K(v1) = g(v1) - 1
///   B2: sigma K(u) = g(u) - 1
///   DEC: g(x) = g(v0) g(a v1) g(rho(x) u) for the decomposition of x
/// plus GATE and EQ as in the A path.
inline SigmaBuild build_sigma_b(const KernelSpec& spec, const Vector& witness,
                                const SigmaOptions& opts = {}) {
  const auto& aux = spec.aux();
  const int d = spec.dim_x();
  const int dy = spec.dim_y();

  SigmaBuild out;
  out.regime = Regime::NB;
  out.span_kx = detail::estimate_span_kx(spec, opts.seed);

  const double gw = aux.gamma_log(witness);
  if (std::abs(gw) <= tol::rank)
    throw SpecError("build_sigma_b: witness has gamma = 0");
  const Vector v1 = witness / gw;
  out.v1 = v1;

  const bool have_u = aux.u_ref().has_value();
  const Vector u = have_u ? *aux.u_ref() : Vector(Vector::Zero(d));
  out.u = u;

  // V0: nullspace of the stacked functionals (gamma restricted to N(rho)
  // is alpha, so stacking alpha and rho rows captures N*(gamma)).
  int nrows = (aux.alpha_is_zero() ? 0 : 1) + (aux.rho_is_zero() ? 0 : 1);
  Matrix rows(nrows, d);
  int r = 0;
  if (!aux.alpha_is_zero()) rows.row(r++) = aux.alpha().coeffs.transpose();
  if (!aux.rho_is_zero()) rows.row(r++) = aux.rho().coeffs.transpose();
  out.v0_basis = nullspace(rows);

  // Constraint rows K(.)^T sigma = g(.) - 1 on the decomposition pieces.
  const Eigen::Index ncons = out.v0_basis.cols() + 1 + (have_u ? 1 : 0);
  Matrix a(ncons, dy);
  Vector b(ncons);
  Eigen::Index row = 0;
  for (Eigen::Index j = 0; j < out.v0_basis.cols(); ++j) {
    a.row(row) = spec(out.v0_basis.col(j)).transpose();
    b(row++) = 0.0;
  }
  a.row(row) = spec(v1).transpose();
  b(row++) = spec.g(v1) - 1.0;
  if (have_u) {
    a.row(row) = spec(u).transpose();
    b(row++) = spec.g(u) - 1.0;
  }
  out.sigma.coeffs = min_norm_solve(a, b);
  const double solve_residual =
      (a * out.sigma.coeffs - b).lpNorm<Eigen::Infinity>();
  if (solve_residual > 1e-8 * (1.0 + b.lpNorm<Eigen::Infinity>()))
    throw SpecError(
        "build_sigma_b: block values are inconsistent, no linear sigma "
        "matches (residual " + std::to_string(solve_residual) + ")");

  out.ledger.push_back(
      detail::gate_entry(spec, opts.seed + 17, opts.ledger_samples, tol::gate));

  const double b1 = rel_residual(out.sigma(spec(v1)) - (spec.g(v1) - 1.0),
                                 spec.g(v1) - 1.0);
  const double b2 = have_u ? rel_residual(out.sigma(spec(u)) - (spec.g(u) - 1.0),
                                          spec.g(u) - 1.0)
                           : 0.0;
  out.ledger.push_back(detail::make_entry("B1", b1, opts.ledger_tol));
  out.ledger.push_back(detail::make_entry("B2", b2, opts.ledger_tol));

  double dec = 0.0;
  Rng rng(opts.seed);
  for (int i = 0; i < opts.ledger_samples; ++i) {
    const Vector x = sample_carrier(spec.group(), rng);
    const double rx = aux.rho()(x);
    const Vector pi = x - rx * u;  // u = 0 keeps pi = x
    const double ax = aux.gamma_log(pi);
    const Vector v0 = pi - ax * v1;
    const Vector xu = rx * u;
    if (!spec.in_domain(v0) || !spec.in_domain(ax * v1) || !spec.in_domain(xu))
      continue;
    const double product = spec.g(v0) * spec.g(ax * v1) * spec.g(xu);
    dec = std::max(dec, rel_residual(spec.g(x) - product, product));
  }
  out.ledger.push_back(detail::make_entry("DEC", dec, opts.ledger_tol));

  Rng fresh(opts.seed + 1);
  double eq = 0.0;
  for (int i = 0; i < opts.validation_samples; ++i) {
    const Vector x = sample_carrier(spec.group(), fresh);
    const double lhs = spec.g(x) - 1.0;
    eq = std::max(eq, rel_residual(lhs - out.sigma(spec(x)), lhs));
  }
  out.equation_residual = eq;
  out.ledger.push_back(detail::make_entry("EQ", eq, opts.equation_tol));
  out.pass = ledger_pass(out.ledger);
  return out;
}

/// Regime dispatch: decide, then run the matching construction.
inline SigmaBuild build_sigma(const KernelSpec& spec,
                              const SigmaOptions& opts = {}) {
  const RegimeDecision decision = decide_regime(spec);
  if (decision.regime == Regime::NB)
    return build_sigma_b(spec, *decision.witness, opts);
  return build_sigma_a(spec, opts);
}

/// Max over sampled carrier points of |sigma1(K(x)) - sigma2(K(x))|. Two
/// valid constructions may differ off span K(X) but never on it.
inline double sigma_uniqueness_gap(const KernelSpec& spec,
                                   const LinearFunctional& sigma1,
                                   const LinearFunctional& sigma2,
                                   std::uint64_t seed = 0, int samples = 1000) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const Vector kx = spec(sample_carrier(spec.group(), rng));
    worst = std::max(worst, std::abs(sigma1(kx) - sigma2(kx)));
  }
  return worst;
}

/// Residual of the homomorphism forms at one pair: the scalar identity
/// sigma K(u o v) = sigma K(u) o_1 sigma K(v) and the vector identity
/// K(u o v) = K(u) + K(v) + sigma(K(u)) K(v). Returns the worse of the two.
inline double sigma_hom_residual(const KernelSpec& spec,
                                 const LinearFunctional& sigma, const Vector& u,
                                 const Vector& v) {
  const Vector w = spec.group().circle(u, v);
  const Vector ku = spec(u), kv = spec(v), kw = spec(w);
  const double su = sigma(ku), sv = sigma(kv), sw = sigma(kw);

  const double scalar_rhs = su + sv + su * sv;
  const double scalar_res = rel_residual(sw - scalar_rhs, scalar_rhs);

  const Vector vec_rhs = ku + kv + su * kv;
  const double scale = std::max(kw.lpNorm<Eigen::Infinity>(),
                                vec_rhs.lpNorm<Eigen::Infinity>());
  const double vec_res = rel_residual(Vector(kw - vec_rhs), scale);
  return std::max(scalar_res, vec_res);
}

}  // namespace goldie
