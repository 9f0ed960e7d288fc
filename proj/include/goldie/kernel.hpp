#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "goldie/index.hpp"
#include "goldie/link.hpp"
#include "goldie/numeric.hpp"
#include "goldie/popa.hpp"
#include "goldie/types.hpp"

namespace goldie {

using VectorFn = std::function<Vector(const Vector&)>;
using ScalarFn = std::function<double(const Vector&)>;
using GuardFn = std::function<bool(const Vector&)>;

/// Additive corruption of a kernel: K(x) + eps * driver(x) * e_coord.
/// Used by negative controls; a corrupted kernel must fail the residual gate.
struct Perturbation {
  int coord = 0;
  double eps = 0.0;
};

/// Residual of the functional equation K(u o v) = K(u) + g(u) K(v) at one
/// pair, relative to the larger side.
inline double gfe_residual(const VectorFn& K, const ScalarFn& g,
                           const PopaGroup& group, const Vector& u,
                           const Vector& v) {
  group.require_member(u, "gfe_residual u");
  group.require_member(v, "gfe_residual v");
  const Vector w = group.circle(u, v);
  const Vector lhs = K(w);
  const Vector rhs = K(u) + g(u) * K(v);
  const double scale = std::max(lhs.lpNorm<Eigen::Infinity>(),
                                rhs.lpNorm<Eigen::Infinity>());
  return rel_residual(Vector(lhs - rhs), scale);
}

/// Sampling plan for the construction-time residual gate.
struct GateOptions {
  std::uint64_t seed = 0;
  int samples = 1000;
  double tolerance = tol::gate;
};

/// A certified solution pair (K, g) of the functional equation on a Popa
/// group, bundled with the index form of g and the analytic ray data.
/// `make` gates construction behind a sampled residual check; the unchecked
/// variant exists so that externally supplied (possibly bad) descriptors can
/// still be loaded and then rejected by downstream verifiers.
class KernelSpec {
 public:
  using GateOptions = goldie::GateOptions;

  static KernelSpec make(PopaGroup group, int dim_y, VectorFn K, ScalarFn g,
                         AuxiliarySpec aux,
                         std::function<RadialParams(const Vector&)> radial,
                         GateOptions opts = {}) {
    KernelSpec spec(std::move(group), dim_y, std::move(K), std::move(g),
                    std::move(aux), std::move(radial));
    const double worst = spec.gate_residual(opts.seed, opts.samples);
    if (!(worst <= opts.tolerance))
      throw SpecError("KernelSpec: functional-equation gate failed, max residual " +
                      std::to_string(worst));
    return spec;
  }

  static KernelSpec make_unchecked(
      PopaGroup group, int dim_y, VectorFn K, ScalarFn g, AuxiliarySpec aux,
      std::function<RadialParams(const Vector&)> radial) {
    return KernelSpec(std::move(group), dim_y, std::move(K), std::move(g),
                      std::move(aux), std::move(radial));
  }

  Vector operator()(const Vector& x) const { return k_(x); }
  double g(const Vector& x) const { return g_(x); }
  /// Inner auxiliary of the equation on a Popa group: h = eta.
  double h(const Vector& x) const { return group_.eta(x); }

  const PopaGroup& group() const { return group_; }
  const AuxiliarySpec& aux() const { return aux_; }
  int dim_x() const { return group_.dim(); }
  int dim_y() const { return dim_y_; }
  bool in_domain(const Vector& x) const { return group_.contains(x); }

  /// Ray data (gamma(u), rho(u)) of the family along direction u.
  RadialParams radial_params(const Vector& u) const { return radial_(u); }

  VectorFn kernel_fn() const { return k_; }
  ScalarFn aux_fn() const { return g_; }
  ScalarFn inner_fn() const {
    return [grp = group_](const Vector& x) { return grp.eta(x); };
  }
  GuardFn domain_fn() const {
    return [grp = group_](const Vector& x) { return grp.contains(x); };
  }

  /// Max functional-equation residual over `samples` random carrier pairs.
  double gate_residual(std::uint64_t seed, int samples) const {
    Rng rng(seed);
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
      const Vector u = sample_carrier(group_, rng);
      const Vector v = sample_carrier(group_, rng);
      worst = std::max(worst, gfe_residual(k_, g_, group_, u, v));
    }
    return worst;
  }

 private:
  KernelSpec(PopaGroup group, int dim_y, VectorFn K, ScalarFn g,
             AuxiliarySpec aux, std::function<RadialParams(const Vector&)> radial)
      : group_(std::move(group)),
        dim_y_(dim_y),
        k_(std::move(K)),
        g_(std::move(g)),
        aux_(std::move(aux)),
        radial_(std::move(radial)) {
    if (dim_y_ < 1) throw DimensionError("KernelSpec: dim_y must be >= 1");
    if (aux_.dim() != group_.dim())
      throw DimensionError("KernelSpec: auxiliary dimension mismatch");
  }

  PopaGroup group_;
  int dim_y_;
  VectorFn k_;
  ScalarFn g_;
  AuxiliarySpec aux_;
  std::function<RadialParams(const Vector&)> radial_;
};

inline double gfe_residual(const KernelSpec& spec, const Vector& u,
                           const Vector& v) {
  return gfe_residual(spec.kernel_fn(), spec.aux_fn(), spec.group(), u, v);
}

/// Both sides of the iterate-scaling identity
///   K(p_m(h(w)) w) = [p_m / p_n](g(w)) K(p_n(h(w)) w),   w = u/n,
/// each computed two independent ways: closed geometric-sum coefficients and
/// the literal one-step recurrences x <- w + h(w) x, val <- K(w) + g(w) val.
struct IterateScaling {
  int n = 0;
  int m = 0;
  Vector lhs_closed;
  Vector lhs_recurrence;
  Vector rhs_closed;
  Vector rhs_recurrence;
  double pair_residual = 0.0;      // closed vs recurrence, worse of the two sides
  double identity_residual = 0.0;  // lhs vs rhs
};

inline IterateScaling iterate_scaling(const VectorFn& K, const ScalarFn& h,
                                      const ScalarFn& g, const GuardFn& domain,
                                      const Vector& u, int n, int m) {
  if (n < 1 || m < 1)
    throw std::invalid_argument("iterate_scaling: n, m must be positive");
  const Vector w = u / double(n);
  if (!domain(w)) throw DomainError("iterate_scaling: u/n outside domain");
  const double hw = h(w);
  const double gw = g(w);
  const Vector kw = K(w);

  const int top = std::max(n, m);
  Vector x = Vector::Zero(u.size());
  Vector val = Vector::Zero(kw.size());
  Vector x_m, x_n, val_m, val_n;
  for (int j = 1; j <= top; ++j) {
    x = w + hw * x;
    val = kw + gw * val;
    if (!domain(x))
      throw DomainError("iterate_scaling: iterate left the domain at j = " +
                        std::to_string(j));
    if (j == m) {
      x_m = x;
      val_m = val;
    }
    if (j == n) {
      x_n = x;
      val_n = val;
    }
  }

  IterateScaling out;
  out.n = n;
  out.m = m;
  const Vector x_m_closed = geometric_sum(hw, m) * w;
  const Vector x_n_closed = geometric_sum(hw, n) * w;
  const double ratio = geometric_sum(gw, m) / geometric_sum(gw, n);

  out.lhs_closed = K(x_m_closed);
  out.lhs_recurrence = val_m;  // equals K(x_m) whenever (K, g) solves the equation
  out.rhs_closed = ratio * K(x_n_closed);
  out.rhs_recurrence = ratio * val_n;

  const double scale_l = out.lhs_closed.lpNorm<Eigen::Infinity>();
  const double scale_r = out.rhs_closed.lpNorm<Eigen::Infinity>();
  out.pair_residual = std::max(
      rel_residual(Vector(out.lhs_closed - out.lhs_recurrence), scale_l),
      rel_residual(Vector(out.rhs_closed - out.rhs_recurrence), scale_r));
  out.identity_residual = rel_residual(Vector(out.lhs_closed - out.rhs_closed),
                                       std::max(scale_l, scale_r));
  return out;
}

inline IterateScaling iterate_scaling(const KernelSpec& spec, const Vector& u,
                                      int n, int m) {
  return iterate_scaling(spec.kernel_fn(), spec.inner_fn(), spec.aux_fn(),
                         spec.domain_fn(), u, n, m);
}

/// Limit of the coefficient ratio p_{m(n)}(g(u/n)) / p_n(g(u/n)) with
/// m(n) = round(t n). The limit is the exponential-branch link value
/// (e^{gamma t} - 1)/(e^{gamma} - 1) with gamma the directional derivative
/// of g at 0 along u; convergence is O(1/n).
struct IterateLimit {
  double t = 0.0;
  double gamma = 0.0;   // FD directional derivative of g along u
  double target = 0.0;  // exponential-branch link value at t
  std::vector<int> ns;
  std::vector<double> estimates;
  std::vector<double> errors;
  double estimate = 0.0;  // finest-n estimate
  double rate = 0.0;      // log-log slope of the error, NaN if not fittable
  bool rate_ok = false;   // slope within -1 +/- 0.2, or error at rounding floor
};

inline IterateLimit iterate_limit(const ScalarFn& g, const GuardFn& domain,
                                  const Vector& u, double t, int n_max) {
  if (n_max < 4) throw std::invalid_argument("iterate_limit: n_max < 4");
  IterateLimit out;
  out.t = t;
  out.gamma = richardson_derivative(
      [&](double s) {
        const Vector p = s * u;
        if (!domain(p)) throw DomainError("iterate_limit: FD probe left domain");
        return g(p);
      });
  out.target = lambda_link({out.gamma, 0.0}, t);

  for (int n = 8; n <= n_max; n *= 2) {
    const Vector w = u / double(n);
    if (!domain(w)) throw DomainError("iterate_limit: u/n outside domain");
    const int m = int(std::lround(t * n));
    if (m < 0) throw DomainError("iterate_limit: round(t n) < 0");
    const double gw = g(w);
    const double est = geometric_sum(gw, m) / geometric_sum(gw, n);
    out.ns.push_back(n);
    out.estimates.push_back(est);
    out.errors.push_back(std::abs(est - out.target));
  }
  if (out.ns.empty()) throw std::invalid_argument("iterate_limit: empty ladder");
  out.estimate = out.estimates.back();

  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < out.ns.size(); ++i) {
    if (out.errors[i] < 1e-12) continue;  // at the rounding floor
    lx.push_back(std::log(double(out.ns[i])));
    ly.push_back(std::log(out.errors[i]));
  }
  if (lx.size() >= 2) {
    out.rate = fit_slope(lx, ly);
    out.rate_ok = std::abs(out.rate + 1.0) <= 0.2;
  } else {
    out.rate = std::numeric_limits<double>::quiet_NaN();
    out.rate_ok = out.errors.back() < 1e-12;  // converged below measurability
  }
  return out;
}

inline IterateLimit iterate_limit(const KernelSpec& spec, const Vector& u,
                                  double t, int n_max) {
  return iterate_limit(spec.aux_fn(), spec.domain_fn(), u, t, n_max);
}

/// Residual of K(tu) = lambda(t; gamma(u), rho(u)) K(u), relative to |K(u)|.
inline double radiality_residual(const VectorFn& K, const Vector& u, double t,
                                 RadialParams p) {
  const Vector ku = K(u);
  const double scale = ku.lpNorm<Eigen::Infinity>();
  if (scale == 0.0)
    throw DomainError("radiality_residual: K(u) = 0, ray statement is vacuous");
  const Vector lhs = K(t * u);
  const Vector rhs = lambda_link(p, t) * ku;
  return rel_residual(Vector(lhs - rhs), scale);
}

inline double radiality_residual(const KernelSpec& spec, const Vector& u,
                                 double t) {
  return radiality_residual(spec.kernel_fn(), u, t, spec.radial_params(u));
}

/// The switching identity (g(tu) - 1) K(u) = (g(u) - 1) K(tu). Inapplicable
/// (not failing) when g is 1 along the whole sampled ray.
struct SwitchingCheck {
  bool applicable = false;
  double max_residual = 0.0;
};

inline SwitchingCheck switching_residual(const VectorFn& K, const ScalarFn& g,
                                         const Vector& u,
                                         const std::vector<double>& ts) {
  SwitchingCheck out;
  const Vector ku = K(u);
  if (ku.lpNorm<Eigen::Infinity>() == 0.0) return out;  // vacuous, inapplicable
  double g_dev = std::abs(g(u) - 1.0);
  for (double t : ts) g_dev = std::max(g_dev, std::abs(g(t * u) - 1.0));
  if (g_dev <= 1e-12) return out;  // g = 1 on the ray: identity is 0 = 0
  out.applicable = true;
  for (double t : ts) {
    const Vector lhs = (g(t * u) - 1.0) * ku;
    const Vector rhs = (g(u) - 1.0) * K(t * u);
    const double scale = std::max(lhs.lpNorm<Eigen::Infinity>(),
                                  rhs.lpNorm<Eigen::Infinity>());
    out.max_residual =
        std::max(out.max_residual, rel_residual(Vector(lhs - rhs), scale));
  }
  return out;
}

inline SwitchingCheck switching_residual(const KernelSpec& spec, const Vector& u,
                                         const std::vector<double>& ts) {
  return switching_residual(spec.kernel_fn(), spec.aux_fn(), u, ts);
}

/// Decidable surrogate for "K is non-trivial": some sampled direction w has
/// K(w) != 0 and a fitted ray factor at probe t0 = 2 differing from 2, i.e.
/// the ray map is not the identity.
struct NontrivialityCheck {
  bool nontrivial = false;
  std::optional<Vector> witness;
  double max_deviation = 0.0;  // max |fitted lambda_w(2) - 2| over directions
};

inline NontrivialityCheck kernel_nontrivial(const VectorFn& K,
                                            const std::vector<Vector>& dirs,
                                            double threshold = 1e-6) {
  NontrivialityCheck out;
  for (const Vector& w : dirs) {
    const Vector kw = K(w);
    const double n2 = kw.squaredNorm();
    if (n2 == 0.0) continue;
    const double fitted = K(2.0 * w).dot(kw) / n2;
    const double dev = std::abs(fitted - 2.0);
    out.max_deviation = std::max(out.max_deviation, dev);
    if (dev > threshold && !out.nontrivial) {
      out.nontrivial = true;
      out.witness = w;
    }
  }
  return out;
}

/// psi_s(t) = [(1+s)^t - 1]/s, the one-parameter exponential-scaling map;
/// continuously extended to psi_0 = id.
inline double psi_scaling(double s, double t) {
  if (std::abs(s) <= 1e-14) return t;
  return pow1pm1(s, t) / s;
}

/// The induced-homomorphism quantities along a ray with rho(u) > 0:
///   a = e^{rho(u)} - 1,  b = log(1+a) = rho(u),  c = gamma(u)/rho(u),
///   w = (a/rho(u)) u,    b_K = (1+a)^c - 1 = e^{gamma(u)} - 1,
/// together with residuals of the three identities they satisfy.
struct InducedMapsReport {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double b_k = 0.0;
  Vector w;
  double a_circle_residual = 0.0;   // a(su + tu) = a(su) o_1 a(tu)
  double b_additive_residual = 0.0; // log(1 + a o_1 a') splits additively
  double ratio_residual = 0.0;      // [(1+a)^c - 1] K(sw) = [(1+as)^c - 1] K(w)
  double exp_scaling_residual = 0.0;// K(psi_a(t) w) = psi_{b_K}(t) K(w)
};

inline InducedMapsReport induced_maps(const VectorFn& K, const Vector& u,
                                      RadialParams p, double s, double t) {
  if (!(p.rho > 0.0))
    throw DomainError("induced_maps: rho(u) must be positive");
  InducedMapsReport out;
  out.a = std::expm1(p.rho);
  out.b = std::log1p(out.a);
  out.c = p.gamma / p.rho;
  out.b_k = std::expm1(p.gamma);
  out.w = (out.a / p.rho) * u;

  const double a_s = std::expm1(s * p.rho);  // a evaluated at su
  const double a_t = std::expm1(t * p.rho);
  const double a_sum = std::expm1((s + t) * p.rho);
  const double circled = a_s + a_t + a_s * a_t;
  out.a_circle_residual = rel_residual(a_sum - circled, circled);
  out.b_additive_residual = rel_residual(
      std::log1p(circled) - (std::log1p(a_s) + std::log1p(a_t)),
      std::log1p(circled));

  const Vector lhs2 = pow1pm1(out.a, out.c) * K(s * out.w);
  const Vector rhs2 = pow1pm1(out.a * s, out.c) * K(out.w);
  out.ratio_residual =
      rel_residual(Vector(lhs2 - rhs2),
                   std::max(lhs2.lpNorm<Eigen::Infinity>(),
                            rhs2.lpNorm<Eigen::Infinity>()));

  const Vector lhs3 = K(psi_scaling(out.a, t) * out.w);
  const double factor =
      std::abs(out.c) <= tol::branch ? t : psi_scaling(out.b_k, t);
  const Vector rhs3 = factor * K(out.w);
  out.exp_scaling_residual =
      rel_residual(Vector(lhs3 - rhs3),
                   std::max(lhs3.lpNorm<Eigen::Infinity>(),
                            rhs3.lpNorm<Eigen::Infinity>()));
  return out;
}

inline InducedMapsReport induced_maps(const KernelSpec& spec, const Vector& u,
                                      double s, double t) {
  return induced_maps(spec.kernel_fn(), u, spec.radial_params(u), s, t);
}

}  // namespace goldie
