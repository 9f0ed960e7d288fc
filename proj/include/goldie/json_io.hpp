#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "json.hpp"

#include "goldie/families.hpp"
#include "goldie/gge.hpp"
#include "goldie/index.hpp"
#include "goldie/kernel.hpp"
#include "goldie/link.hpp"
#include "goldie/popa.hpp"
#include "goldie/sigma.hpp"
#include "goldie/types.hpp"

namespace goldie::io {

using json = nlohmann::json;

/// Malformed input (bad JSON, wrong shapes, unknown tags). Maps to the
/// usage exit code, not a verification failure.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline json parse_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("input is not valid JSON");
  return j;
}

inline json load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open input file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open input file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline const json& member(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw ParseError("expected an object at " + path);
  auto it = j.find(key);
  if (it == j.end())
    throw ParseError("missing field \"" + std::string(key) + "\" at " + path);
  return *it;
}

inline const json* opt_member(const json& j, const char* key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

inline double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError("expected a number at " + path);
  return j.get<double>();
}

inline int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError("expected an integer at " + path);
  return j.get<int>();
}

inline std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ParseError("expected a string at " + path);
  return j.get<std::string>();
}

inline Vector as_vector(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError("expected an array at " + path);
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v(Eigen::Index(i)) = as_number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

inline Matrix as_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty())
    throw ParseError("expected a nonempty array of rows at " + path);
  const Vector first = as_vector(j[0], path + "[0]");
  Matrix m(j.size(), first.size());
  m.row(0) = first.transpose();
  for (std::size_t i = 1; i < j.size(); ++i) {
    const Vector row = as_vector(j[i], path + "[" + std::to_string(i) + "]");
    if (row.size() != first.size())
      throw ParseError("ragged matrix rows at " + path);
    m.row(Eigen::Index(i)) = row.transpose();
  }
  return m;
}

inline LinearFunctional parse_functional(const json& j, const std::string& path) {
  if (j.is_array()) return LinearFunctional{as_vector(j, path)};
  return LinearFunctional{as_vector(member(j, "coeffs", path), path + ".coeffs")};
}

inline PopaGroup parse_group(const json& j, const std::string& path) {
  const Vector rho = as_vector(member(j, "rho", path), path + ".rho");
  if (const json* d = opt_member(j, "dim")) {
    if (as_int(*d, path + ".dim") != rho.size())
      throw ParseError("dim does not match rho length at " + path);
  }
  return PopaGroup(int(rho.size()), LinearFunctional{rho});
}

inline AuxiliarySpec parse_aux(const json& j, const std::string& path) {
  const LinearFunctional alpha =
      parse_functional(member(j, "alpha", path), path + ".alpha");
  const LinearFunctional rho =
      parse_functional(member(j, "rho", path), path + ".rho");
  const double beta = as_number(member(j, "beta", path), path + ".beta");
  std::optional<Vector> u_ref;
  if (const json* u = opt_member(j, "u_ref"))
    u_ref = as_vector(*u, path + ".u_ref");
  return AuxiliarySpec::make(alpha, rho, beta, u_ref);
}

inline RadialParams parse_radial(const json& j, const std::string& path) {
  return RadialParams{as_number(member(j, "gamma", path), path + ".gamma"),
                      as_number(member(j, "rho", path), path + ".rho")};
}

inline PopaParameter parse_popa_parameter(const json& j, const std::string& path) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return PopaParameter::inf();
    throw ParseError("expected a number, 0, or \"inf\" at " + path);
  }
  const double v = as_number(j, path);
  if (v == 0.0) return PopaParameter::zero();
  if (v > 0.0) return PopaParameter::finite(v);
  throw ParseError("parameter must be nonnegative or \"inf\" at " + path);
}

inline ScalarHom parse_scalar_hom(const json& j, const std::string& path) {
  return ScalarHom{parse_popa_parameter(member(j, "rho", path), path + ".rho"),
                   parse_popa_parameter(member(j, "sigma", path), path + ".sigma"),
                   as_number(member(j, "kappa", path), path + ".kappa")};
}

inline std::optional<Perturbation> parse_perturbation(const json& j,
                                                      const std::string& path) {
  const json* p = opt_member(j, "perturb");
  if (p == nullptr) return std::nullopt;
  return Perturbation{as_int(member(*p, "coord", path + ".perturb"),
                             path + ".perturb.coord"),
                      as_number(member(*p, "eps", path + ".perturb"),
                                path + ".perturb.eps")};
}

/// Closed-form solution descriptors:
///   {"family":"ray", "rho":[...], "y0":[...], "s":s, "kappa":k, "perturb"?}
///   {"family":"ray", "alpha":[...], ...}  (additive group, exponential ray)
///   {"family":"linear", "l":[[...],...]}
///   {"family":"composite", "rho":[...], "l":[[...],...], "y0":[...], "kappa":k}
inline KernelSpec parse_kernel(const json& j, const std::string& path,
                               bool gated = false) {
  const std::string family =
      as_string(member(j, "family", path), path + ".family");
  if (family == "ray") {
    const Vector y0 = as_vector(member(j, "y0", path), path + ".y0");
    const double s = as_number(member(j, "s", path), path + ".s");
    const double kappa = as_number(member(j, "kappa", path), path + ".kappa");
    const auto perturb = parse_perturbation(j, path);
    if (const json* a = opt_member(j, "alpha"))
      return make_exp_kernel(as_vector(*a, path + ".alpha"), y0, s, kappa,
                             perturb, gated);
    const Vector rho = as_vector(member(j, "rho", path), path + ".rho");
    return make_ray_kernel(rho, y0, s, kappa, perturb, gated);
  }
  if (family == "linear")
    return make_linear_kernel(as_matrix(member(j, "l", path), path + ".l"), gated);
  if (family == "composite")
    return make_composite_kernel(
        as_vector(member(j, "rho", path), path + ".rho"),
        as_matrix(member(j, "l", path), path + ".l"),
        as_vector(member(j, "y0", path), path + ".y0"),
        as_number(member(j, "kappa", path), path + ".kappa"), gated);
  throw ParseError("unknown family \"" + family + "\" at " + path + ".family");
}

/// Triple descriptors pair a map K with independent h and g parts:
///   {"K": <kernel descriptor>,
///    "h": {"kind":"one"} | {"kind":"affine","rho":[...]},
///    "g": {"kind":"one"} | {"kind":"exp","alpha":[...]}
///         | {"kind":"power","rho":[...],"exponent":e}}
inline GgeTriple parse_triple(const json& j, const std::string& path) {
  KernelSpec base = parse_kernel(member(j, "K", path), path + ".K", false);
  const int d = base.dim_x();

  const json& hj = member(j, "h", path);
  const std::string hk = as_string(member(hj, "kind", path + ".h"), path + ".h.kind");
  ScalarFn h;
  GuardFn domain = base.domain_fn();
  if (hk == "one") {
    h = [](const Vector&) { return 1.0; };
  } else if (hk == "affine") {
    const LinearFunctional rho =
        parse_functional(member(hj, "rho", path + ".h"), path + ".h.rho");
    PopaGroup group(d, rho);
    h = [rho](const Vector& x) { return 1.0 + rho(x); };
    domain = [group, inner = base.domain_fn()](const Vector& x) {
      return group.contains(x) && inner(x);
    };
  } else {
    throw ParseError("unknown h kind \"" + hk + "\" at " + path + ".h.kind");
  }

  const json& gj = member(j, "g", path);
  const std::string gk = as_string(member(gj, "kind", path + ".g"), path + ".g.kind");
  ScalarFn g;
  if (gk == "one") {
    g = [](const Vector&) { return 1.0; };
  } else if (gk == "exp") {
    const LinearFunctional alpha =
        parse_functional(member(gj, "alpha", path + ".g"), path + ".g.alpha");
    g = [alpha](const Vector& x) { return std::exp(alpha(x)); };
  } else if (gk == "power") {
    const LinearFunctional rho =
        parse_functional(member(gj, "rho", path + ".g"), path + ".g.rho");
    const double e = as_number(member(gj, "exponent", path + ".g"),
                               path + ".g.exponent");
    g = [rho, e](const Vector& x) { return std::exp(e * std::log1p(rho(x))); };
  } else {
    throw ParseError("unknown g kind \"" + gk + "\" at " + path + ".g.kind");
  }

  return GgeTriple::make(base.kernel_fn(), std::move(h), std::move(g),
                         std::move(domain), d, base.dim_y());
}

inline const char* regime_name(Regime r) {
  return r == Regime::NA ? "NA" : "NB";
}

inline json vec_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json ledger_json(const Ledger& ledger) {
  json a = json::array();
  for (const auto& e : ledger)
    a.push_back({{"name", e.name},
                 {"residual", e.residual},
                 {"tolerance", e.tolerance},
                 {"pass", e.pass}});
  return a;
}

inline json sigma_json(const SigmaBuild& b) {
  json j{{"sigma", {{"coeffs", vec_json(b.sigma.coeffs)}}},
         {"regime", regime_name(b.regime)},
         {"u", vec_json(b.u)},
         {"null_rank", b.v0_basis.cols()},
         {"equation_residual", b.equation_residual},
         {"ledger", ledger_json(b.ledger)},
         {"pass", b.pass}};
  j["v1"] = b.v1.has_value() ? vec_json(*b.v1) : json();
  return j;
}

}  // namespace goldie::io
