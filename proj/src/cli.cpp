#include "goldie/cli.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "goldie/families.hpp"
#include "goldie/gge.hpp"
#include "goldie/index.hpp"
#include "goldie/json_io.hpp"
#include "goldie/kernel.hpp"
#include "goldie/link.hpp"
#include "goldie/popa.hpp"
#include "goldie/report.hpp"
#include "goldie/sigma.hpp"
#include "goldie/subprocess.hpp"

namespace goldie::cli {
namespace {

using io::json;

struct Context {
  std::string command;
  std::string input_path;
  json input;
  std::uint64_t seed = 0;
  int samples = 0;      // 0: use the verb's default
  double tol = -1.0;    // negative: use the verb's default
  bool parallel = false;
  std::string out_path;
};

int samples_or(const Context& ctx, int dflt) {
  return ctx.samples > 0 ? ctx.samples : dflt;
}

double tol_or(const Context& ctx, double dflt) {
  return ctx.tol >= 0.0 ? ctx.tol : dflt;
}

/// Evaluates f(0..n-1) into an index-addressed vector. With `parallel`,
/// indices are distributed over threads; results land at their own index,
/// so the output (and everything derived from it) is order-independent.
std::vector<double> map_indexed(std::size_t n, bool parallel,
                                const std::function<double(std::size_t)>& f) {
  std::vector<double> out(n, 0.0);
  const unsigned hw = std::thread::hardware_concurrency();
  if (!parallel || hw < 2 || n < 64) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  const unsigned workers = std::min(hw, 8u);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    constexpr std::size_t kBlock = 64;
    for (;;) {
      const std::size_t begin = next.fetch_add(kBlock);
      if (begin >= n) return;
      const std::size_t end = std::min(n, begin + kBlock);
      try {
        for (std::size_t i = begin; i < end; ++i) out[i] = f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  for (unsigned w = 0; w < workers; ++w) threads.emplace_back(body);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

void add_all(ResidualStats& stats, const std::vector<double>& values) {
  for (double v : values) stats.add(v);
}

double max_of(const std::vector<double>& values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  return m;
}

void push(Ledger& ledger, std::string name, double residual, double tolerance) {
  ledger.push_back(detail::make_entry(std::move(name), residual, tolerance));
}

/// Shared verdict rule: pass iff the worst recorded residual is within the
/// command tolerance and every ledger identity holds. A handler that set a
/// verdict already (fail, inapplicable) keeps it.
void finish(io::RunReport& rep, const ResidualStats& stats, double tolerance) {
  rep.residuals = stats;
  if (rep.verdict.empty())
    rep.verdict =
        stats.max() <= tolerance && ledger_pass(rep.ledger) ? "pass" : "fail";
}

const json& kernel_block(const json& input) {
  if (input.contains("family")) return input;
  return io::member(input, "kernel", "$");
}

KernelSpec load_kernel(const json& input) {
  return io::parse_kernel(kernel_block(input), "$", /*gated=*/false);
}

std::vector<Vector> load_directions(const json& input, const KernelSpec& spec,
                                    std::uint64_t seed) {
  std::vector<Vector> dirs;
  if (const json* d = io::opt_member(input, "directions")) {
    for (std::size_t i = 0; i < d->size(); ++i)
      dirs.push_back(io::as_vector((*d)[i], "$.directions[" + std::to_string(i) + "]"));
    return dirs;
  }
  Rng rng(seed ^ 0xd14ec7d14ec7ULL);
  for (int i = 0; i < 3 && int(dirs.size()) < 3; ++i) {
    const Vector u = sample_carrier(spec.group(), rng);
    dirs.push_back(u);
    if (spec.in_domain(Vector(-u))) dirs.push_back(Vector(-u));
  }
  return dirs;
}

// --------------------------------------------------------------- group

void cmd_group_verify(Context& ctx, io::RunReport& rep) {
  const PopaGroup group = io::parse_group(ctx.input, "$");
  const int n = samples_or(ctx, 1000);
  const double tolerance = tol_or(ctx, tol::residual);

  Rng rng(ctx.seed);
  std::vector<Vector> us, vs, ws;
  for (int i = 0; i < n; ++i) {
    us.push_back(sample_carrier(group, rng));
    vs.push_back(sample_carrier(group, rng));
    ws.push_back(sample_carrier(group, rng));
  }

  const LinearFunctional& rho = group.rho();
  const bool with_projection = !rho.is_zero();
  std::optional<Vector> u_ref;
  if (with_projection) {
    const int j = detail::argmax_abs(rho.coeffs);
    u_ref = Vector::Unit(group.dim(), j) / rho.coeffs(j);
  }
  const Vector zero = Vector::Zero(group.dim());

  std::vector<double> assoc(n), ident(n), inv(n), etam(n), proj(n, 0.0);
  const std::vector<double> worst =
      map_indexed(std::size_t(n), ctx.parallel, [&](std::size_t i) {
        const Vector &u = us[i], &v = vs[i], &w = ws[i];
        const Vector uv = group.circle(u, v);
        const Vector vw = group.circle(v, w);
        assoc[i] = rel_residual(Vector(group.circle(uv, w) - group.circle(u, vw)),
                                group.circle(u, vw));
        ident[i] = std::max(rel_residual(Vector(group.circle(u, zero) - u), u),
                            rel_residual(Vector(group.circle(zero, u) - u), u));
        inv[i] =
            std::max(rel_residual(group.circle(u, group.inverse(u)), u),
                     rel_residual(group.circle(group.inverse(u), u), u));
        const double ref = group.eta(u) * group.eta(v);
        etam[i] = rel_residual(group.eta(uv) - ref, ref);
        if (with_projection)
          proj[i] = rel_residual(rho(project_off(rho, *u_ref, u)), rho(u));
        double r = std::max({assoc[i], ident[i], inv[i], etam[i], proj[i]});
        return r;
      });

  ResidualStats stats;
  add_all(stats, worst);
  push(rep.ledger, "associativity", max_of(assoc), tolerance);
  push(rep.ledger, "identity", max_of(ident), tolerance);
  push(rep.ledger, "inverse", max_of(inv), tolerance);
  push(rep.ledger, "eta-multiplicative", max_of(etam), 1e-12);
  if (with_projection)
    push(rep.ledger, "projection", max_of(proj), tolerance);
  rep.results["dim"] = group.dim();
  rep.results["additive"] = rho.is_zero();
  finish(rep, stats, tolerance);
}

// ---------------------------------------------------------------- link

void cmd_link_eval(Context& ctx, io::RunReport& rep) {
  const RadialParams p = io::parse_radial(ctx.input, "$");
  const Vector ts = io::as_vector(io::member(ctx.input, "t", "$"), "$.t");
  const double tolerance = tol_or(ctx, tol::residual);

  json lambda = json::array(), gs = json::array();
  for (Eigen::Index i = 0; i < ts.size(); ++i) {
    lambda.push_back(lambda_link(p, ts(i)));
    gs.push_back(g_radial(p, ts(i)));
  }
  rep.results["lambda"] = lambda;
  rep.results["g"] = gs;
  rep.results["identity_like"] = std::abs(p.gamma - p.rho) <= tol::branch;

  ResidualStats stats;
  const double at0 = std::abs(lambda_link(p, 0.0));
  const double at1 = std::abs(lambda_link(p, 1.0) - 1.0);
  stats.add(at0);
  stats.add(at1);
  push(rep.ledger, "endpoint-zero", at0, 0.0);
  push(rep.ledger, "endpoint-one", at1, 0.0);
  finish(rep, stats, tolerance);
}

void cmd_link_check(Context& ctx, io::RunReport& rep) {
  std::vector<RadialParams> pairs;
  if (const json* arr = io::opt_member(ctx.input, "pairs")) {
    for (std::size_t i = 0; i < arr->size(); ++i)
      pairs.push_back(io::parse_radial((*arr)[i], "$.pairs[" + std::to_string(i) + "]"));
  } else {
    pairs.push_back(io::parse_radial(ctx.input, "$"));
  }
  const int n = samples_or(ctx, 200);
  const double tolerance = tol_or(ctx, tol::residual);

  ResidualStats stats;
  double law = 0.0, endpoint = 0.0, fixed = 0.0;
  int identity_pairs = 0;
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const RadialParams p = pairs[pi];
    const double e0 = std::abs(lambda_link(p, 0.0));
    const double e1 = std::abs(lambda_link(p, 1.0) - 1.0);
    endpoint = std::max({endpoint, e0, e1});
    stats.add(e0);
    stats.add(e1);

    Rng rng(ctx.seed + 0x9e3779b9ULL * (pi + 1));
    std::vector<double> ss, tts;
    while (int(ss.size()) < n) {
      const double s = rng.uniform(-0.8, 1.6);
      const double t = rng.uniform(-0.8, 1.6);
      if (1.0 + p.rho * s > 0.05 && 1.0 + p.rho * t > 0.05) {
        ss.push_back(s);
        tts.push_back(t);
      }
    }
    const std::vector<double> res =
        map_indexed(std::size_t(n), ctx.parallel, [&](std::size_t i) {
          return lambda_law_residual(p, ss[i], tts[i]);
        });
    add_all(stats, res);
    law = std::max(law, max_of(res));

    if (std::abs(p.gamma) <= tol::branch && std::abs(p.rho) <= tol::branch) {
      ++identity_pairs;  // lambda = id: every point is fixed, nothing to scan
      continue;
    }
    const FixedPointScan scan = lambda_fixed_point_scan(p);
    if (scan.identity_like) {
      ++identity_pairs;
      continue;
    }
    double dev = scan.unique_nonzero ? 0.0 : 1.0;
    for (double r : scan.roots)
      dev = std::max(dev, std::min(std::abs(r), std::abs(r - 1.0)));
    fixed = std::max(fixed, dev);
    stats.add(dev);
  }
  push(rep.ledger, "law", law, tolerance);
  push(rep.ledger, "endpoint-exact", endpoint, 0.0);
  push(rep.ledger, "fixed-points", fixed, tol::root);
  rep.results["pairs"] = pairs.size();
  rep.results["identity_pairs"] = identity_pairs;
  finish(rep, stats, tolerance);
}

json param_json(const PopaParameter& p) {
  if (p.is_zero()) return json(0.0);
  if (p.is_inf()) return json("inf");
  return json(p.value());
}

double sample_parameter_carrier(const PopaParameter& p, Rng& rng) {
  for (int tries = 0; tries < 10000; ++tries) {
    const double t = rng.uniform(p.is_inf() ? 0.05 : -1.5, 2.0);
    if (p.is_zero()) return t;
    if (p.is_inf() && t > 0.05) return t;
    if (p.is_finite() && 1.0 + p.value() * t > 0.05) return t;
  }
  throw DomainError("link table: carrier sampling failed");
}

void cmd_link_table(Context& ctx, io::RunReport& rep) {
  std::vector<ScalarHom> cells;
  if (const json* arr = io::opt_member(ctx.input, "cells")) {
    for (std::size_t i = 0; i < arr->size(); ++i)
      cells.push_back(io::parse_scalar_hom((*arr)[i], "$.cells[" + std::to_string(i) + "]"));
  } else {
    cells.push_back(io::parse_scalar_hom(ctx.input, "$"));
  }
  const int n = samples_or(ctx, 200);
  const double tolerance = tol_or(ctx, tol::residual);

  ResidualStats stats;
  json out_cells = json::array();
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const ScalarHom& hom = cells[ci];
    Rng rng(ctx.seed + 0x51ab5ULL * (ci + 1));
    std::vector<double> ss, tts;
    while (int(ss.size()) < n) {
      ss.push_back(sample_parameter_carrier(hom.rho, rng));
      tts.push_back(sample_parameter_carrier(hom.rho, rng));
    }
    const std::vector<double> res =
        map_indexed(std::size_t(n), ctx.parallel, [&](std::size_t i) {
          return scalar_hom_residual(hom, ss[i], tts[i]);
        });
    add_all(stats, res);
    push(rep.ledger, "cell-" + std::to_string(ci), max_of(res), tolerance);
    out_cells.push_back({{"rho", param_json(hom.rho)},
                         {"sigma", param_json(hom.sigma)},
                         {"kappa", hom.kappa},
                         {"injective", hom.injective()},
                         {"max_residual", max_of(res)}});
  }
  rep.results["cells"] = out_cells;
  finish(rep, stats, tolerance);
}

// --------------------------------------------------------------- index

void cmd_index_eval(Context& ctx, io::RunReport& rep) {
  const AuxiliarySpec aux = io::parse_aux(io::member(ctx.input, "aux", "$"), "$.aux");
  const json& pts = io::member(ctx.input, "points", "$");
  const double tolerance = tol_or(ctx, tol::residual);

  json gs = json::array(), gammas = json::array();
  bool finite = true;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vector x = io::as_vector(pts[i], "$.points[" + std::to_string(i) + "]");
    const double g = aux.g_eval(x);
    const double gl = aux.gamma_log(x);
    finite = finite && std::isfinite(g) && std::isfinite(gl);
    gs.push_back(g);
    gammas.push_back(gl);
  }
  rep.results["g"] = gs;
  rep.results["gamma"] = gammas;
  rep.results["beta"] = aux.beta();
  rep.results["gamma_at_uref"] =
      aux.u_ref().has_value() ? json(aux.gamma_of_uref()) : json();

  ResidualStats stats;
  push(rep.ledger, "finite-values", finite ? 0.0 : 1.0, 0.0);
  stats.add(finite ? 0.0 : 1.0);
  finish(rep, stats, tolerance);
}

void cmd_index_verify(Context& ctx, io::RunReport& rep) {
  const AuxiliarySpec aux = io::parse_aux(io::member(ctx.input, "aux", "$"), "$.aux");
  const int n = samples_or(ctx, 1000);
  const double tolerance = tol_or(ctx, tol::residual);
  const PopaGroup group(aux.dim(), aux.rho());

  Rng rng(ctx.seed);
  std::vector<Vector> us, vs;
  for (int i = 0; i < n; ++i) {
    us.push_back(sample_carrier(group, rng));
    vs.push_back(sample_carrier(group, rng));
  }

  std::vector<double> defect(static_cast<std::size_t>(n));
  std::vector<double> mult(static_cast<std::size_t>(n), 0.0);
  const bool expect_multiplicative = aux.multiplicative();
  const std::vector<double> res =
      map_indexed(std::size_t(n), ctx.parallel, [&](std::size_t i) {
        defect[i] = defect_identity_residual(aux, us[i], vs[i]);
        if (expect_multiplicative)
          mult[i] = multiplicativity_residual(aux, us[i], vs[i]);
        return std::max(defect[i], mult[i]);
      });

  ResidualStats stats;
  add_all(stats, res);
  push(rep.ledger, "defect-identity", max_of(defect), tolerance);
  if (expect_multiplicative)
    push(rep.ledger, "multiplicative", max_of(mult), tolerance);

  const Vector w = aux.u_ref().has_value() ? *aux.u_ref()
                                           : Vector(0.5 * Vector::Unit(aux.dim(), 0));
  std::vector<double> ts;
  for (double t : {-0.4, 0.3, 0.8, 1.5, 2.0})
    if (group.contains(Vector(t * w))) ts.push_back(t);
  const RadialFormCheck radial = radial_g_form(aux, w, ts, tolerance);
  stats.add(radial.max_residual);
  push(rep.ledger, "radial-form", radial.max_residual, tolerance);

  rep.results["multiplicative"] = expect_multiplicative;
  rep.results["radial_power_branch"] = radial.power_branch;
  finish(rep, stats, tolerance);
}

void cmd_index_classify(Context& ctx, io::RunReport& rep) {
  const AuxiliarySpec aux = io::parse_aux(io::member(ctx.input, "aux", "$"), "$.aux");
  const double tolerance = tol_or(ctx, 1e-9);
  const NullspaceClassification nc = nullspace_classify(aux, tolerance);

  json gammas = json::array();
  for (double g : nc.gamma_on_basis) gammas.push_back(g);
  rep.results["regime"] = io::regime_name(nc.regime);
  rep.results["null_dim"] = nc.null_basis.cols();
  rep.results["gamma_on_basis"] = gammas;
  rep.results["max_gamma"] = nc.max_gamma;
  rep.results["witness"] =
      nc.witness.has_value() ? io::vec_json(*nc.witness) : json();

  ResidualStats stats;
  const double decision = nc.regime == Regime::NA ? nc.max_gamma : 0.0;
  stats.add(decision);
  push(rep.ledger, "regime-decision", decision, tolerance);
  finish(rep, stats, tolerance);
}

// -------------------------------------------------------------- kernel

void cmd_kernel_verify(Context& ctx, io::RunReport& rep) {
  const KernelSpec spec = load_kernel(ctx.input);
  const int n = samples_or(ctx, 1000);
  const double tolerance = tol_or(ctx, tol::residual);

  Rng rng(ctx.seed);
  std::vector<Vector> us, vs;
  for (int i = 0; i < n; ++i) {
    us.push_back(sample_carrier(spec.group(), rng));
    vs.push_back(sample_carrier(spec.group(), rng));
  }
  std::vector<double> index_form(static_cast<std::size_t>(n));
  const std::vector<double> res =
      map_indexed(std::size_t(n), ctx.parallel, [&](std::size_t i) {
        const double predicted = spec.aux().g_eval(us[i]);
        index_form[i] = rel_residual(spec.g(us[i]) - predicted, predicted);
        return std::max(gfe_residual(spec, us[i], vs[i]), index_form[i]);
      });

  ResidualStats stats;
  add_all(stats, res);
  push(rep.ledger, "equation", max_of(res), tolerance);
  push(rep.ledger, "index-form", max_of(index_form), tolerance);
  rep.results["dim_x"] = spec.dim_x();
  rep.results["dim_y"] = spec.dim_y();
  finish(rep, stats, tolerance);
}

void cmd_kernel_radial(Context& ctx, io::RunReport& rep) {
  const KernelSpec spec = load_kernel(ctx.input);
  const int n = samples_or(ctx, 200);
  const double tolerance = tol_or(ctx, tol::residual);
  const std::vector<Vector> dirs = load_directions(ctx.input, spec, ctx.seed);

  ResidualStats stats;
  double rad = 0.0, a_circle = 0.0, b_add = 0.0, ratio = 0.0, exp_scaling = 0.0;
  int induced_runs = 0;
  Rng rng(ctx.seed + 1);
  for (const Vector& u : dirs) {
    if (spec(u).lpNorm<Eigen::Infinity>() == 0.0) continue;
    for (int i = 0; i < n; ++i) {
      const double t = rng.uniform(-0.5, 2.5);
      if (!spec.in_domain(Vector(t * u))) continue;
      const double r = radiality_residual(spec, u, t);
      stats.add(r);
      rad = std::max(rad, r);
    }
    if (spec.radial_params(u).rho > 0.0) {
      for (int i = 0; i < 8; ++i) {
        const double s = rng.uniform(-0.5, 1.5);
        const double t = rng.uniform(-1.5, 2.5);
        try {
          const InducedMapsReport im = induced_maps(spec, u, s, t);
          ++induced_runs;
          a_circle = std::max(a_circle, im.a_circle_residual);
          b_add = std::max(b_add, im.b_additive_residual);
          ratio = std::max(ratio, im.ratio_residual);
          exp_scaling = std::max(exp_scaling, im.exp_scaling_residual);
          stats.add(std::max({im.a_circle_residual, im.b_additive_residual,
                              im.ratio_residual, im.exp_scaling_residual}));
        } catch (const DomainError&) {
          continue;  // the sampled (s, t) left the ray's domain
        }
      }
    }
  }
  push(rep.ledger, "radiality", rad, tolerance);
  if (induced_runs > 0) {
    push(rep.ledger, "a-circle", a_circle, tolerance);
    push(rep.ledger, "b-additive", b_add, tolerance);
    push(rep.ledger, "ratio", ratio, tolerance);
    push(rep.ledger, "exp-scaling", exp_scaling, tolerance);
  }
  rep.results["directions"] = dirs.size();
  rep.results["induced_map_samples"] = induced_runs;
  finish(rep, stats, tolerance);
}

void cmd_kernel_switch(Context& ctx, io::RunReport& rep) {
  const KernelSpec spec = load_kernel(ctx.input);
  const int n = samples_or(ctx, 50);
  const double tolerance = tol_or(ctx, tol::residual);
  const std::vector<Vector> dirs = load_directions(ctx.input, spec, ctx.seed);

  ResidualStats stats;
  Rng rng(ctx.seed + 2);
  double worst = 0.0;
  int applicable = 0;
  for (const Vector& u : dirs) {
    std::vector<double> ts;
    while (int(ts.size()) < n) {
      const double t = rng.uniform(-0.5, 2.5);
      if (spec.in_domain(Vector(t * u))) ts.push_back(t);
    }
    const SwitchingCheck sc = switching_residual(spec, u, ts);
    if (!sc.applicable) continue;
    ++applicable;
    stats.add(sc.max_residual);
    worst = std::max(worst, sc.max_residual);
  }
  // The nontriviality probe evaluates K at w and 2w; keep both in domain.
  std::vector<Vector> nt_dirs;
  for (const Vector& u : dirs)
    if (spec.in_domain(u) && spec.in_domain(Vector(2.0 * u)))
      nt_dirs.push_back(u);
  const NontrivialityCheck nt = kernel_nontrivial(spec.kernel_fn(), nt_dirs);
  rep.results["nontrivial"] = nt.nontrivial;
  rep.results["applicable_directions"] = applicable;
  rep.results["directions"] = dirs.size();
  if (applicable == 0) {
    rep.verdict = "inapplicable";
    finish(rep, stats, tolerance);
    return;
  }
  push(rep.ledger, "switching", worst, tolerance);
  finish(rep, stats, tolerance);
}

void cmd_kernel_lemma4(Context& ctx, io::RunReport& rep) {
  const KernelSpec spec = load_kernel(ctx.input);
  const double tolerance = tol_or(ctx, tol::residual);
  Rng rng(ctx.seed);
  const Vector u = io::opt_member(ctx.input, "u") != nullptr
                       ? io::as_vector(ctx.input["u"], "$.u")
                       : sample_carrier(spec.group(), rng);

  std::vector<std::pair<int, int>> iterates;
  if (const json* arr = io::opt_member(ctx.input, "iterates")) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string path = "$.iterates[" + std::to_string(i) + "]";
      iterates.emplace_back(io::as_int(io::member((*arr)[i], "n", path), path + ".n"),
                            io::as_int(io::member((*arr)[i], "m", path), path + ".m"));
    }
  } else {
    iterates = {{8, 5}, {16, 9}, {32, 17}, {64, 33}};
  }

  ResidualStats stats;
  double pair_worst = 0.0, identity_worst = 0.0;
  json rows = json::array();
  for (const auto& [n, m] : iterates) {
    const IterateScaling it = iterate_scaling(spec, u, n, m);
    stats.add(it.pair_residual);
    stats.add(it.identity_residual);
    pair_worst = std::max(pair_worst, it.pair_residual);
    identity_worst = std::max(identity_worst, it.identity_residual);
    rows.push_back({{"n", n},
                    {"m", m},
                    {"pair_residual", it.pair_residual},
                    {"identity_residual", it.identity_residual}});
  }
  push(rep.ledger, "closed-vs-recurrence", pair_worst, tolerance);
  push(rep.ledger, "iterate-identity", identity_worst, tolerance);
  rep.results["u"] = io::vec_json(u);
  rep.results["iterates"] = rows;
  finish(rep, stats, tolerance);
}

void cmd_kernel_limit(Context& ctx, io::RunReport& rep) {
  const KernelSpec spec = load_kernel(ctx.input);
  const double tolerance = tol_or(ctx, 0.2);  // window around the -1 rate
  Rng rng(ctx.seed);
  const Vector u = io::opt_member(ctx.input, "u") != nullptr
                       ? io::as_vector(ctx.input["u"], "$.u")
                       : sample_carrier(spec.group(), rng);
  std::vector<double> ts = {0.5, 2.0, 3.0};
  if (const json* arr = io::opt_member(ctx.input, "t")) {
    ts.clear();
    const Vector v = io::as_vector(*arr, "$.t");
    for (Eigen::Index i = 0; i < v.size(); ++i) ts.push_back(v(i));
  }
  int n_max = 128;
  if (const json* nm = io::opt_member(ctx.input, "n_max"))
    n_max = io::as_int(*nm, "$.n_max");

  ResidualStats stats;
  json rows = json::array();
  for (double t : ts) {
    const IterateLimit il = iterate_limit(spec, u, t, n_max);
    const double rate_dev =
        il.rate_ok && !std::isfinite(il.rate) ? 0.0 : std::abs(il.rate + 1.0);
    const double residual = il.rate_ok ? std::min(rate_dev, tolerance) : rate_dev;
    stats.add(residual);
    push(rep.ledger, "rate-t=" + json(t).dump(), residual, tolerance);
    json ests = json::array(), errs = json::array(), ns = json::array();
    for (std::size_t i = 0; i < il.ns.size(); ++i) {
      ns.push_back(il.ns[i]);
      ests.push_back(il.estimates[i]);
      errs.push_back(il.errors[i]);
    }
    rows.push_back({{"t", t},
                    {"target", il.target},
                    {"estimate", il.estimate},
                    {"rate", il.rate},
                    {"n", ns},
                    {"estimates", ests},
                    {"errors", errs}});
  }
  rep.results["u"] = io::vec_json(u);
  rep.results["gamma"] = spec.radial_params(u).gamma;
  rep.results["limits"] = rows;
  finish(rep, stats, tolerance);
}

// --------------------------------------------------------------- sigma

void cmd_sigma_build(Context& ctx, io::RunReport& rep) {
  const KernelSpec spec = load_kernel(ctx.input);
  SigmaOptions opts;
  opts.seed = ctx.seed;
  opts.validation_samples = samples_or(ctx, opts.validation_samples);
  opts.equation_tol = tol_or(ctx, opts.equation_tol);
  if (const json* hint = io::opt_member(ctx.input, "u_hint"))
    opts.u_hint = io::as_vector(*hint, "$.u_hint");

  const SigmaBuild build = build_sigma(spec, opts);
  rep.ledger = build.ledger;
  rep.results = io::sigma_json(build);

  ResidualStats stats;
  for (const auto& entry : build.ledger) stats.add(entry.residual);
  rep.verdict = build.pass ? "pass" : "fail";
  finish(rep, stats, opts.equation_tol);
}

void cmd_sigma_check(Context& ctx, io::RunReport& rep) {
  const KernelSpec spec = load_kernel(ctx.input);
  const int n = samples_or(ctx, 1000);
  const double tolerance = tol_or(ctx, tol::gate);

  SigmaOptions opts;
  opts.seed = ctx.seed;
  LinearFunctional sigma;
  if (const json* sj = io::opt_member(ctx.input, "sigma"))
    sigma = io::parse_functional(*sj, "$.sigma");
  else
    sigma = build_sigma(spec, opts).sigma;

  Rng rng(ctx.seed + 3);
  std::vector<Vector> us, vs;
  for (int i = 0; i < n; ++i) {
    us.push_back(sample_carrier(spec.group(), rng));
    vs.push_back(sample_carrier(spec.group(), rng));
  }
  const std::vector<double> res =
      map_indexed(std::size_t(n), ctx.parallel, [&](std::size_t i) {
        return sigma_hom_residual(spec, sigma, us[i], vs[i]);
      });

  SigmaOptions alt = opts;
  alt.seed = ctx.seed + 1;
  if (const json* hint = io::opt_member(ctx.input, "u_hint"))
    alt.u_hint = io::as_vector(*hint, "$.u_hint");
  const SigmaBuild second = build_sigma(spec, alt);
  const double gap =
      sigma_uniqueness_gap(spec, sigma, second.sigma, ctx.seed + 2, n);

  ResidualStats stats;
  add_all(stats, res);
  stats.add(gap);
  push(rep.ledger, "homomorphism", max_of(res), tolerance);
  push(rep.ledger, "uniqueness", gap, tolerance);
  rep.results["sigma"] = {{"coeffs", io::vec_json(sigma.coeffs)}};
  rep.results["alternate_sigma"] = {{"coeffs", io::vec_json(second.sigma.coeffs)}};
  finish(rep, stats, tolerance);
}

// ----------------------------------------------------------------- gge

GgeTriple load_triple(const json& input, bool& parallel_safe) {
  const json& tj = input.contains("triple") ? input["triple"] : input;
  if (const json* kind = io::opt_member(tj, "kind");
      kind != nullptr && kind->is_string() && *kind == "subprocess") {
    std::vector<std::string> argv;
    const json& av = io::member(tj, "argv", "$.triple");
    for (std::size_t i = 0; i < av.size(); ++i)
      argv.push_back(io::as_string(av[i], "$.triple.argv[" + std::to_string(i) + "]"));
    const int dim_x = io::as_int(io::member(tj, "dim", "$.triple"), "$.triple.dim");
    const int dim_y = io::as_int(io::member(tj, "dim_y", "$.triple"), "$.triple.dim_y");
    parallel_safe = false;  // one pipe pair, calls must stay serialized
    return subprocess_triple(argv, dim_x, dim_y);
  }
  parallel_safe = true;
  return io::parse_triple(tj, "$.triple");
}

std::vector<Vector> triple_directions(const json& input, const GgeTriple& triple,
                                      std::uint64_t seed) {
  std::vector<Vector> dirs;
  if (const json* d = io::opt_member(input, "directions")) {
    for (std::size_t i = 0; i < d->size(); ++i)
      dirs.push_back(io::as_vector((*d)[i], "$.directions[" + std::to_string(i) + "]"));
    return dirs;
  }
  for (int i = 0; i < triple.dim_x; ++i) {
    const Vector u = 0.3 * Vector::Unit(triple.dim_x, i);
    if (triple.domain(u)) dirs.push_back(u);
  }
  Rng rng(seed ^ 0x77de77deULL);
  const Vector extra = rng.vector(triple.dim_x, -0.3, 0.3);
  if (triple.domain(extra)) dirs.push_back(extra);
  return dirs;
}

void cmd_gge_classify(Context& ctx, io::RunReport& rep) {
  bool parallel_safe = true;
  const GgeTriple triple = load_triple(ctx.input, parallel_safe);
  const double tolerance = tol_or(ctx, tol::fd);
  const std::vector<Vector> dirs = triple_directions(ctx.input, triple, ctx.seed);

  ResidualStats stats;
  double validation = 0.0, homogeneity = 0.0, d1 = 0.0, d2 = 0.0, expc = 0.0;
  json rows = json::array();
  int skipped = 0;
  Rng rng(ctx.seed + 5);
  for (const Vector& u : dirs) {
    TetraClass tc;
    try {
      tc = classify_tetrachotomy(triple, u, tol::classify, tolerance);
    } catch (const DomainError&) {
      ++skipped;  // K(u) = 0 or probes exited: nothing to classify here
      continue;
    }
    stats.add(tc.validation_residual);
    stats.add(tc.homogeneity_residual);
    validation = std::max(validation, tc.validation_residual);
    homogeneity = std::max(homogeneity, tc.homogeneity_residual);
    if (tc.kind == TetraCase::power) {
      stats.add(tc.exponent_constancy);
      expc = std::max(expc, tc.exponent_constancy);
    }
    for (int i = 0; i < 4; ++i) {
      const double s = rng.uniform(0.2, 1.2);
      const double tt = rng.uniform(-0.3, 0.8);
      try {
        const DerivativeLaw law = derivative_law_residuals(triple, u, s, tt);
        stats.add(law.d1);
        stats.add(law.d2);
        d1 = std::max(d1, law.d1);
        d2 = std::max(d2, law.d2);
      } catch (const DomainError&) {
        continue;
      }
    }
    rows.push_back({{"direction", io::vec_json(u)},
                    {"case", to_string(tc.kind)},
                    {"rho_u", tc.rho_u},
                    {"gamma_u", tc.gamma_u},
                    {"validated", tc.validated},
                    {"validation_residual", tc.validation_residual},
                    {"nontrivial", tc.nontrivial}});
  }
  if (rows.empty()) throw SpecError("gge classify: no classifiable direction");
  push(rep.ledger, "validation", validation, tolerance);
  push(rep.ledger, "homogeneity", homogeneity, tolerance);
  push(rep.ledger, "D1", d1, tolerance);
  push(rep.ledger, "D2", d2, tolerance);
  push(rep.ledger, "exponent-constancy", expc, tolerance);
  rep.results["classified"] = rows;
  rep.results["skipped_directions"] = skipped;
  finish(rep, stats, tolerance);
}

void cmd_gge_reduce(Context& ctx, io::RunReport& rep) {
  bool parallel_safe = true;
  const GgeTriple triple = load_triple(ctx.input, parallel_safe);
  const double eq_tol = tol_or(ctx, tol::gate);
  const ReduceResult rr = reduce_to_standard(triple, ctx.seed,
                                             samples_or(ctx, 200), tol::fd, eq_tol);

  ResidualStats stats;
  stats.add(rr.linearity_residual);
  stats.add(rr.equation_residual);
  stats.add(rr.aux_residual);
  push(rep.ledger, "linearity", rr.linearity_residual, tol::fd);
  push(rep.ledger, "equation", rr.equation_residual, eq_tol);
  push(rep.ledger, "index-form", rr.aux_residual, eq_tol);

  rep.results["rho"] = {{"coeffs", io::vec_json(rr.rho.coeffs)}};
  if (rr.aux.has_value()) {
    json aux{{"alpha", {{"coeffs", io::vec_json(rr.aux->alpha().coeffs)}}},
             {"rho", {{"coeffs", io::vec_json(rr.aux->rho().coeffs)}}},
             {"beta", rr.aux->beta()}};
    aux["u_ref"] =
        rr.aux->u_ref().has_value() ? io::vec_json(*rr.aux->u_ref()) : json();
    rep.results["aux"] = aux;
  } else {
    rep.results["aux"] = json();
  }
  json null_dirs = json::array();
  for (int i : rr.null_k_directions) null_dirs.push_back(i);
  rep.results["null_k_directions"] = null_dirs;
  rep.verdict = rr.pass ? "pass" : "fail";
  finish(rep, stats, std::max(eq_tol, tol::fd));
}

void cmd_gge_verify(Context& ctx, io::RunReport& rep) {
  bool parallel_safe = true;
  const GgeTriple triple = load_triple(ctx.input, parallel_safe);
  const int n = samples_or(ctx, 500);
  const double tolerance = tol_or(ctx, tol::gate);

  Rng rng(ctx.seed);
  std::vector<Vector> us, vs;
  int tries = 0;
  while (int(us.size()) < n && tries < 100 * n + 1000) {
    ++tries;
    const Vector u = rng.vector(triple.dim_x, -0.4, 0.4);
    const Vector v = rng.vector(triple.dim_x, -0.4, 0.4);
    if (!triple.domain(u) || !triple.domain(v)) continue;
    if (!triple.domain(Vector(u + triple.h(u) * v))) continue;
    us.push_back(u);
    vs.push_back(v);
  }
  if (us.empty()) throw DomainError("gge verify: could not sample the domain");

  const std::vector<double> res =
      map_indexed(us.size(), ctx.parallel && parallel_safe, [&](std::size_t i) {
        return gge_residual(triple, us[i], vs[i]);
      });

  ResidualStats stats;
  add_all(stats, res);
  push(rep.ledger, "equation", max_of(res), tolerance);

  double radial = 0.0, gs_affine = 0.0;
  int radial_runs = 0, gs_solutions = 0, gs_flagged = 0;
  const std::vector<Vector> dirs = triple_directions(ctx.input, triple, ctx.seed);
  Rng rng2(ctx.seed + 7);
  for (const Vector& w : dirs) {
    for (int i = 0; i < 4; ++i) {
      const double a = rng2.uniform(0.2, 1.3);
      const double b = rng2.uniform(0.2, 1.3);
      try {
        const double r = radial_equivalence_residual(triple, w, a, b);
        ++radial_runs;
        stats.add(r);
        radial = std::max(radial, r);
      } catch (const DomainError&) {
        continue;
      }
      try {
        const GsCheck gs = gs_check(triple.h, triple.domain, w, a, b);
        if (gs.gs_pass) {
          ++gs_solutions;
          stats.add(gs.affine_residual);
          gs_affine = std::max(gs_affine, gs.affine_residual);
        } else {
          ++gs_flagged;  // h is not a (GS) solution along this ray; no claim
        }
      } catch (const DomainError&) {
        continue;
      }
    }
  }
  if (radial_runs > 0) push(rep.ledger, "radial-equivalence", radial, tolerance);
  push(rep.ledger, "gs-affine", gs_affine, tolerance);
  rep.results["samples"] = us.size();
  rep.results["gs_solution_rays"] = gs_solutions;
  rep.results["gs_flagged_rays"] = gs_flagged;
  finish(rep, stats, tolerance);
}

// ------------------------------------------------------------- harness

using Handler = void (*)(Context&, io::RunReport&);

int execute(Context& ctx, Handler handler, std::ostream& out) {
  io::RunReport rep;
  rep.command = ctx.command;
  rep.seed = ctx.seed;

  const std::string bytes = io::read_file_bytes(ctx.input_path);
  rep.inputs_digest = io::fnv1a64_hex(bytes);
  ctx.input = io::parse_text(bytes);

  int code = 0;
  try {
    handler(ctx, rep);
    code = rep.verdict == "fail" ? 1 : 0;
  } catch (const SpecError& e) {
    rep.verdict = "fail";
    rep.results["error"] = e.what();
    code = 1;
  }
  const std::string text = rep.dump();
  out << text;
  if (!ctx.out_path.empty()) {
    std::ofstream f(ctx.out_path);
    f << text;
  }
  return code;
}

}  // namespace

const std::vector<OpCoverage>& op_coverage() {
  static const std::vector<OpCoverage> table = {
      {"eta", "group verify"},
      {"circle", "group verify"},
      {"inverse", "group verify"},
      {"project_off", "group verify"},
      {"sample_carrier", "group verify"},
      {"lambda_link", "link eval"},
      {"g_radial", "link eval"},
      {"lambda_law_residual", "link check"},
      {"lambda_fixed_point_scan", "link check"},
      {"scalar_hom_eval", "link table"},
      {"scalar_hom_residual", "link table"},
      {"g_eval", "index eval"},
      {"gamma_log", "index eval"},
      {"multiplicativity_residual", "index verify"},
      {"defect_identity_residual", "index verify"},
      {"radial_g_form", "index verify"},
      {"nullspace_classify", "index classify"},
      {"gfe_residual", "kernel verify"},
      {"radiality_residual", "kernel radial"},
      {"induced_maps", "kernel radial"},
      {"psi_scaling", "kernel radial"},
      {"switching_residual", "kernel switch"},
      {"kernel_nontrivial", "kernel switch"},
      {"iterate_scaling", "kernel lemma4"},
      {"geometric_sum", "kernel lemma4"},
      {"iterate_limit", "kernel limit"},
      {"decide_regime", "sigma build"},
      {"build_sigma_a", "sigma build"},
      {"build_sigma_b", "sigma build"},
      {"sigma_hom_residual", "sigma check"},
      {"sigma_uniqueness_gap", "sigma check"},
      {"gateaux_with_probes", "gge classify"},
      {"classify_tetrachotomy", "gge classify"},
      {"derivative_law_residuals", "gge classify"},
      {"reduce_to_standard", "gge reduce"},
      {"gge_residual", "gge verify"},
      {"radial_equivalence_residual", "gge verify"},
      {"gs_check", "gge verify"},
  };
  return table;
}

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Goldie equation workbench: JSON in, JSON report out", "goldie"};
  app.require_subcommand(1);

  Context ctx;
  int exit_code = 0;

  const auto leaf = [&](CLI::App* parent, const char* verb, const char* desc,
                        Handler handler) {
    CLI::App* sub = parent->add_subcommand(verb, desc);
    sub->add_option("input", ctx.input_path, "JSON input file")->required();
    sub->add_option("--seed", ctx.seed, "sampling seed (default 0)");
    sub->add_option("--samples", ctx.samples, "sample count override");
    sub->add_option("--tol", ctx.tol, "pass tolerance override");
    sub->add_flag("--parallel", ctx.parallel, "parallel residual sampling");
    sub->add_option("--out", ctx.out_path, "also write the report to this file");
    const std::string command = parent->get_name() + " " + verb;
    sub->callback([&ctx, handler, command, &out, &exit_code] {
      ctx.command = command;
      exit_code = execute(ctx, handler, out);
    });
    return sub;
  };

  CLI::App* group = app.add_subcommand("group", "carrier group checks");
  leaf(group, "verify", "group axioms on random samples", cmd_group_verify);

  CLI::App* link = app.add_subcommand("link", "scalar link function");
  leaf(link, "eval", "evaluate the link and its radial multiplier", cmd_link_eval);
  leaf(link, "check", "functional law, endpoints, fixed points", cmd_link_check);
  leaf(link, "table", "scalar homomorphism table cells", cmd_link_table);

  CLI::App* index = app.add_subcommand("index", "multiplier index form");
  leaf(index, "eval", "evaluate g and its logarithm", cmd_index_eval);
  leaf(index, "verify", "defect identity and radial form", cmd_index_verify);
  leaf(index, "classify", "regime from the nullspace data", cmd_index_classify);

  CLI::App* kernel = app.add_subcommand("kernel", "vector solution families");
  leaf(kernel, "verify", "functional equation on sample pairs", cmd_kernel_verify);
  leaf(kernel, "radial", "ray scaling and induced scalar maps", cmd_kernel_radial);
  leaf(kernel, "switch", "parameter switching along rays", cmd_kernel_switch);
  leaf(kernel, "lemma4", "iterate scaling, closed form vs recurrence",
       cmd_kernel_lemma4);
  leaf(kernel, "limit", "iterate ratio limits and convergence rate",
       cmd_kernel_limit);

  CLI::App* sigma = app.add_subcommand("sigma", "conjugating functional");
  leaf(sigma, "build", "construct sigma with its identity ledger", cmd_sigma_build);
  leaf(sigma, "check", "homomorphism property and uniqueness", cmd_sigma_check);

  CLI::App* gge = app.add_subcommand("gge", "generalized equation triples");
  leaf(gge, "classify", "ray tetrachotomy with validation", cmd_gge_classify);
  leaf(gge, "reduce", "recover the group and index form", cmd_gge_reduce);
  leaf(gge, "verify", "equation, radial equivalence, ray flags", cmd_gge_verify);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  } catch (const io::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace goldie::cli
