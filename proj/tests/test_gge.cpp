// Black-box triples: construction, ray classification, equation checks,
// reduction to standard form, and the subprocess evaluator bridge.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <initializer_list>
#include <string>
#include <vector>

#include "goldie/families.hpp"
#include "goldie/gge.hpp"
#include "goldie/subprocess.hpp"

using namespace goldie;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

ScalarFn one() {
  return [](const Vector&) { return 1.0; };
}

GuardFn everywhere() {
  return [](const Vector&) { return true; };
}

const std::initializer_list<TetraCase> kAllCases = {
    TetraCase::flat, TetraCase::exponential, TetraCase::affine,
    TetraCase::power};

// K drops everything but the first coordinate; (0,1) is annihilated.
GgeTriple first_coordinate_triple() {
  return GgeTriple::make(
      [](const Vector& x) { return Vector(x.head(1)); }, one(), one(),
      everywhere(), 2, 1);
}

}  // namespace

TEST_CASE("triple construction enforces standardization") {
  const VectorFn lin = [](const Vector& x) { return Vector(2.0 * x); };

  CHECK_THROWS_AS(GgeTriple::make(lin, one(), one(), everywhere(), 0, 1),
                  DimensionError);
  CHECK_THROWS_AS(GgeTriple::make(lin, one(), one(), everywhere(), 2, 0),
                  DimensionError);

  const GuardFn punctured = [](const Vector& x) {
    return x.lpNorm<Eigen::Infinity>() > 0.5;
  };
  CHECK_THROWS_AS(GgeTriple::make(lin, one(), one(), punctured, 2, 2),
                  DomainError);

  CHECK_THROWS_AS(GgeTriple::make(lin, [](const Vector&) { return 1.01; },
                                  one(), everywhere(), 2, 2),
                  SpecError);
  CHECK_THROWS_AS(GgeTriple::make(lin, one(),
                                  [](const Vector&) { return 0.9; },
                                  everywhere(), 2, 2),
                  SpecError);

  CHECK_NOTHROW(GgeTriple::make(lin, one(), one(), everywhere(), 2, 2));
}

TEST_CASE("ray classification recovers every planted class") {
  for (int i = 0; i < 10; ++i) {
    for (TetraCase c : kAllCases) {
      const PlantedTriple fam = planted_triple(c, i);
      CAPTURE(fam.name);

      const TetraClass got = classify_tetrachotomy(fam.triple, fam.direction);
      CHECK(std::string(to_string(got.kind)) == to_string(fam.expected));
      CHECK(std::abs(got.rho_u - fam.rho_u) <= 1e-6);
      CHECK(std::abs(got.gamma_u - fam.gamma_u) <= 1e-6);
      CHECK(got.homogeneity_residual <= 1e-6);
      CHECK(got.validated);
      CHECK(got.validation_residual <= 1e-6);
      if (c == TetraCase::flat) {
        CHECK_FALSE(got.nontrivial);
      } else {
        CHECK(got.nontrivial);
      }
      if (c == TetraCase::power) CHECK(got.exponent_constancy <= 1e-6);
    }
  }
}

TEST_CASE("classification refuses a direction the map annihilates") {
  const GgeTriple t = first_coordinate_triple();
  CHECK_THROWS_AS(classify_tetrachotomy(t, vec({0.0, 1.0})), DomainError);
}

TEST_CASE("planted triples satisfy the generalized equation pointwise") {
  for (TetraCase c : kAllCases) {
    const PlantedTriple fam = planted_triple(c, 5);
    CAPTURE(fam.name);
    const PopaGroup group(fam.triple.dim_x, fam.rho_expected);
    Rng rng(77);
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
      const Vector u = sample_carrier(group, rng);
      const Vector v = sample_carrier(group, rng);
      worst = std::max(worst, gge_residual(fam.triple, u, v));
    }
    CHECK(worst <= 1e-11);
  }

  // A point outside the carrier of the composition part is rejected.
  const PlantedTriple aff = planted_triple(TetraCase::affine, 1);
  const Vector rf = aff.rho_expected.coeffs;
  const Vector bad = -2.0 / rf.squaredNorm() * rf;
  CHECK_THROWS_AS(gge_residual(aff.triple, Vector::Zero(2), bad), DomainError);
}

TEST_CASE("link derivative identities hold along planted rays") {
  for (TetraCase c : kAllCases) {
    const PlantedTriple fam = planted_triple(c, 4);
    CAPTURE(fam.name);
    for (double s : {0.5, 1.0}) {
      for (double tt : {0.0, 0.4, 1.2}) {
        const DerivativeLaw law =
            derivative_law_residuals(fam.triple, fam.direction, s, tt);
        CHECK(law.d1 <= 1e-6);
        CHECK(law.d2 <= 1e-6);
      }
    }
  }

  const PlantedTriple aff = planted_triple(TetraCase::affine, 4);
  CHECK_THROWS_AS(
      derivative_law_residuals(aff.triple, aff.direction, -20.0, 0.0),
      DomainError);
}

TEST_CASE("radial equivalence accepts solutions and flags a mismatched pair") {
  const PlantedTriple pw = planted_triple(TetraCase::power, 4);
  CHECK(radial_equivalence_residual(pw.triple, pw.direction, 0.4, 0.5) <=
        1e-9);

  const PlantedTriple ex = planted_triple(TetraCase::exponential, 2);
  CHECK(radial_equivalence_residual(ex.triple, ex.direction, -0.3, 0.8) <=
        1e-9);

  // Same K and h, but g is affine where the ray data demands a power law.
  const LinearFunctional rf{vec({0.8, -0.3})};
  const PopaGroup group(2, rf);
  const GgeTriple fake = GgeTriple::make(
      [rf](const Vector& x) {
        return Vector(pow1pm1(rf(x), 1.7) * Vector::Ones(1));
      },
      [rf](const Vector& x) { return 1.0 + rf(x); },
      [rf](const Vector& x) { return 1.0 + 1.7 * rf(x); },
      [group](const Vector& x) { return group.contains(x); }, 2, 1);
  CHECK(radial_equivalence_residual(fake, vec({0.5, 0.2}), 0.4, 0.5) > 1e-3);

  const GgeTriple ann = first_coordinate_triple();
  CHECK_THROWS_AS(radial_equivalence_residual(ann, vec({0.0, 1.0}), 0.4, 0.5),
                  DomainError);
}

TEST_CASE("one-function ray equation with its affinity companion") {
  const LinearFunctional rf{vec({0.5, -0.25})};
  const PopaGroup group(2, rf);
  const GuardFn dom = [group](const Vector& x) { return group.contains(x); };
  const Vector u = vec({0.4, 0.2});  // rf(u) = 0.15

  const ScalarFn affine_f = [rf](const Vector& x) { return 1.0 + rf(x); };
  const GsCheck ok = gs_check(affine_f, dom, u, 0.4, 0.7);
  CHECK(ok.gs_pass);
  CHECK(ok.gs_residual <= 1e-12);
  CHECK(ok.affine_residual <= 1e-9);

  const LinearFunctional af{vec({0.5, 0.5})};  // af(u) = 0.3
  const ScalarFn exp_f = [af](const Vector& x) { return std::exp(af(x)); };
  const GsCheck off = gs_check(exp_f, everywhere(), u, 0.4, 0.7);
  CHECK_FALSE(off.gs_pass);
  CHECK(off.gs_residual > 1e-4);
  CHECK(off.affine_residual == 0.0);

  // a = 0 satisfies the equation for any f; the companion still objects.
  const GsCheck vac = gs_check(exp_f, everywhere(), u, 0.0, 0.7);
  CHECK(vac.gs_pass);
  CHECK(vac.affine_residual > 1e-4);

  const GuardFn tiny = [](const Vector& x) {
    return x.lpNorm<Eigen::Infinity>() < 0.3;
  };
  CHECK_THROWS_AS(gs_check(exp_f, tiny, vec({1.0, 0.0}), 0.4, 0.7),
                  DomainError);
}

TEST_CASE("directional derivatives at zero reject bad probes") {
  const ScalarFn f = [](const Vector& x) { return std::exp(x(0)); };

  const Gateaux d = gateaux_with_probes(f, everywhere(), vec({1.0}));
  CHECK(d.value == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(d.homogeneity_residual <= 1e-8);

  const GuardFn pin = [](const Vector& x) {
    return x.lpNorm<Eigen::Infinity>() < 1e-4;
  };
  CHECK_THROWS_AS(gateaux_at_zero(f, pin, vec({1.0})), DomainError);

  const ScalarFn root = [](const Vector& x) { return std::sqrt(x(0)); };
  CHECK_THROWS_AS(gateaux_at_zero(root, everywhere(), vec({1.0})),
                  DomainError);
}

TEST_CASE("reduction recovers the planted standard form") {
  SUBCASE("power families give the full auxiliary") {
    for (int i : {1, 4, 7}) {
      const PlantedTriple fam = planted_triple(TetraCase::power, i);
      CAPTURE(fam.name);
      const ReduceResult r = reduce_to_standard(fam.triple, 11);
      REQUIRE(r.pass);
      CHECK((r.rho.coeffs - fam.rho_expected.coeffs)
                .lpNorm<Eigen::Infinity>() <= 1e-6);
      REQUIRE(r.u_ref.has_value());
      CHECK(fam.rho_expected(*r.u_ref) == doctest::Approx(1.0).epsilon(1e-6));
      REQUIRE(r.aux.has_value());
      CHECK(r.aux->alpha().coeffs.lpNorm<Eigen::Infinity>() <= 1e-8);
      CHECK(r.aux->beta() ==
            doctest::Approx(fam.gamma_u / fam.rho_u).epsilon(1e-6));
      const double want =
          fam.gamma_u / fam.rho_u * std::log1p(fam.rho_u);
      CHECK(r.aux->gamma_log(fam.direction) ==
            doctest::Approx(want).epsilon(1e-6));
      CHECK(r.equation_residual <= 1e-8);
      CHECK(r.aux_residual <= 1e-8);
    }
  }

  SUBCASE("affine families reduce to a trivial index part") {
    for (int i : {0, 3}) {
      const PlantedTriple fam = planted_triple(TetraCase::affine, i);
      CAPTURE(fam.name);
      const ReduceResult r = reduce_to_standard(fam.triple, 13);
      REQUIRE(r.pass);
      CHECK((r.rho.coeffs - fam.rho_expected.coeffs)
                .lpNorm<Eigen::Infinity>() <= 1e-6);
      REQUIRE(r.aux.has_value());
      CHECK(r.aux->beta() == 0.0);
      CHECK(r.aux->alpha().coeffs.lpNorm<Eigen::Infinity>() == 0.0);
      CHECK(r.aux->multiplicative());
    }
  }

  SUBCASE("exponential families reduce to a pure alpha part") {
    for (int i : {2, 5}) {
      const PlantedTriple fam = planted_triple(TetraCase::exponential, i);
      CAPTURE(fam.name);
      const ReduceResult r = reduce_to_standard(fam.triple, 17);
      REQUIRE(r.pass);
      CHECK(r.rho.is_zero());
      CHECK_FALSE(r.u_ref.has_value());
      REQUIRE(r.aux.has_value());
      CHECK(r.aux->beta() == 0.0);
      CHECK(r.aux->gamma_log(fam.direction) ==
            doctest::Approx(0.3).epsilon(1e-9));
    }
  }

  SUBCASE("flat families reduce to nothing at all") {
    const PlantedTriple fam = planted_triple(TetraCase::flat, 3);
    const ReduceResult r = reduce_to_standard(fam.triple, 19);
    REQUIRE(r.pass);
    CHECK(r.rho.is_zero());
    REQUIRE(r.aux.has_value());
    CHECK(r.aux->alpha().coeffs.lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("a composition part with nonlinear derivative is rejected") {
    const ScalarFn curly = [](const Vector& x) {
      const double q = x.squaredNorm();
      return q == 0.0 ? 1.0 : 1.0 + x(0) * x(0) * x(1) / q;
    };
    const GgeTriple t = GgeTriple::make(
        [](const Vector& x) { return Vector(x.head(1)); }, curly, one(),
        everywhere(), 2, 1);
    CHECK_THROWS_AS(reduce_to_standard(t), SpecError);
  }
}

TEST_CASE("a subprocess evaluator matches its closed form across the pipe") {
  const std::string server = GOLDIE_TRIPLE_SERVER;
  const std::string fixture =
      std::string(GOLDIE_FIXTURES_DIR) + "/triple_power_d2.json";
  const GgeTriple remote = subprocess_triple({server, fixture}, 2, 1);

  const LinearFunctional rf{vec({0.8, -0.3})};
  const PopaGroup group(2, rf);
  Rng rng(5);
  for (int k = 0; k < 25; ++k) {
    const Vector x = sample_carrier(group, rng);
    CHECK(remote.h(x) == doctest::Approx(1.0 + rf(x)).epsilon(1e-12));
    CHECK(remote.g(x) ==
          doctest::Approx(std::exp(1.7 * std::log1p(rf(x)))).epsilon(1e-12));
    const Vector y = remote.K(x);
    REQUIRE(y.size() == 1);
    CHECK(y(0) == doctest::Approx(pow1pm1(rf(x), 1.7)).epsilon(1e-12));
  }

  CHECK(remote.domain(vec({0.1, 0.1})));
  CHECK_FALSE(remote.domain(vec({-2.0, 0.0})));
  CHECK_THROWS_AS(remote.K(vec({-2.0, 0.0})), DomainError);

  // The analysis machinery runs unchanged over the pipe.
  const TetraClass cls = classify_tetrachotomy(remote, vec({0.375, 0.0}));
  CHECK(std::string(to_string(cls.kind)) == "power");
  CHECK(cls.rho_u == doctest::Approx(0.3).epsilon(1e-8));
  CHECK(cls.gamma_u == doctest::Approx(0.51).epsilon(1e-8));
  CHECK(cls.validated);
}

TEST_CASE("a dead evaluator surfaces as a protocol failure") {
  const std::string server = GOLDIE_TRIPLE_SERVER;
  CHECK_THROWS_AS(subprocess_triple({server, "/nonexistent/triple.json"}, 2, 1),
                  SpecError);
}
