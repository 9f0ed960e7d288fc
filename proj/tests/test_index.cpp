#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "goldie/index.hpp"
#include "goldie/numeric.hpp"
#include "goldie/popa.hpp"

using namespace goldie;

namespace {

// alpha = (0, 1.5, 1.5), rho = (0.5, 0.5, 0), beta = 2, u_ref = (2, 0, 0):
// a valid frame (rho(u_ref) = 1, alpha(u_ref) = 0) that is deliberately not
// multiplicative, since both alpha and rho are nonzero.
AuxiliarySpec general_aux() {
  Vector a(3), r(3), u(3);
  a << 0.0, 1.5, 1.5;
  r << 0.5, 0.5, 0.0;
  u << 2.0, 0.0, 0.0;
  return AuxiliarySpec::make(LinearFunctional{a}, LinearFunctional{r}, 2.0, u);
}

AuxiliarySpec ray_aux() {  // alpha = 0: multiplicative power form
  Vector r(3), u(3);
  r << 1.0, 0.7, -0.4;
  u << 1.0, 0.0, 0.0;
  return AuxiliarySpec::make(LinearFunctional::zero(3), LinearFunctional{r}, 1.7, u);
}

AuxiliarySpec additive_aux() {  // rho = 0: multiplicative exponential form
  Vector a(3);
  a << 0.5, -0.5, 0.0;
  return AuxiliarySpec::make(LinearFunctional{a}, LinearFunctional::zero(3), 0.0,
                             std::nullopt);
}

}  // namespace

TEST_CASE("index form matches the frozen reference") {
  // At x = (1,1,1): alpha(x) = 3, rho(x) = 1, so g = e^3 (1+1)^2 = 4 e^3.
  const AuxiliarySpec aux = general_aux();
  Vector x(3);
  x << 1.0, 1.0, 1.0;
  CHECK(aux.g_eval(x) ==
        doctest::Approx(80.342147692750670963714118618326871588).epsilon(1e-14));
  CHECK(aux.gamma_log(x) ==
        doctest::Approx(3.0 + 2.0 * std::numbers::ln2).epsilon(1e-15));
  CHECK(aux.gamma_of_uref() == doctest::Approx(2.0 * std::numbers::ln2).epsilon(1e-15));
  CHECK(aux.g_eval(Vector(Vector::Zero(3))) == 1.0);
}

TEST_CASE("frame validation rejects malformed auxiliaries") {
  const LinearFunctional zero3 = LinearFunctional::zero(3);
  Vector r(3);
  r << 1.0, 0.0, 0.0;
  const LinearFunctional rho{r};
  const Vector good = Vector::Unit(3, 0);

  // rho != 0 needs a reference point with rho(u_ref) = 1, alpha(u_ref) = 0
  CHECK_THROWS_AS(AuxiliarySpec::make(zero3, rho, 1.0, std::nullopt), SpecError);
  CHECK_THROWS_AS(AuxiliarySpec::make(zero3, rho, 1.0, Vector(2.0 * good)),
                  SpecError);
  Vector a(3);
  a << 0.3, 0.0, 0.0;
  CHECK_THROWS_AS(AuxiliarySpec::make(LinearFunctional{a}, rho, 1.0, good),
                  SpecError);
  // rho = 0 forbids both the reference point and a nonzero exponent
  CHECK_THROWS_AS(AuxiliarySpec::make(zero3, zero3, 0.0, good), SpecError);
  CHECK_THROWS_AS(AuxiliarySpec::make(zero3, zero3, 0.5, std::nullopt), SpecError);
  // dimension mismatches
  CHECK_THROWS_AS(AuxiliarySpec::make(LinearFunctional::zero(2), rho, 1.0, good),
                  DimensionError);
  CHECK_THROWS_AS(AuxiliarySpec::make(zero3, rho, 1.0, Vector(Vector::Unit(2, 0))),
                  DimensionError);
  // and a valid frame constructs
  CHECK_NOTHROW(AuxiliarySpec::make(zero3, rho, 1.0, good));
}

TEST_CASE("carrier guard on evaluation") {
  const AuxiliarySpec aux = ray_aux();
  Vector x(3);
  x << -2.0, 0.0, 0.0;  // 1 + rho(x) = -1
  CHECK_THROWS_AS(aux.g_eval(x), DomainError);
}

TEST_CASE("exact defect identity holds for every auxiliary") {
  for (const AuxiliarySpec& aux : {general_aux(), ray_aux(), additive_aux()}) {
    const PopaGroup group(aux.dim(), aux.rho());
    Rng rng(31);
    for (int i = 0; i < 300; ++i) {
      const Vector u = sample_carrier(group, rng);
      const Vector v = sample_carrier(group, rng);
      CHECK(defect_identity_residual(aux, u, v) <= 1e-12);
    }
  }
}

TEST_CASE("multiplicativity holds exactly when alpha or rho vanishes") {
  CHECK_FALSE(general_aux().multiplicative());
  CHECK(ray_aux().multiplicative());
  CHECK(additive_aux().multiplicative());

  for (const AuxiliarySpec& aux : {ray_aux(), additive_aux()}) {
    const PopaGroup group(aux.dim(), aux.rho());
    Rng rng(37);
    for (int i = 0; i < 300; ++i) {
      const Vector u = sample_carrier(group, rng);
      const Vector v = sample_carrier(group, rng);
      CHECK(multiplicativity_residual(aux, u, v) <= 1e-12);
    }
  }

  // and fails by exactly the defect factor otherwise
  const AuxiliarySpec aux = general_aux();
  Vector u(3), v(3);
  u << 0.5, 0.2, -0.1;
  v << -0.2, 0.4, 0.3;
  CHECK(multiplicativity_defect(aux, u, v) ==
        doctest::Approx(std::exp(aux.rho()(u) * aux.alpha()(v))).epsilon(1e-15));
  CHECK(multiplicativity_residual(aux, u, v) > 1e-3);
}

TEST_CASE("directional derivative of g at zero is alpha + beta rho") {
  const AuxiliarySpec aux = general_aux();
  Rng rng(41);
  for (int i = 0; i < 20; ++i) {
    const Vector x = rng.vector(3, -1.0, 1.0);
    const double expected = aux.alpha()(x) + aux.beta() * aux.rho()(x);
    const double fd =
        richardson_derivative([&](double t) { return aux.g_eval(Vector(t * x)); });
    CHECK(fd == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("radial closed form: power branch on rays off the null space") {
  const AuxiliarySpec aux = ray_aux();
  Vector w(3);
  w << 0.6, 0.1, 0.2;
  const RadialFormCheck check =
      radial_g_form(aux, w, {-0.4, 0.3, 0.8, 1.5, 2.0});
  CHECK(check.power_branch);
  CHECK(check.ok);
  CHECK(check.max_residual <= 1e-9);
}

TEST_CASE("radial closed form: exponential branch when rho vanishes") {
  const AuxiliarySpec aux = additive_aux();
  Vector w(3);
  w << 1.0, 0.25, 0.0;
  const RadialFormCheck check =
      radial_g_form(aux, w, {-0.4, 0.3, 0.8, 1.5, 2.0});
  CHECK_FALSE(check.power_branch);
  CHECK(check.ok);
  CHECK(check.max_residual <= 1e-9);
}

TEST_CASE("nullspace classification: regime NA for power-form auxiliaries") {
  const NullspaceClassification nc = nullspace_classify(ray_aux());
  CHECK(nc.regime == Regime::NA);
  CHECK(nc.null_basis.cols() == 2);
  CHECK(nc.max_gamma <= 1e-9);
  CHECK_FALSE(nc.witness.has_value());
  for (double g : nc.gamma_on_basis) CHECK(std::abs(g) <= 1e-9);
}

TEST_CASE("nullspace classification: regime NB with a deterministic witness") {
  const NullspaceClassification nc = nullspace_classify(additive_aux());
  CHECK(nc.regime == Regime::NB);
  CHECK(nc.null_basis.cols() == 3);  // rho = 0: the whole space
  REQUIRE(nc.witness.has_value());
  CHECK(nc.max_gamma == doctest::Approx(0.5).epsilon(1e-15));
  // alpha = (0.5, -0.5, 0): the first maximizing column wins
  CHECK((*nc.witness - Vector::Unit(3, 0)).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("classification is decided by auxiliary data, not samples") {
  // A general auxiliary has gamma = alpha on N(rho), nonzero: regime NB.
  const NullspaceClassification nc = nullspace_classify(general_aux());
  CHECK(nc.regime == Regime::NB);
  CHECK(nc.witness.has_value());
}
