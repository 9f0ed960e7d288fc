#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "goldie/popa.hpp"

using namespace goldie;

namespace {

PopaGroup group2() {
  Vector rho(2);
  rho << 1.0, 0.0;
  return PopaGroup(2, LinearFunctional{rho});
}

}  // namespace

TEST_CASE("circle operation matches the closed form") {
  const PopaGroup g = group2();
  Vector u(2), v(2);
  u << 0.2, 0.1;
  v << 0.3, -0.2;
  const Vector w = g.circle(u, v);
  CHECK(w(0) == doctest::Approx(0.56).epsilon(1e-15));
  CHECK(w(1) == doctest::Approx(-0.14).epsilon(1e-15));
  CHECK(g.eta(w) == doctest::Approx(1.2 * 1.3).epsilon(1e-15));
}

TEST_CASE("identity and inverse are exact at the formula level") {
  const PopaGroup g = group2();
  Vector u(2);
  u << 0.4, -0.3;
  const Vector zero = Vector::Zero(2);
  CHECK((g.circle(u, zero) - u).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((g.circle(zero, u) - u).lpNorm<Eigen::Infinity>() == 0.0);
  const Vector ui = g.inverse(u);
  CHECK(g.circle(u, ui).lpNorm<Eigen::Infinity>() <= 1e-16);
  CHECK(g.circle(ui, u).lpNorm<Eigen::Infinity>() <= 1e-16);
}

TEST_CASE("group axioms hold on random samples in several dimensions") {
  for (int d : {1, 2, 5}) {
    CAPTURE(d);
    Rng coeff_rng(100 + std::uint64_t(d));
    const Vector coeffs = coeff_rng.vector(d, -1.0, 1.0);
    const PopaGroup g(d, LinearFunctional{coeffs});
    Rng rng(7 * std::uint64_t(d) + 1);
    for (int i = 0; i < 200; ++i) {
      const Vector u = sample_carrier(g, rng);
      const Vector v = sample_carrier(g, rng);
      const Vector w = sample_carrier(g, rng);
      const Vector lhs = g.circle(g.circle(u, v), w);
      const Vector rhs = g.circle(u, g.circle(v, w));
      CHECK(rel_residual(Vector(lhs - rhs), rhs) <= 1e-9);
      const double eta_ref = g.eta(u) * g.eta(v);
      CHECK(rel_residual(g.eta(g.circle(u, v)) - eta_ref, eta_ref) <= 1e-12);
      CHECK(rel_residual(g.circle(u, g.inverse(u)), u) <= 1e-9);
    }
  }
}

TEST_CASE("carrier membership respects the strict margin") {
  const PopaGroup g = group2();
  Vector inside(2), boundary(2), outside(2);
  inside << -0.5, 3.0;
  boundary << -1.0, 0.0;
  outside << -1.5, 0.0;
  CHECK(g.contains(inside));
  CHECK_FALSE(g.contains(boundary));
  CHECK_FALSE(g.contains(outside));
  CHECK_THROWS_AS(g.eta(outside), DomainError);
  CHECK_THROWS_AS(g.circle(inside, outside), DomainError);
  CHECK_THROWS_AS(g.inverse(boundary), DomainError);
}

TEST_CASE("dimension mismatches are rejected") {
  const PopaGroup g = group2();
  const Vector wrong = Vector::Zero(3);
  CHECK_THROWS_AS(g.eta(wrong), DimensionError);
  Vector rho(2);
  rho << 1.0, 2.0;
  CHECK_THROWS_AS(PopaGroup(3, LinearFunctional{rho}), DimensionError);
}

TEST_CASE("the additive group is the rho = 0 degenerate case") {
  const PopaGroup g(3, LinearFunctional::zero(3));
  Rng rng(11);
  const Vector u = rng.vector(3, -5.0, 5.0);
  const Vector v = rng.vector(3, -5.0, 5.0);
  CHECK((g.circle(u, v) - (u + v)).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(g.eta(u) == 1.0);
  CHECK((g.inverse(u) + u).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("projection kills the functional and fixes its null space") {
  Vector rho(3);
  rho << 0.5, -1.0, 0.25;
  const LinearFunctional f{rho};
  const Vector u_ref = Vector::Unit(3, 1) / rho(1);  // rho(u_ref) = 1
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    const Vector x = rng.vector(3, -2.0, 2.0);
    const Vector px = project_off(f, u_ref, x);
    CHECK(std::abs(f(px)) <= 1e-12 * (1.0 + std::abs(f(x))));
    CHECK((project_off(f, u_ref, px) - px).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
  const Vector bad_ref = Vector::Unit(3, 0);  // rho(bad_ref) = 0.5, not 1
  CHECK_THROWS_AS(project_off(f, bad_ref, Vector(Vector::Zero(3))), DomainError);
}

TEST_CASE("carrier sampler respects the eta floor") {
  Vector rho(2);
  rho << 2.0, -1.0;
  const PopaGroup g(2, LinearFunctional{rho});
  Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    const Vector x = sample_carrier(g, rng);
    CHECK(g.contains(x));
    CHECK(g.eta(x) > 0.05);
  }
}
