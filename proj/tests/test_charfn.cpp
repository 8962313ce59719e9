#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hjkit/charfn.hpp"
#include "hjkit/hjfield.hpp"
#include "hjkit/systems.hpp"

using namespace hjkit;

TEST_CASE("two-point values") {
  const auto fp = free_particle_hamiltonian();
  const auto a = two_point_characteristic(fp, {vec({0}), 0}, {vec({1}), 1});
  CHECK(a.converged);
  CHECK(a.value == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(a.p1(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(a.p2(0) == doctest::Approx(1.0).epsilon(1e-10));
  // Oracle: quadrature of ½q̇² along the straight extremal.
  CHECK(a.value == doctest::Approx(simpson([](double) { return 0.5; }, 0.0, 1.0, 1)).epsilon(1e-12));

  const auto rest = two_point_characteristic(fp, {vec({0}), 0}, {vec({0}), 1});
  CHECK(std::abs(rest.value) < 1e-14);
  CHECK(std::abs(rest.p1(0)) < 1e-12);

  const auto ho = harmonic_hamiltonian();
  const auto c = two_point_characteristic(ho, {vec({1}), 0}, {vec({0}), kPi / 2});
  const double quad = simpson([](double t) { return 0.5 * std::sin(t) * std::sin(t) - 0.5 * std::cos(t) * std::cos(t); },
                              0.0, kPi / 2, 2000);
  CHECK(std::abs(c.value) < 1e-6);
  CHECK(c.value == doctest::Approx(quad).epsilon(1e-6));
  CHECK(std::abs(c.p1(0)) < 1e-8);
  CHECK(c.p2(0) == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("shooting failures") {
  const auto fp = free_particle_hamiltonian();
  CHECK_THROWS_AS(two_point_characteristic(fp, {vec({0}), 1}, {vec({1}), 1}), BadCurve);
  CHECK_THROWS_AS(two_point_characteristic(harmonic_hamiltonian(), {vec({1}), 0}, {vec({-1}), kPi}),
                  AmbiguousConnection);
  HamiltonianSystem boxed(1, [](const PhasePoint& x) { return 0.5 * x.p.squaredNorm(); },
                          Domain::box(1, -1, 1, {-kInf, kInf}));
  CHECK_THROWS_AS(two_point_characteristic(boxed, {vec({0}), 0}, {vec({5}), 1}), NoConnection);
}

TEST_CASE("several extremals connect the points in a pendulum") {
  HamiltonianSystem pendulum(1, [](const PhasePoint& x) { return 0.5 * x.p(0) * x.p(0) - std::cos(x.q(0)); },
                             Domain::unbounded(1));
  ShootingOptions opts;
  opts.step = {1e-2};
  opts.probe_ambiguity = true;
  CHECK_THROWS_AS(two_point_characteristic(pendulum, {vec({0.0}), 0}, {vec({0.1}), 12.0}, vec({0.0}), opts),
                  AmbiguousConnection);
}

TEST_CASE("gradients of the characteristic function") {
  const auto fp = free_particle_hamiltonian();
  const auto g = char_gradients(fp, {vec({0}), 0}, {vec({1}), 1});
  CHECK(g.s_q2(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(g.s_t2 == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(g.s_q1(0) == doctest::Approx(-g.base.p1(0)).epsilon(1e-6));
  CHECK(g.s_t1 == doctest::Approx(0.5).epsilon(1e-6));

  const auto r = char_gradients(fp, {vec({1}), 0}, {vec({0}), 1});
  CHECK(r.s_q1(0) == doctest::Approx(-g.s_q1(0)).epsilon(1e-6));
  CHECK(r.s_q2(0) == doctest::Approx(-g.s_q2(0)).epsilon(1e-6));

  const auto ho = harmonic_hamiltonian();
  const SpacetimePoint a{vec({1}), 0};
  const SpacetimePoint b{vec({0}), kPi / 2};
  const auto h = char_gradients(ho, a, b);
  CHECK(h.s_t2 == doctest::Approx(-0.5).epsilon(1e-4));
  CHECK(h.s_q2(0) == doctest::Approx(h.base.p2(0)).epsilon(1e-4));
  CHECK(std::abs(h.s_q1(0) + h.base.p1(0)) < 1e-4);
  CHECK(h.s_t1 == doctest::Approx(ho.value({a.q, h.base.p1, a.t})).epsilon(1e-4));
}

TEST_CASE("gradients on a two-dimensional system derived from a Lagrangian") {
  const auto ham = to_hamiltonian(magnetic_particle(0.8, 0.3));
  const SpacetimePoint a{vec({0.1, -0.2}), 0.0};
  const SpacetimePoint b{vec({0.6, 0.3}), 0.9};
  ShootingOptions opts;
  opts.step = {5e-3};
  const auto g = char_gradients(ham, a, b, 1e-4, opts);
  CHECK((g.s_q2 - g.base.p2).norm() < 1e-4);
  CHECK((g.s_q1 + g.base.p1).norm() < 1e-4);
  CHECK(g.s_t2 == doctest::Approx(-ham.value({b.q, g.base.p2, b.t})).epsilon(1e-4));
  CHECK(g.s_t1 == doctest::Approx(ham.value({a.q, g.base.p1, a.t})).epsilon(1e-4));
}

TEST_CASE("trajectory recovery") {
  const AnalyticCharacteristic free1(1, [](const SpacetimePoint& a, const SpacetimePoint& b) {
    return free_particle_action(a, b);
  });
  const auto r = recover_trajectory(free1, vec({0}), vec({1}), 0, 1);
  CHECK(r.q2(0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.p2(0) == doctest::Approx(1.0).epsilon(1e-8));
  const auto still = recover_trajectory(free1, vec({0.4}), vec({0}), 0, 1);
  CHECK(still.q2(0) == doctest::Approx(0.4).epsilon(1e-8));
  CHECK(std::abs(still.p2(0)) < 1e-8);

  const AnalyticCharacteristic osc(1, [](const SpacetimePoint& a, const SpacetimePoint& b) {
    return harmonic_action(a, b);
  });
  const auto o = recover_trajectory(osc, vec({1}), vec({0}), 0, kPi / 2);
  CHECK(std::abs(o.q2(0)) < 1e-4);
  CHECK(o.p2(0) == doctest::Approx(-1.0).epsilon(1e-4));

  const ShootingCharacteristic shot(harmonic_hamiltonian());
  const auto s = recover_trajectory(shot, vec({1}), vec({0}), 0, kPi / 2);
  CHECK(std::abs(s.q2(0)) < 1e-4);
  CHECK(s.p2(0) == doctest::Approx(-1.0).epsilon(1e-4));
}

TEST_CASE("recovery fails where the mixed Hessian is singular") {
  // At T = π every q₂ gives the same S_q1 slope: the algebraic solve is singular.
  const ShootingCharacteristic shot(harmonic_hamiltonian());
  CHECK_THROWS_AS(recover_trajectory(shot, vec({1}), vec({0.2}), 0, kPi), RecoveryFailure);
}

TEST_CASE("recovery agrees with integration") {
  const auto ham = harmonic_hamiltonian(2, 1.3);
  const ShootingCharacteristic shot(ham);
  const AnalyticCharacteristic exact(2, [](const SpacetimePoint& a, const SpacetimePoint& b) {
    return harmonic_action(a, b, 1.3);
  });
  UniformSource rng(17);
  for (int k = 0; k < 8; ++k) {
    const Vec q1 = vec({rng.uniform(-1, 1), rng.uniform(-1, 1)});
    const Vec p1 = vec({rng.uniform(-1, 1), rng.uniform(-1, 1)});
    const double t1 = rng.uniform(-0.5, 0.5);
    const double t2 = t1 + rng.uniform(0.2, 1.5);
    const auto c = integrate_extremal(ham, {q1, p1, t1}, t2);
    for (const CharacteristicFunction* s : {static_cast<const CharacteristicFunction*>(&shot),
                                            static_cast<const CharacteristicFunction*>(&exact)}) {
      const auto r = recover_trajectory(*s, q1, p1, t1, t2);
      CHECK((r.q2 - c.back().q).norm() < 1e-4);
      CHECK((r.p2 - c.back().p).norm() < 1e-4);
    }
  }
}

TEST_CASE("the characteristic function solves the Hamilton-Jacobi equation in its second point") {
  const auto ham = harmonic_hamiltonian();
  const ShootingCharacteristic shot(ham);
  const SpacetimePoint a{vec({0.3}), 0.0};
  HypersurfaceFamily fam(
      1, [&](const Vec& q, double t) { return shot.value(a, {q, t}); },
      Domain(Vec::Constant(1, -5), Vec::Constant(1, 5), {0.1, 3.0}));
  for (double q : {-0.5, 0.2, 0.9}) {
    for (double t : {0.4, 1.1}) CHECK(std::abs(hj_residual(ham, fam, vec({q}), t)) <= 1e-4);
  }
}
