#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hjkit/systems.hpp"
#include "hjkit/varcore.hpp"

using namespace hjkit;

namespace {

TimeCurve curve_of(std::function<Vec(double)> q, double t0, double t1) {
  TimeCurve c;
  c.q = std::move(q);
  c.t0 = t0;
  c.t1 = t1;
  return c;
}

// Independent oracle for the magnetic particle: H = ½|p − A(q)|² + ½k|q|².
double magnetic_h(double field, double spring, const Vec& q, const Vec& p) {
  const double px = p(0) + 0.5 * field * q(1);
  const double py = p(1) - 0.5 * field * q(0);
  return 0.5 * (px * px + py * py) + 0.5 * spring * q.squaredNorm();
}

}  // namespace

TEST_CASE("fundamental integral of simple curves") {
  const auto fp = free_particle();
  CHECK(fundamental_integral(fp, curve_of([](double t) { return vec({t}); }, 0, 1), 64) ==
        doctest::Approx(0.5).epsilon(1e-14));
  CHECK(fundamental_integral(fp, curve_of([](double t) { return vec({t}); }, 0.3, 0.3), 64) == 0.0);

  // ½ sin² − ½ cos² = −½ cos 2t integrates to zero over [0, π].
  const auto ho = harmonic_oscillator();
  const double v = fundamental_integral(ho, curve_of([](double t) { return vec({std::cos(t)}); }, 0, kPi), 400);
  CHECK(std::abs(v) < 1e-10);

  // ∫₀¹ ½ (2t)² dt = 2/3 converges at fourth order.
  auto sq = curve_of([](double t) { return vec({t * t}); }, 0, 1);
  sq.qdot = [](double t) { return vec({2 * t}); };
  CHECK(fundamental_integral(fp, sq, 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("fundamental integral rejects bad curves") {
  const auto fp = free_particle();
  CHECK_THROWS_AS(fundamental_integral(fp, curve_of([](double t) { return vec({t}); }, 1, 0), 8), BadCurve);
  LagrangianSystem boxed(1, [](const VarState& s) { return 0.5 * s.qdot.squaredNorm(); },
                         Domain::box(1, -0.5, 0.5, {0, 1}));
  CHECK_THROWS_AS(fundamental_integral(boxed, curve_of([](double t) { return vec({t}); }, 0, 1), 8), DomainEscape);
}

TEST_CASE("hessian determinant") {
  const VarState s{vec({0.3}), vec({-1.2}), 0.0};
  CHECK(hessian_det(free_particle(), s).det == doctest::Approx(1.0));
  CHECK_FALSE(hessian_det(free_particle(), s).degenerate);

  // Values only: the Hessian comes from second differences.
  LagrangianSystem quartic(1, [](const VarState& x) { return std::pow(x.qdot(0), 4) / 12.0 + x.qdot(0); },
                           Domain::unbounded(1));
  CHECK(hessian_det(quartic, {vec({0.0}), vec({2.0}), 0.0}).det == doctest::Approx(4.0).epsilon(1e-6));

  // Degree-1 homogeneous in all three velocity slots.
  LagrangianSystem homog(3, [](const VarState& x) { return x.qdot.norm(); }, Domain::unbounded(3));
  const auto c = hessian_det(homog, {vec({0, 0, 0}), vec({0.2, -0.4, 1.0}), 0.0});
  CHECK(c.degenerate);
  CHECK_THROWS_AS(require_nondegenerate(homog, {vec({0, 0, 0}), vec({0.2, -0.4, 1.0}), 0.0}), DegenerateLagrangian);
  CHECK_THROWS_AS(to_hamiltonian(homog), DegenerateLagrangian);
}

TEST_CASE("Legendre transformation values") {
  const auto hf = to_hamiltonian(free_particle());
  CHECK(hf.is_derived());
  CHECK(hf.value({vec({0}), vec({2}), 0}) == doctest::Approx(2.0).epsilon(1e-12));
  const auto ho = to_hamiltonian(harmonic_oscillator());
  CHECK(ho.value({vec({1}), vec({0}), 0}) == doctest::Approx(0.5).epsilon(1e-12));

  const double field = 0.7;
  const double spring = 0.3;
  const auto hm = to_hamiltonian(magnetic_particle(field, spring));
  UniformSource rng(11);
  for (int k = 0; k < 50; ++k) {
    const Vec q = vec({rng.uniform(-2, 2), rng.uniform(-2, 2)});
    const Vec p = vec({rng.uniform(-2, 2), rng.uniform(-2, 2)});
    CHECK(hm.value({q, p, 0.0}) == doctest::Approx(magnetic_h(field, spring, q, p)).epsilon(1e-10));
  }
}

TEST_CASE("Legendre round trip and Hessian duality") {
  const LagrangianSystem systems[] = {free_particle(2), harmonic_oscillator(1, 1.3), anharmonic_oscillator(0.5),
                                      magnetic_particle(1.1, 0.2)};
  for (const auto& sys : systems) {
    const auto ham = to_hamiltonian(sys);
    UniformSource rng(3);
    for (int k = 0; k < 100; ++k) {
      const int n = sys.dim();
      VarState s{Vec(n), Vec(n), rng.uniform(-1, 1)};
      for (int i = 0; i < n; ++i) {
        s.q(i) = rng.uniform(-1.5, 1.5);
        s.qdot(i) = rng.uniform(-1.5, 1.5);
      }
      const Vec p = sys.d_qdot(s);
      const PhasePoint x{s.q, p, s.t};
      CHECK(std::abs(sys.value(s) - (s.qdot.dot(p) - ham.value(x))) <= 1e-8);
      CHECK((ham.velocity(x) - s.qdot).norm() <= 1e-9);
      const double dl = sys.velocity_hessian(s).determinant();
      const double dh = ham.momentum_hessian(x).determinant();
      CHECK(std::abs(dl * dh - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("inversion failure carries the residual") {
  // L_q̇ = tanh(q̇) is bounded by 1, so p = 2 has no preimage.
  LagrangianSystem sat(1, [](const VarState& s) { return std::log(std::cosh(s.qdot(0))); }, Domain::unbounded(1));
  sat.with_gradients([](const VarState&) -> Vec { return vec({0.0}); },
                     [](const VarState& s) -> Vec { return vec({std::tanh(s.qdot(0))}); });
  try {
    (void)invert_momentum(sat, vec({0}), vec({2.0}), 0.0, vec({0.0}));
    FAIL("expected InversionFailure");
  } catch (const InversionFailure& e) {
    CHECK(e.residual() > 0.5);
    CHECK(e.name() == "InversionFailure");
  }
}

TEST_CASE("Euler-Lagrange residual") {
  const auto fp = free_particle();
  const auto line = curve_of([](double t) { return vec({t}); }, 0, 1);
  CHECK(std::abs(el_residual(fp, line, 0.5)(0)) < 1e-9);
  const auto parabola = curve_of([](double t) { return vec({t * t}); }, 0, 1);
  CHECK(el_residual(fp, parabola, 0.5)(0) == doctest::Approx(2.0).epsilon(1e-7));
  const auto cosine = curve_of([](double t) { return vec({std::cos(t)}); }, 0, 2);
  CHECK(std::abs(el_residual(harmonic_oscillator(), cosine, 1.0)(0)) < 1e-6);
  CHECK_THROWS_AS(el_residual(fp, line, 0.0), BoundaryPoint);
  CHECK_THROWS_AS(el_residual(fp, line, 1.0), BoundaryPoint);
}

TEST_CASE("extremal integration") {
  const auto hf = to_hamiltonian(free_particle());
  const auto c = integrate_extremal(hf, {vec({0}), vec({1}), 0}, 1.0);
  CHECK(c.back().q(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.back().p(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.total_action() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c.action.front() == 0.0);

  const auto ho = harmonic_hamiltonian();
  const auto h = integrate_extremal(ho, {vec({1}), vec({0}), 0}, kPi / 2);
  CHECK(std::abs(h.back().q(0)) < 1e-6);
  CHECK(std::abs(h.back().p(0) + 1.0) < 1e-6);

  const auto single = integrate_extremal(ho, {vec({1}), vec({0}), 0.4}, 0.4);
  CHECK(single.size() == 1);
  CHECK(single.total_action() == 0.0);
  CHECK_THROWS_AS(integrate_extremal(ho, {vec({1}), vec({0}), 0.4}, 0.3), BadCurve);
}

TEST_CASE("extremal leaving the domain keeps the partial curve") {
  HamiltonianSystem ham(1, [](const PhasePoint& x) { return 0.5 * x.p.squaredNorm(); }, Domain::box(1, -1, 1, {0, 10}));
  try {
    (void)integrate_extremal(ham, {vec({0}), vec({1}), 0}, 3.0, {0.01});
    FAIL("expected DomainEscape");
  } catch (const DomainEscape& e) {
    REQUIRE(!e.partial().empty());
    CHECK(e.partial().back().q(0) <= 1.0);
    CHECK(e.partial().back().t == doctest::Approx(1.0).epsilon(0.02));
  }
}

TEST_CASE("energy drift shrinks at fourth order") {
  const auto ham = to_hamiltonian(anharmonic_oscillator(1.0));
  const PhasePoint start{vec({1.2}), vec({0.3}), 0.0};
  auto drift = [&](double step) {
    const auto c = integrate_extremal(ham, start, 10.0, {step});
    double worst = 0.0;
    for (const auto& x : c.samples) worst = std::max(worst, std::abs(ham.value(x) - ham.value(start)));
    return worst;
  };
  const double coarse = drift(0.1);
  const double fine = drift(0.05);
  // drift <= C step^4 with the constant fixed by the coarse run.
  const double c4 = coarse / std::pow(0.1, 4);
  CHECK(coarse > 0.0);
  CHECK(c4 < 1.0);
  CHECK(fine <= 1.1 * c4 * std::pow(0.05, 4));
}

TEST_CASE("integrated extremals satisfy the Euler-Lagrange equations") {
  const auto sys = anharmonic_oscillator(0.8);
  const auto ham = to_hamiltonian(sys);
  const auto c = integrate_extremal(ham, {vec({0.5}), vec({0.4}), 0.0}, 2.0, {1e-2});
  const auto curve = TimeCurve::from_extremal(c, ham);
  for (double t : {0.3, 0.9, 1.4, 1.7}) CHECK(std::abs(el_residual(sys, curve, t)(0)) < 1e-6);

  const auto sys2 = magnetic_particle(0.9, 0.4);
  const auto ham2 = to_hamiltonian(sys2);
  const auto c2 = integrate_extremal(ham2, {vec({0.2, -0.1}), vec({0.5, 0.3}), 0.0}, 1.5, {1e-2});
  const auto curve2 = TimeCurve::from_extremal(c2, ham2);
  CHECK(el_residual(sys2, curve2, 0.75).norm() < 1e-6);
}

TEST_CASE("event-stopped integration") {
  const auto ham = free_particle_hamiltonian();
  const auto out = integrate_extremal_until(
      ham, {vec({0}), vec({2}), 0}, 5.0, [](double, const PhasePoint& x, double) { return x.q(0) - 1.0; });
  REQUIRE(out.hit);
  CHECK(out.curve.back().t == doctest::Approx(0.5).epsilon(1e-11));
  CHECK(out.curve.total_action() == doctest::Approx(1.0).epsilon(1e-10));

  const auto back = integrate_extremal_until(
      ham, {vec({0}), vec({2}), 0}, -5.0, [](double, const PhasePoint& x, double) { return x.q(0) + 1.0; });
  REQUIRE(back.hit);
  CHECK(back.curve.back().t == doctest::Approx(-0.5).epsilon(1e-11));

  const auto miss = integrate_extremal_until(
      ham, {vec({0}), vec({2}), 0}, 0.2, [](double, const PhasePoint& x, double) { return x.q(0) - 1.0; });
  CHECK_FALSE(miss.hit);
}

TEST_CASE("homogenised system") {
  const auto ext = homogenize(free_particle());
  CHECK(ext.dim() == 2);
  CHECK(ext.lstar(vec({0, 0}), vec({2, 1})) == doctest::Approx(2.0));
  CHECK(ext.lstar(vec({0, 0}), vec({4, 2})) == doctest::Approx(4.0));
  CHECK_THROWS_AS(ext.lstar(vec({0, 0}), vec({1, 0})), BadParameterDirection);
  CHECK_THROWS_AS(ext.lstar(vec({0, 0}), vec({1, -1})), BadParameterDirection);

  CHECK(parameter_momentum(free_particle(), {vec({0}), vec({1}), 0}) == doctest::Approx(-0.5));
  CHECK(ext.phi(vec({0.3, 0.0}), vec({1.0, -0.5})) == doctest::Approx(0.0));

  const auto ext2 = homogenize(magnetic_particle(0.5, 0.2));
  UniformSource rng(5);
  for (int k = 0; k < 20; ++k) {
    const Vec q = vec({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    const Vec qp = vec({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.2, 2)});
    const double base = ext2.lstar(q, qp);
    for (double lambda : {0.5, 2.0, 10.0}) {
      CHECK(std::abs(ext2.lstar(q, lambda * qp) - lambda * base) <= 1e-14 * (1 + std::abs(lambda * base)));
    }
    // The first n−1 momenta of L* are those of L; the last is p_n.
    const Vec m = ext2.momenta(q, qp);
    const VarState s{q.head(2), qp.head(2) / qp(2), q(2)};
    const Vec p = ext2.base().d_qdot(s);
    CHECK((m.head(2) - p).norm() < 1e-8);
    CHECK(m(2) == doctest::Approx(parameter_momentum(ext2.base(), s)).epsilon(1e-8));
    CHECK(std::abs(ext2.phi(q, m)) < 1e-8);
  }
}

TEST_CASE("p_n + H vanishes along extremals") {
  const auto sys = anharmonic_oscillator(0.3);
  const auto ham = to_hamiltonian(sys);
  const auto c = integrate_extremal(ham, {vec({0.7}), vec({-0.2}), 0.0}, 1.0, {0.01});
  for (std::size_t k = 0; k < c.size(); k += 10) {
    const PhasePoint& x = c.samples[k];
    const VarState s{x.q, ham.velocity(x), x.t};
    CHECK(std::abs(parameter_momentum(sys, s) + ham.value(x)) < 1e-9);
  }
}

TEST_CASE("Hamiltonian does not vanish identically") {
  const LagrangianSystem systems[] = {free_particle(), harmonic_oscillator(), anharmonic_oscillator(1.0),
                                      magnetic_particle(1.0, 0.5)};
  for (const auto& sys : systems) {
    const auto ham = to_hamiltonian(sys);
    double biggest = 0.0;
    for (double a : {-1.0, 0.0, 1.0}) {
      for (double b : {-1.0, 0.5, 1.0}) {
        Vec q = Vec::Constant(sys.dim(), a);
        Vec p = Vec::Constant(sys.dim(), b);
        biggest = std::max(biggest, std::abs(ham.value({q, p, 0.0})));
      }
    }
    CHECK(biggest > 0.0);
  }
}
