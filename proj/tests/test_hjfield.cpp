#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hjkit/hjfield.hpp"
#include "hjkit/systems.hpp"

using namespace hjkit;

namespace {

const Domain kPositiveTime(Vec::Constant(1, -50), Vec::Constant(1, 50), {0.05, 50});

// S = q − t/2: plane family of the free particle.
HypersurfaceFamily plane_family() {
  return HypersurfaceFamily(1, [](const Vec& q, double t) { return q(0) - 0.5 * t; }, Domain::unbounded(1));
}

// S = q²/(2t), values only so gradients go through differences.
HypersurfaceFamily spreading_family() {
  return HypersurfaceFamily(1, [](const Vec& q, double t) { return q(0) * q(0) / (2 * t); }, kPositiveTime);
}

// S = −(q²/2) tan t solves the oscillator's equation for |t| < π/2.
HypersurfaceFamily oscillator_family() {
  HypersurfaceFamily fam(1, [](const Vec& q, double t) { return -0.5 * q(0) * q(0) * std::tan(t); },
                         Domain(Vec::Constant(1, -10), Vec::Constant(1, 10), {-1.4, 1.4}));
  fam.with_gradient([](const Vec& q, double t) -> Vec { return -q * std::tan(t); },
                    [](const Vec& q, double t) { return -0.5 * q(0) * q(0) / (std::cos(t) * std::cos(t)); });
  return fam;
}

FieldCongruence oscillator_field() {
  return FieldCongruence(
      1, [](const Vec& u, double t) { return PhasePoint{u * std::cos(t), -u * std::sin(t), t}; },
      Domain::box(1, -10, 10, {-1.4, 1.4}));
}

}  // namespace

TEST_CASE("Hamilton-Jacobi residual") {
  const auto h = free_particle_hamiltonian();
  CHECK(std::abs(hj_residual(h, plane_family(), vec({0.4}), 0.3)) < 1e-12);
  CHECK(std::abs(hj_residual(h, spreading_family(), vec({1.0}), 2.0)) < 1e-9);
  HypersurfaceFamily static_plane(1, [](const Vec& q, double) { return q(0); }, Domain::unbounded(1));
  CHECK(hj_residual(h, static_plane, vec({-3.0}), 7.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(hj_residual(h, spreading_family(), vec({1.0}), 0.0), DomainEscape);
}

TEST_CASE("geodesic gradient") {
  const auto fp = free_particle();
  CHECK(geodesic_gradient(fp, plane_family(), vec({0.0}), 0.0)(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(geodesic_gradient(fp, spreading_family(), vec({2.0}), 1.0)(0) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(std::abs(geodesic_gradient(harmonic_oscillator(), oscillator_family(), vec({0.0}), 0.5)(0)) < 1e-12);
}

TEST_CASE("equidistance of the plane family") {
  const auto fp = free_particle();
  std::vector<SpacetimePoint> seeds;
  for (int k = 0; k < 5; ++k) seeds.push_back({vec({0.3 * k}), 0.1 * k});
  const auto r = equidistance_check(fp, plane_family(), 0.0, 0.5, seeds);
  REQUIRE(r.all_reached());
  for (double a : r.actions) CHECK(a == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(r.max_abs_deviation < 1e-8);

  const auto same = equidistance_check(fp, plane_family(), 0.2, 0.2, seeds);
  for (double a : same.actions) CHECK(a == 0.0);

  // Going down the family integrates backwards in t with the same signed result.
  const auto down = equidistance_check(fp, plane_family(), 0.5, 0.0, seeds);
  REQUIRE(down.all_reached());
  for (double a : down.actions) CHECK(a == doctest::Approx(-0.5).epsilon(1e-8));
}

TEST_CASE("equidistance of the spreading family against direct quadrature") {
  const auto fp = free_particle();
  std::vector<SpacetimePoint> seeds;
  for (int k = 0; k < 20; ++k) seeds.push_back({vec({0.5 + 0.1 * k}), 0.5 + 0.05 * k});
  const auto r = equidistance_check(fp, spreading_family(), 1.0, 2.0, seeds);
  REQUIRE(r.all_reached());
  CHECK(r.max_abs_deviation < 1e-6);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    // The congruence is q = c t; integrate ½c² between the crossings.
    const SpacetimePoint& e = r.endpoints[i];
    const double c = e.q(0) / e.t;
    const double t1 = 2.0 / (c * c);
    const double quad = simpson([c](double) { return 0.5 * c * c; }, t1, e.t, 4);
    CHECK(r.actions[i] == doctest::Approx(quad).epsilon(1e-6));
    CHECK(std::abs(spreading_family().value(e.q, e.t) - 2.0) < 1e-8);
  }
}

TEST_CASE("crossing not found is reported per seed") {
  const auto fp = free_particle();
  EquidistanceOptions opts;
  opts.horizon = 0.5;
  const auto r = equidistance_check(fp, plane_family(), 0.0, 5.0, {{vec({0.0}), 0.0}}, opts);
  REQUIRE(r.errors[0].has_value());
  CHECK(r.errors[0]->find("CrossingNotFound") != std::string::npos);
  CHECK_FALSE(r.all_reached());
  CHECK(std::isinf(r.max_abs_deviation));
}

TEST_CASE("transversality") {
  const auto h = free_particle_hamiltonian();
  CHECK(transversality_defect(h, plane_family(), {vec({0.0}), 0.0}, vec({1.0}), 2.0) == doctest::Approx(0.0));
  CHECK(transversality_defect(h, plane_family(), {vec({0.0}), 0.0}, vec({0.0}), 0.0) == 0.0);
  CHECK_THROWS_AS(transversality_defect(h, plane_family(), {vec({0.0}), 0.0}, vec({1.0}), 0.0), NotTangent);

  // Random tangent displacements: δt free, δq fixed by ∇S·δq + S_t δt = 0.
  const auto fam = spreading_family();
  UniformSource rng(9);
  for (int k = 0; k < 20; ++k) {
    const SpacetimePoint x{vec({rng.uniform(-2, 2)}), rng.uniform(0.5, 3)};
    const double dt = rng.uniform(-1, 1);
    const double g = x.q(0) / x.t;
    const double st = -x.q(0) * x.q(0) / (2 * x.t * x.t);
    if (std::abs(g) < 0.05) continue;
    CHECK(std::abs(transversality_defect(h, fam, x, vec({-st * dt / g}), dt)) < 1e-8);
  }

  // A family that does not solve the equation fails transversality.
  HypersurfaceFamily static_plane(1, [](const Vec& q, double) { return q(0); }, Domain::unbounded(1));
  CHECK(std::abs(transversality_defect(h, static_plane, {vec({0.0}), 0.0}, vec({0.0}), 1.0)) > 0.1);
}

TEST_CASE("Lagrange brackets") {
  FieldCongruence one(1, [](const Vec& u, double t) { return PhasePoint{u, u * t, t}; }, Domain::unbounded(1));
  CHECK(lagrange_brackets(one, vec({0.3}), 0.2)(0, 0) == 0.0);

  FieldCongruence shear(2, [](const Vec& u, double t) { return PhasePoint{u, vec({u(1), 0.0}), t}; },
                        Domain::unbounded(2));
  const Mat b = lagrange_brackets(shear, vec({0.4, -0.2}), 0.0);
  CHECK(b(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(b(1, 0) == -b(0, 1));

  FieldCongruence radial(2, [](const Vec& u, double t) { return PhasePoint{u, u / t, t}; }, Domain::unbounded(2));
  CHECK(lagrange_brackets(radial, vec({0.7, -1.1}), 1.0).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("canonical residual of fields") {
  const auto ho = harmonic_hamiltonian();
  CHECK(canonical_residual(ho, oscillator_field(), vec({0.8}), 0.3).norm() < 1e-8);
  FieldCongruence wrong(1, [](const Vec& u, double t) { return PhasePoint{u, -u * t, t}; }, Domain::unbounded(1));
  CHECK(canonical_residual(ho, wrong, vec({0.8}), 0.3).norm() > 0.1);
}

TEST_CASE("Hilbert integral") {
  const auto h = free_particle_hamiltonian();
  const auto fam = plane_family();
  const SpacetimePoint a{vec({0.0}), 0.0};
  const SpacetimePoint b{vec({1.0}), 1.0};
  CHECK(hilbert_integral(h, fam, SpacetimePath::segment(a, b)) == doctest::Approx(0.5).epsilon(1e-12));

  SpacetimePath wiggle;
  wiggle.q = [](double l) { return vec({l + 0.3 * std::sin(kPi * l)}); };
  wiggle.t = [](double l) { return l * l; };
  CHECK(hilbert_integral(h, fam, wiggle) == doctest::Approx(0.5).epsilon(1e-7));

  SpacetimePath loop;
  loop.q = [](double l) { return vec({0.5 * std::cos(2 * kPi * l)}); };
  loop.t = [](double l) { return 1.0 + 0.5 * std::sin(2 * kPi * l); };
  CHECK(std::abs(hilbert_integral(h, fam, loop)) < 1e-7);
}

TEST_CASE("Mayer field equivalence") {
  const auto ho = harmonic_hamiltonian();
  const auto field = oscillator_field();
  const auto fam = oscillator_family();
  const SpacetimePoint a{vec({0.2}), -0.3};
  const SpacetimePoint b{vec({1.1}), 0.6};
  const double direct = fam.value(b.q, b.t) - fam.value(a.q, a.t);

  SpacetimePath bent;
  bent.q = [](double l) { return vec({0.2 + 0.9 * l + 0.4 * std::sin(kPi * l)}); };
  bent.t = [](double l) { return -0.3 + 0.9 * l * l; };
  for (const auto& path : {SpacetimePath::segment(a, b), bent}) {
    CHECK(hilbert_integral(ho, fam, path) == doctest::Approx(direct).epsilon(1e-9));
    CHECK(hilbert_integral(ho, field, path) == doctest::Approx(direct).epsilon(1e-9));
  }
  for (double u : {-0.5, 0.7}) {
    for (double t : {-0.5, 0.4}) {
      CHECK(std::abs(lagrange_brackets(field, vec({u}), t)(0, 0)) < 1e-12);
      CHECK(canonical_residual(ho, field, vec({u}), t).norm() < 1e-8);
    }
  }

  // Canonical but with nonvanishing brackets: the loop integral does not vanish.
  const auto fp = free_particle_hamiltonian(2);
  FieldCongruence twisted(
      2, [](const Vec& u, double t) { return PhasePoint{vec({u(0) + t * u(1), u(1)}), vec({u(1), 0.0}), t}; },
      Domain::unbounded(2));
  CHECK(canonical_residual(fp, twisted, vec({0.1, 0.2}), 0.5).norm() < 1e-8);
  CHECK(lagrange_brackets(twisted, vec({0.1, 0.2}), 0.5)(0, 1) == doctest::Approx(1.0).epsilon(1e-8));
  SpacetimePath loop;
  loop.q = [](double l) { return vec({std::cos(2 * kPi * l), std::sin(2 * kPi * l)}); };
  loop.t = [](double) { return 0.5; };
  CHECK(std::abs(hilbert_integral(fp, twisted, loop)) > 0.1);
}

TEST_CASE("canonical equations follow from the family") {
  const auto lag = harmonic_oscillator();
  const auto ham = to_hamiltonian(lag);
  const auto fam = oscillator_family();
  const double r1 = family_canonical_residual(lag, ham, fam, vec({0.9}), 0.4, 1e-2).norm();
  const double r2 = family_canonical_residual(lag, ham, fam, vec({0.9}), 0.4, 5e-3).norm();
  CHECK(r1 < 1e-3);
  CHECK(r2 < r1 / 3.0);
}

TEST_CASE("congruence curves are extremals") {
  const auto lag = harmonic_oscillator();
  const auto fam = oscillator_family();
  TimeCurve c;
  c.t0 = 0.0;
  c.t1 = 1.0;
  c.q = [&](double t) -> Vec {
    const Rhs rhs = [&](double s, const StateVec& y) -> StateVec { return geodesic_gradient(lag, fam, y, s); };
    StateVec y = vec({0.7});
    const std::size_t n = step_count(t, 1e-2);
    for (std::size_t k = 0; k < n; ++k) y = rk4_step(rhs, t * k / n, y, t / n);
    return y;
  };
  CHECK(c.q(0.5)(0) == doctest::Approx(0.7 * std::cos(0.5)).epsilon(1e-8));
  CHECK(std::abs(el_residual(lag, c, 0.5)(0)) < 1e-6);
}

TEST_CASE("converse: a canonical field with vanishing brackets gives equidistant surfaces") {
  const auto lag = free_particle();
  const auto ham = free_particle_hamiltonian();
  FieldCongruence field(1, [](const Vec& u, double t) { return PhasePoint{u * (1 + t), u, t}; },
                        Domain::box(1, -10, 10, {0, 10}));
  CHECK(canonical_residual(ham, field, vec({0.6}), 0.5).norm() < 1e-8);
  const Domain region(Vec::Constant(1, -10), Vec::Constant(1, 10), {0, 10});
  const auto fam = reconstruct_family(ham, field, {vec({0.0}), 0.0}, region);
  // Reconstructed S agrees with q²/(2(1+t)).
  CHECK(fam.value(vec({1.0}), 1.0) == doctest::Approx(0.25).epsilon(1e-9));
  std::vector<SpacetimePoint> seeds = {{vec({1.0}), 0.0}, {vec({1.5}), 0.5}, {vec({-1.2}), 0.3}};
  const auto r = equidistance_check(lag, fam, 0.5, 1.0, seeds, {1e-2});
  REQUIRE(r.all_reached());
  CHECK(r.max_abs_deviation < 1e-6);
}

TEST_CASE("normalisation of families") {
  const auto fp = free_particle();
  std::vector<SpacetimePoint> lattice;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 3; ++j) lattice.push_back({vec({-1.0 + 0.5 * i}), 0.2 * j});
  }

  const auto same = normalize_family(fp, plane_family(), lattice, {0.0, 0.5, 1.0});
  for (const auto& x : lattice) CHECK(same.value(x.q, x.t) == doctest::Approx(plane_family().value(x.q, x.t)));

  HypersurfaceFamily doubled(1, [](const Vec& q, double t) { return 2 * q(0) - t; }, Domain::unbounded(1));
  CHECK(geodesic_scale(fp, doubled, vec({0.1}), 0.0) == doctest::Approx(0.5).epsilon(1e-10));
  const auto fixed = normalize_family(fp, doubled, lattice, {-1.0, 0.0, 1.0});
  for (double sigma : {-1.0, 0.0, 1.0}) {
    for (const auto& x : lattice) {
      const auto on = project_to_level(doubled, x, sigma);
      REQUIRE(on.has_value());
      CHECK(geodesic_scale(fp, fixed, on->q, on->t) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  CHECK(fixed.value(vec({1.0}), 0.0) - fixed.value(vec({0.0}), 0.0) == doctest::Approx(1.0));

  HypersurfaceFamily bad(1, [](const Vec& q, double t) { return 0.5 * q(0) * q(0) - t; }, Domain::unbounded(1));
  std::vector<SpacetimePoint> off_axis;
  for (double q : {0.8, 1.2, 1.6}) off_axis.push_back({vec({q}), 0.0});
  CHECK_THROWS_AS(normalize_family(fp, bad, off_axis, {0.5}), NotEquidistantFamily);
}
