#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hjkit/charfn.hpp"
#include "hjkit/optics.hpp"

using namespace hjkit;

namespace {

Eigen::Vector3d lift(const SpacetimePoint& x) { return {x.q(0), x.q(1), x.t}; }

// Slope from neighbouring samples, independent of the Hamiltonian.
Vec sample_slope(const ExtremalCurve& ray, std::size_t k) {
  const auto& a = ray.samples[k - 1];
  const auto& b = ray.samples[k + 1];
  return (b.q - a.q) / (b.t - a.t);
}

}  // namespace

TEST_CASE("snell ratio across a smoothed interface") {
  const Medium m = Medium::interface(1.0, 1.5, 1, 0.5, 0.01);
  const auto ray = trace_ray(m, {vec({0, 0}), 0}, vec({0.3, 0.8}), 2.0);
  const double before = interface_sine(m, ray.samples.front(), 1);
  const double after = interface_sine(m, ray.back(), 1);
  REQUIRE(ray.back().q(1) > 0.8);
  CHECK(before / after == doctest::Approx(1.5).epsilon(1e-3));
  // Geometric sines from sampled slopes on either side.
  auto geometric = [](const Vec& v) { return std::sqrt(1 + v(0) * v(0)) / std::sqrt(1 + v.squaredNorm()); };
  const double s1 = geometric(sample_slope(ray, 1));
  const double s2 = geometric(sample_slope(ray, ray.size() - 2));
  CHECK(s1 / s2 == doctest::Approx(1.5).epsilon(1e-3));
}

TEST_CASE("bouguer invariant in a linear slab") {
  const Medium m = Medium::linear(1.0, vec({0.0, 0.1}));
  const auto ray = trace_ray(m, {vec({0, 0}), 0}, vec({0.2, 0.5}), 3.0);
  double worst = 0.0;
  double first = 0.0;
  for (std::size_t k = 1; k + 1 < ray.size(); k += 50) {
    const Vec v = sample_slope(ray, k);
    const auto& x = ray.samples[k];
    const double inv = m.n(x.q, x.t) / std::sqrt(1 + v.squaredNorm());
    if (k == 1) first = inv;
    worst = std::max(worst, std::abs(inv - first));
  }
  CHECK(worst < 1e-5);
  CHECK(std::abs(bouguer_invariant(m, ray.back()) - bouguer_invariant(m, ray.samples.front())) < 1e-10);
}

TEST_CASE("travel time matches the optical integral") {
  const Medium m = Medium::linear(1.2, vec({0.05, 0.1}));
  const auto ray = trace_ray(m, {vec({0.1, 0}), 0}, vec({0.4, -0.2}), 1.5);
  const auto ham = optical_hamiltonian(m);
  const double quad = fundamental_integral(optical_lagrangian(m), TimeCurve::from_extremal(ray, ham), 300);
  CHECK(ray.total_action() == doctest::Approx(quad).epsilon(1e-9));
}

TEST_CASE("fermat integrand is degenerate, the axial form is not") {
  const Medium m = Medium::homogeneous(1.0);
  CHECK_THROWS_AS(to_hamiltonian(fermat_time_lagrangian(m)), DegenerateLagrangian);
  CHECK_NOTHROW(to_hamiltonian(optical_lagrangian(m)));
  CHECK_FALSE(hessian_det(optical_lagrangian(m), {vec({0, 0}), vec({0.3, 0.1}), 0}).degenerate);
}

TEST_CASE("rays are stationary for the travel time") {
  const Medium m = Medium::linear(1.0, vec({0.0, 0.3}));
  const auto ham = optical_hamiltonian(m);
  const auto ray = trace_ray(m, {vec({0, 0}), 0}, vec({0.1, 0.6}), 1.0);
  const TimeCurve base = TimeCurve::from_extremal(ray, ham);
  const auto lag = optical_lagrangian(m);
  for (int i = 0; i < 2; ++i) {
    auto bumped = [&](double eps) {
      TimeCurve c = base;
      c.q = [=](double t) {
        Vec q = base.q(t);
        q(i) += eps * std::pow(std::sin(kPi * t), 2);
        return q;
      };
      c.qdot = [=](double t) {
        Vec v = base.velocity(t);
        v(i) += eps * kPi * std::sin(2 * kPi * t);
        return v;
      };
      return fundamental_integral(lag, c, 200);
    };
    const double eps = 1e-4;
    CHECK(std::abs((bumped(eps) - bumped(-eps)) / (2 * eps)) < 1e-6);
  }
}

TEST_CASE("paraxial violation carries the partial ray") {
  const Medium m([](const Vec& q, double) { return 1.0 + q(0) * q(0); });
  try {
    trace_ray(m, {vec({1, 0}), 0}, vec({1, 0}), 5.0);
    FAIL("expected ParaxialViolation");
  } catch (const ParaxialViolation& e) {
    CHECK(e.partial().size() > 1);
    CHECK(e.name() == "ParaxialViolation");
  }
}

TEST_CASE("point source in a homogeneous medium") {
  const Medium m = Medium::homogeneous(1.0);
  const SpacetimePoint p1{vec({0.2, -0.1}), 0.5};
  FanSpec fan{5, 5, 1.0};
  const auto f = wavefront_from_point(m, p1, 1.0, fan);
  REQUIRE(f.failures() == 0);
  for (const auto& x : f.points) CHECK(std::abs((lift(x) - lift(p1)).norm() - 1.0) < 1e-8);
  const auto zero = wavefront_from_point(m, p1, 0.0, fan);
  for (const auto& x : zero.points) CHECK((lift(x) - lift(p1)).norm() == 0.0);
}

TEST_CASE("geodesic spheres agree with shooting") {
  const Medium m = Medium::linear(1.0, vec({0.1, 0.2}));
  const SpacetimePoint p1{vec({0, 0}), 0};
  const auto f = wavefront_from_point(m, p1, 0.8, {3, 3, 0.7});
  REQUIRE(f.failures() == 0);
  const auto ham = optical_hamiltonian(m);
  for (const auto& x : f.points) {
    const auto r = two_point_characteristic(ham, p1, x);
    CHECK(std::abs(r.value - 0.8) < 1e-6);
  }
  CHECK(front_normal_defect(m, wavefront_from_point(m, p1, 0.8, {1, 81, 1.0})) < 1e-4);
}

TEST_CASE("huygens envelope of a circular front") {
  const Medium m = Medium::homogeneous(1.0);
  const SpacetimePoint p1{vec({0, 0}), 0};
  const auto f = wavefront_from_point(m, p1, 1.0, {1, 81, 1.0});
  const auto rep = huygens_check(m, f, 1.0);
  CHECK(rep.checked > 70);
  CHECK(rep.max_defect < 1e-5);
  for (const auto& x : rep.direct.points) CHECK(std::abs(lift(x).norm() - 2.0) < 1e-8);
  CHECK_THROWS_AS(huygens_check(m, wavefront_from_point(m, p1, 1.0, {1, 3, 1.0}), 0.05), SamplingTooCoarse);
}

TEST_CASE("huygens envelope in a graded slab") {
  const Medium m = Medium::linear(1.0, vec({0.0, 0.1}));
  // S = n t: its level S = 0 is the plane t = 0 with the rays along the axis.
  HypersurfaceFamily fam(2, [](const Vec& q, double t) { return (1.0 + 0.1 * q(1)) * t; }, Domain::unbounded(2));
  std::vector<SpacetimePoint> lattice;
  const int cols = 200;
  for (int k = 0; k < cols; ++k) lattice.push_back({vec({0.0, -1.0 + 2.0 * k / (cols - 1)}), 0.0});
  const auto f = propagate_front(m, fam, 0.0, 1.0, lattice, 1, cols);
  REQUIRE(f.failures() == 0);
  const auto rep = huygens_check(m, f, 0.2);
  CHECK(rep.checked > 150);
  CHECK(rep.max_defect < 2e-3);
  CHECK(front_normal_defect(m, f) < 1e-4);
}

TEST_CASE("tilted plane front translates") {
  const Medium m = Medium::homogeneous(1.0);
  const double a = 0.3;
  HypersurfaceFamily fam(2, [a](const Vec& q, double t) { return q(1) * std::sin(a) + t * std::cos(a); },
                         Domain::unbounded(2));
  std::vector<SpacetimePoint> lattice;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) lattice.push_back({vec({0.3 * r, 0.2 * c}), 0.0});
  }
  const auto f = propagate_front(m, fam, 0.0, 0.7, lattice, 3, 4);
  REQUIRE(f.failures() == 0);
  for (const auto& x : f.points) CHECK(fam.value(x.q, x.t) == doctest::Approx(0.7).epsilon(1e-10));
  for (const auto& p : f.momenta) {
    CHECK(std::abs(p(0)) < 1e-12);
    CHECK(p(1) == doctest::Approx(std::sin(a)).epsilon(1e-12));
  }
  HypersurfaceFamily wrong(2, [](const Vec& q, double t) { return q(1) + t; }, Domain::unbounded(2));
  CHECK_THROWS_AS(propagate_front(m, wrong, 0.0, 0.7, lattice, 3, 4), NotEquidistantFamily);
}

TEST_CASE("front propagation composes") {
  const Medium m = Medium::linear(1.0, vec({0.05, 0.1}));
  HypersurfaceFamily fam(2, [](const Vec& q, double t) { return (1.0 + 0.05 * q(0) + 0.1 * q(1)) * t; },
                         Domain::unbounded(2));
  std::vector<SpacetimePoint> lattice;
  for (int c = 0; c < 6; ++c) lattice.push_back({vec({0.1 * c, -0.2 * c}), 0.0});
  const auto whole = propagate_front(m, fam, 0.0, 1.1, lattice, 1, 6);
  const auto split = continue_front(m, propagate_front(m, fam, 0.0, 0.4, lattice, 1, 6), 0.7);
  for (std::size_t k = 0; k < whole.size(); ++k) {
    CHECK((lift(whole.points[k]) - lift(split.points[k])).norm() < 1e-8);
  }
  CHECK(split.T == doctest::Approx(1.1));
}
