#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hjkit/wavemech.hpp"

using namespace hjkit;

namespace {

double free_width(double s0, double t, double hbar = 1.0, double m = 1.0) {
  const double r = hbar * t / (2.0 * m * s0 * s0);
  return s0 * std::sqrt(1.0 + r * r);
}

WaveGrid gaussian_line(int n, double L, double s0, double hbar = 1.0) {
  PacketScenario s;
  s.n = n;
  s.x_min = -L / 2;
  s.x_max = L / 2;
  s.sigma = s0;
  s.hbar = hbar;
  return gaussian_packet(s);
}

WaveGrid plane_wave(int n, double L, int mode, double t = 0.0) {
  WaveGrid g = WaveGrid::line(n, 0.0, L / n);
  const double k = 2 * kPi * mode / L;
  const double w = k * k / 2;
  g.fill([&](const Vec& q) { return std::exp(cplx(0, k * q(0) - w * t)); });
  g.t = t;
  return g;
}

}  // namespace

TEST_CASE("front speed and de broglie relations") {
  ConservativeHJ free{[](const Vec& q) { return 2 * q(0); }, 2.0, {}};
  CHECK(wavefront_speed(free, vec({0.3})) == doctest::Approx(1.0).epsilon(1e-9));
  ConservativeHJ slow{[](const Vec& q) { return 2 * q(0); }, 1.0, {}};
  CHECK(wavefront_speed(slow, vec({0.3})) == doctest::Approx(0.5).epsilon(1e-9));
  // Oscillator at energy E: |∇S*| = √(2(E − q²/2)) vanishes at the turning point.
  const double E = 0.5;
  ConservativeHJ osc{[](const Vec&) { return 0.0; }, E,
                     [E](const Vec& q) { return vec({std::sqrt(std::max(0.0, 2 * (E - 0.5 * q(0) * q(0))))}); }};
  CHECK_THROWS_AS(wavefront_speed(osc, vec({1.0})), StationaryFront);

  const auto w = debroglie(2, 2, 1);
  CHECK(w.u == doctest::Approx(1));
  CHECK(w.nu == doctest::Approx(2));
  CHECK(w.lambda == doctest::Approx(0.5));
  const auto w2 = debroglie(2, 2, 2);
  CHECK(w2.nu == doctest::Approx(w.nu / 2));
  CHECK(w2.lambda == doctest::Approx(w.lambda * 2));
  CHECK(w2.u == doctest::Approx(w.u));
  const auto w3 = debroglie(0.5, 1, 2 * kPi);
  CHECK(w3.lambda == doctest::Approx(2 * kPi));
  CHECK(w3.nu == doctest::Approx(1 / (4 * kPi)));
  for (double E : {0.1, 3.7, -2.0}) {
    const auto x = debroglie(E, 1.3, 0.7);
    CHECK(x.u == x.lambda * x.nu);
  }
  CHECK_THROWS_AS(debroglie(1, 0, 1), std::invalid_argument);
}

TEST_CASE("plane wave phase advance") {
  const double L = 10;
  const WaveGrid g = plane_wave(64, L, 5);
  const double dt = 0.01;
  const WaveGrid h = schrodinger_step(g, dt);
  const double k = 2 * kPi * 5 / L;
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(std::abs(h.psi[i] - g.psi[i] * std::exp(cplx(0, -k * k * dt / 2))) < 1e-12);
  }
  CHECK(h.t == doctest::Approx(dt));
}

TEST_CASE("unitarity over many steps") {
  WaveGrid g = gaussian_line(256, 20, 0.7);
  g.set_potential([](const Vec& q) { return 0.5 * q(0) * q(0) + 0.1 * std::pow(q(0), 4); });
  SplitStepPropagator prop(g);
  const double n0 = g.norm();
  double worst_step = 0.0;
  for (int s = 0; s < 1000; ++s) {
    const double before = g.norm();
    prop.step(g, 1e-3);
    worst_step = std::max(worst_step, std::abs(g.norm() - before));
  }
  CHECK(std::abs(g.norm() - n0) < 1e-9);
  CHECK(worst_step < 1e-12);

  WaveGrid p = WaveGrid::plane(64, 32, -5, -5, 10.0 / 64);
  p.fill([](const Vec& q) { return std::exp(cplx(-q.squaredNorm(), q(0))); });
  p.set_potential([](const Vec& q) { return 0.5 * q.squaredNorm(); });
  p.normalize();
  SplitStepPropagator prop2(p);
  for (int s = 0; s < 1000; ++s) prop2.step(p, 1e-3);
  CHECK(std::abs(p.norm() - 1.0) < 1e-9);

  CHECK_THROWS_AS(prop.step(g, 0.0), UnstableStep);
  WaveGrid hot = g;
  std::fill(hot.V.begin(), hot.V.end(), 1e4);
  CHECK_THROWS_AS(prop.step(hot, 1.0), UnstableStep);
}

TEST_CASE("free gaussian spreading") {
  const double s0 = 0.8;
  WaveGrid g = gaussian_line(2048, 80, s0);
  CHECK(g.position_spread()(0) == doctest::Approx(s0).epsilon(1e-10));
  SplitStepPropagator prop(g);
  for (int s = 1; s <= 400; ++s) {
    prop.step(g, 5e-3);
    if (s % 100 == 0) CHECK(std::abs(g.position_spread()(0) - free_width(s0, g.t)) < 1e-4);
  }
}

TEST_CASE("polar decomposition") {
  WaveGrid g = WaveGrid::line(200, -10, 0.1);
  g.fill([](const Vec& q) { return std::exp(cplx(0, q(0))); });
  const Polar p = polar_decompose(g);
  double offset = p.S.v[0] - g.x(0);
  offset -= 2 * kPi * std::round(offset / (2 * kPi));
  for (int i = 0; i < g.nx; ++i) {
    CHECK(std::abs(p.R.at(i) - 1) < 1e-14);
    CHECK(std::abs(p.S.at(i) - g.x(i) - (p.S.v[0] - g.x(0))) < 1e-12);
  }
  CHECK(std::abs(offset) < 1e-12);
  CHECK(p.regions == 1);
  for (std::size_t k = 0; k < g.size(); ++k) {
    CHECK(std::abs(p.R.v[k] * std::exp(cplx(0, p.S.v[k] / g.hbar)) - g.psi[k]) < 1e-12);
  }

  const WaveGrid real = gaussian_line(128, 10, 1);
  for (double s : polar_decompose(real).S.v) CHECK(s == 0.0);

  WaveGrid xy = WaveGrid::plane(32, 24, -3, -2, 0.2, 0.5);
  xy.fill([](const Vec& q) { return std::exp(cplx(0, (q(0) + 2 * q(1)) / 0.5)); });
  const Polar pxy = polar_decompose(xy);
  const double c = pxy.S.v[0] - (xy.x(0) + 2 * xy.y(0));
  for (std::size_t k = 0; k < xy.size(); ++k) {
    const Vec q = xy.point(k);
    CHECK(std::abs(pxy.S.v[k] - (q(0) + 2 * q(1)) - c) < 1e-12);
  }

  WaveGrid nodal = WaveGrid::line(21, -1, 0.1);
  nodal.fill([](const Vec& q) { return cplx(std::round(q(0) * 10) / 10, 0); });
  CHECK_THROWS_AS(polar_decompose(nodal), NodeOnPath);
  const Polar masked = polar_decompose(nodal, 1e-8, NodePolicy::Mask);
  CHECK(masked.regions == 2);
  CHECK(masked.region[10] == -1);
  CHECK(std::isnan(masked.S.v[10]));
}

TEST_CASE("quantum potential") {
  GridScalar flat{50, 1, 0.1, std::vector<double>(50, 2.0)};
  CHECK(quantum_potential(flat, 1, 1).max_abs() < 1e-12);
  CHECK(std::isnan(quantum_potential(flat, 1, 1).v[0]));

  const double s = 0.7;
  const double dx = 1e-3;
  GridScalar R{2001, 1, dx, {}};
  for (int i = 0; i < R.nx; ++i) {
    const double q = (i - 1000) * dx;
    R.v.push_back(std::exp(-q * q / (4 * s * s)));
  }
  const GridScalar Q = quantum_potential(R, 1.0, 2.0);
  CHECK(Q.at(1000) == doctest::Approx(1.0 / (4 * 2.0 * s * s)).epsilon(1e-6));
  for (int i = 100; i < R.nx - 100; i += 100) {
    const double q = (i - 1000) * dx;
    const double exact = -(1.0 / 4.0) * (q * q / (4 * std::pow(s, 4)) - 1 / (2 * s * s));
    CHECK(std::abs(Q.at(i) - exact) < 1e-6);
  }

  // Plane waves have constant amplitude.
  CHECK(quantum_potential(polar_decompose(plane_wave(64, 10, 3)).R, 1, 1).max_abs() < 1e-12);
}

TEST_CASE("guidance matches the momentum eigenrelation") {
  const WaveGrid g = plane_wave(128, 10, 4);
  const double k = 2 * kPi * 4 / 10;
  const Polar p = polar_decompose(g);
  for (int i = 1; i + 1 < g.nx; ++i) {
    const double grad_s = (p.S.at(i + 1) - p.S.at(i - 1)) / (2 * g.dx);
    const cplx dpsi = (g.psi[i + 1] - g.psi[i - 1]) / (2 * g.dx);
    // -iħ ψ′/ψ of a plane wave is ħ sin(k dx)/dx; the phase difference recovers ħk.
    CHECK(grad_s == doctest::Approx(k).epsilon(1e-12));
    CHECK(std::real(cplx(0, -1) * dpsi / g.psi[i]) == doctest::Approx(std::sin(k * g.dx) / g.dx).epsilon(1e-10));
  }
}

TEST_CASE("bohm trajectories") {
  SUBCASE("free gaussian") {
    const double s0 = 0.8;
    const WaveGrid g = gaussian_line(1024, 40, s0);
    const auto hist = WaveHistory::record(g, 2e-3, 1000, 1, 0.0);
    for (double q0 : {-1.2, 0.3, 0.9}) {
      const auto tr = bohm_trajectory(hist, vec({q0}), {0, 2}, 2e-3);
      for (std::size_t k = 0; k < tr.t.size(); k += 100) {
        CHECK(std::abs(tr.q[k](0) - q0 * free_width(s0, tr.t[k]) / s0) < 1e-3);
      }
    }
  }
  SUBCASE("stationary ground state") {
    WaveGrid g = gaussian_line(256, 20, std::sqrt(0.5));
    g.set_potential([](const Vec& q) { return 0.5 * q(0) * q(0); });
    const auto hist = WaveHistory::record(g, 1e-3, 500);
    const auto tr = bohm_trajectory(hist, vec({0.7}), {0, 0.5}, 1e-3);
    CHECK(std::abs(tr.q.back()(0) - 0.7) < 1e-6);
  }
  SUBCASE("plane wave") {
    const auto hist = WaveHistory::record(plane_wave(128, 10, 2), 1e-2, 100);
    const auto tr = bohm_trajectory(hist, vec({1.0}), {0, 1}, 1e-2);
    const double k = 2 * kPi * 2 / 10;
    CHECK(tr.q.back()(0) == doctest::Approx(1.0 + k).epsilon(1e-10));
  }
  SUBCASE("node") {
    WaveGrid g = WaveGrid::line(100, 0, 0.1);
    g.fill([](const Vec& q) { return cplx(std::sin(2 * kPi * q(0) / 10), 0); });
    g.psi[0] = 0;
    const WaveHistory hist({g});
    CHECK_THROWS_AS(bohm_trajectory(hist, vec({0.0}), {0, 0}, 1e-2), NodeEncounter);
  }
}

TEST_CASE("pilot-wave residuals") {
  SUBCASE("plane wave is exact") {
    const double dt = 1e-2;
    const auto r = pilot_wave_residuals(plane_wave(128, 10, 3, 0), plane_wave(128, 10, 3, dt),
                                        plane_wave(128, 10, 3, 2 * dt));
    CHECK(r.qhj.max_abs() < 1e-10);
    CHECK(r.continuity.max_abs() < 1e-10);
    const WaveGrid g = plane_wave(128, 10, 3);
    SplitStepPropagator prop(g);
    WaveGrid a = g;
    prop.step(a, dt);
    WaveGrid b = a;
    prop.step(b, dt);
    const auto rp = pilot_wave_residuals(g, a, b);
    CHECK(rp.qhj.max_abs() < 1e-10);
    CHECK(rp.continuity.max_abs() < 1e-10);
  }
  SUBCASE("stationary eigenstate") {
    WaveGrid g = gaussian_line(256, 20, std::sqrt(0.5));
    g.set_potential([](const Vec& q) { return 0.5 * q(0) * q(0); });
    SplitStepPropagator prop(g);
    WaveGrid a = g;
    prop.step(a, 1e-3);
    WaveGrid b = a;
    prop.step(b, 1e-3);
    const auto r = pilot_wave_residuals(g, a, b, 1e-8, 1e-3);
    CHECK(r.continuity.max_abs() < 1e-6);
    // ħ·(time phase rate) = −E with E = ħω/2.
    CHECK(std::abs(time_phase_rate(g, b, 128) + 0.5) < 1e-6);
  }
  SUBCASE("second order under refinement") {
    auto norms = [](int n, double dt) {
      WaveGrid g = gaussian_line(n, 30, 1.0);
      g.fill([](const Vec& q) {
        return std::pow(2 * kPi, -0.25) * std::exp(cplx(-q(0) * q(0) / 4, 0.5 * q(0)));
      });
      SplitStepPropagator prop(g);
      for (double t = 0; t < 0.5 - 1e-12; t += dt) prop.step(g, dt);
      WaveGrid a = g;
      prop.step(a, dt);
      WaveGrid b = a;
      prop.step(b, dt);
      const auto r = pilot_wave_residuals(g, a, b, 1e-8, 1e-2);
      return std::pair{weighted_norm(r.qhj, a), weighted_norm(r.continuity, a)};
    };
    const auto coarse = norms(256, 0.1);
    const auto fine = norms(512, 0.05);
    MESSAGE("qhj ratio " << coarse.first / fine.first << " continuity ratio " << coarse.second / fine.second);
    CHECK(coarse.first / fine.first == doctest::Approx(4.0).epsilon(0.2));
    CHECK(coarse.second / fine.second == doctest::Approx(4.0).epsilon(0.2));
  }
}

TEST_CASE("classical limit") {
  SUBCASE("free packet") {
    PacketScenario s;
    s.n = 1024;
    s.x_min = -20;
    s.x_max = 20;
    s.p0 = 1.0;
    s.sigma = 1.5;
    s.horizon = 2.0;
    s.dt = 2e-3;
    const auto r = classical_limit_check(s);
    CHECK(r.max_deviation < 1e-3);
    CHECK(std::abs(r.grid_mean.back() - 2.0) < 1e-6);
  }
  SUBCASE("harmonic well") {
    PacketScenario s;
    s.n = 512;
    s.x_min = -10;
    s.x_max = 10;
    s.center = 1.0;
    s.sigma = 0.5;
    s.V = [](double x) { return 0.5 * x * x; };
    s.dV = [](double x) { return x; };
    s.horizon = 2.0;
    s.dt = 1e-3;
    CHECK(classical_limit_check(s).max_deviation < 1e-3);
  }
  SUBCASE("anharmonic trend") {
    PacketScenario s;
    s.n = 512;
    s.x_min = -5;
    s.x_max = 5;
    s.center = 1.0;
    s.sigma = std::sqrt(0.1);
    s.hbar = 0.2;
    s.V = [](double x) { return 0.5 * x * x + 0.25 * x * x * x * x; };
    s.dV = [](double x) { return x + x * x * x; };
    s.horizon = 1.5;
    s.dt = 1e-3;
    const auto tr = classical_limit_trend(s, {0.2, 0.1, 0.05});
    MESSAGE("deviations " << tr.deviation[0] << " " << tr.deviation[1] << " " << tr.deviation[2]);
    CHECK(tr.monotone);
  }
}
