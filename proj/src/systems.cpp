#include "hjkit/systems.hpp"

#include <stdexcept>

namespace hjkit {

namespace {

void check_dim(int n) {
  if (n <= 0 || n > kMaxDim) throw std::invalid_argument("system dimension out of range");
}

}  // namespace

LagrangianSystem free_particle(int n, double mass) { return harmonic_oscillator(n, 0.0, mass); }

LagrangianSystem harmonic_oscillator(int n, double omega, double mass) {
  check_dim(n);
  const double k = mass * omega * omega;
  LagrangianSystem sys(
      n, [mass, k](const VarState& s) { return 0.5 * mass * s.qdot.squaredNorm() - 0.5 * k * s.q.squaredNorm(); },
      Domain::unbounded(n));
  sys.with_gradients([k](const VarState& s) -> Vec { return -k * s.q; },
                     [mass](const VarState& s) -> Vec { return mass * s.qdot; });
  sys.with_velocity_hessian([mass, n](const VarState&) -> Mat { return mass * Mat::Identity(n, n); });
  sys.with_time_derivative([](const VarState&) { return 0.0; });
  return sys;
}

LagrangianSystem anharmonic_oscillator(double lambda) {
  LagrangianSystem sys(
      1,
      [lambda](const VarState& s) {
        const double q = s.q(0);
        return 0.5 * s.qdot(0) * s.qdot(0) - 0.5 * q * q - 0.25 * lambda * q * q * q * q;
      },
      Domain::unbounded(1));
  sys.with_gradients([lambda](const VarState& s) -> Vec {
                       const double q = s.q(0);
                       return vec({-q - lambda * q * q * q});
                     },
                     [](const VarState& s) -> Vec { return s.qdot; });
  return sys;
}

LagrangianSystem magnetic_particle(double field, double spring) {
  LagrangianSystem sys(
      2,
      [field, spring](const VarState& s) {
        const Vec& q = s.q;
        const Vec& v = s.qdot;
        return 0.5 * v.squaredNorm() + 0.5 * field * (q(0) * v(1) - q(1) * v(0)) - 0.5 * spring * q.squaredNorm();
      },
      Domain::unbounded(2));
  sys.with_gradients(
      [field, spring](const VarState& s) -> Vec {
        return vec({0.5 * field * s.qdot(1) - spring * s.q(0), -0.5 * field * s.qdot(0) - spring * s.q(1)});
      },
      [field](const VarState& s) -> Vec {
        return vec({s.qdot(0) - 0.5 * field * s.q(1), s.qdot(1) + 0.5 * field * s.q(0)});
      });
  return sys;
}

HamiltonianSystem free_particle_hamiltonian(int n, double mass) { return harmonic_hamiltonian(n, 0.0, mass); }

HamiltonianSystem harmonic_hamiltonian(int n, double omega, double mass) {
  check_dim(n);
  const double k = mass * omega * omega;
  HamiltonianSystem ham(
      n, [mass, k](const PhasePoint& x) { return 0.5 * x.p.squaredNorm() / mass + 0.5 * k * x.q.squaredNorm(); },
      Domain::unbounded(n));
  ham.with_gradients([k](const PhasePoint& x) -> Vec { return k * x.q; },
                     [mass](const PhasePoint& x) -> Vec { return x.p / mass; });
  ham.with_time_derivative([](const PhasePoint&) { return 0.0; });
  return ham;
}

}  // namespace hjkit
