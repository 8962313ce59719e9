#pragma once

/// @file systems.hpp
/// @brief Built-in mechanical systems shared by tests, scenarios and the CLI.

#include "hjkit/varcore.hpp"

namespace hjkit {

/// L = ½ m |q̇|² in n dimensions.
LagrangianSystem free_particle(int n = 1, double mass = 1.0);
/// L = ½ m |q̇|² − ½ m ω² |q|².
LagrangianSystem harmonic_oscillator(int n = 1, double omega = 1.0, double mass = 1.0);
/// L = ½ q̇² − V(q) with V = ½ q² + ¼ λ q⁴.
LagrangianSystem anharmonic_oscillator(double lambda);
/// Planar charge in a uniform field: L = ½|q̇|² + ½ B (q₁q̇₂ − q₂q̇₁) − ½ k |q|².
LagrangianSystem magnetic_particle(double field, double spring = 0.0);

/// H = |p|²/(2m), with analytic gradients.
HamiltonianSystem free_particle_hamiltonian(int n = 1, double mass = 1.0);
/// H = |p|²/(2m) + ½ m ω² |q|², with analytic gradients.
HamiltonianSystem harmonic_hamiltonian(int n = 1, double omega = 1.0, double mass = 1.0);

}  // namespace hjkit
