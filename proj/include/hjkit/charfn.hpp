#pragma once

/// @file charfn.hpp
/// @brief Hamilton's two-point characteristic function S(q₁, t₁; q₂, t₂) by
/// boundary-value shooting, its gradients, and trajectory recovery from S.

#include <functional>
#include <optional>

#include "hjkit/varcore.hpp"

namespace hjkit {

struct TwoPointResult {
  double value = 0.0;
  Vec p1;
  Vec p2;
  bool converged = false;
  int shots = 0;
};

struct ShootingOptions {
  /// Terminal position tolerance.
  double tol = 1e-10;
  int max_iter = 50;
  StepControl step{1e-3};
  /// Re-shoot from perturbed seeds and report AmbiguousConnection if a
  /// different initial momentum also connects the points.
  bool probe_ambiguity = false;
};

/// Momentum p with H_p(q₁, p, t₁) = (q₂ − q₁)/(t₂ − t₁); zero if that fails.
Vec straight_line_seed(const HamiltonianSystem& ham, const SpacetimePoint& p1, const SpacetimePoint& p2);

/// Newton shooting on the initial momentum. Throws BadCurve unless t₂ > t₁,
/// NoConnection if shooting diverges and AmbiguousConnection when the
/// connection is not locally unique.
TwoPointResult two_point_characteristic(const HamiltonianSystem& ham, const SpacetimePoint& p1,
                                        const SpacetimePoint& p2, const std::optional<Vec>& seed_p1 = std::nullopt,
                                        const ShootingOptions& opts = {});

struct CharGradients {
  double s_t1 = 0.0;
  Vec s_q1;
  double s_t2 = 0.0;
  Vec s_q2;
  /// The connecting extremal the differences were taken around.
  TwoPointResult base;
};

/// Central differences of the shooting value with steps h(1 + |x|).
CharGradients char_gradients(const HamiltonianSystem& ham, const SpacetimePoint& p1, const SpacetimePoint& p2,
                             double h = 1e-4, const ShootingOptions& opts = {});

/// Anything that evaluates S(q₁, t₁; q₂, t₂). Gradients default to central
/// differences with step `fd_step(x)`.
class CharacteristicFunction {
 public:
  virtual ~CharacteristicFunction() = default;
  virtual int dim() const = 0;
  virtual double value(const SpacetimePoint& p1, const SpacetimePoint& p2) const = 0;
  virtual Vec grad_q1(const SpacetimePoint& p1, const SpacetimePoint& p2) const;
  virtual Vec grad_q2(const SpacetimePoint& p1, const SpacetimePoint& p2) const;

 protected:
  virtual double step(double x) const { return fd_step(x); }
};

/// S given in closed form.
class AnalyticCharacteristic : public CharacteristicFunction {
 public:
  using Fn = std::function<double(const SpacetimePoint&, const SpacetimePoint&)>;
  AnalyticCharacteristic(int dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}
  int dim() const override { return dim_; }
  double value(const SpacetimePoint& p1, const SpacetimePoint& p2) const override { return fn_(p1, p2); }

 private:
  int dim_;
  Fn fn_;
};

/// S from two_point_characteristic with the straight-line seed.
class ShootingCharacteristic : public CharacteristicFunction {
 public:
  explicit ShootingCharacteristic(HamiltonianSystem ham, ShootingOptions opts = {}, double h = 1e-4)
      : ham_(std::move(ham)), opts_(opts), h_(h) {}
  int dim() const override { return ham_.dim(); }
  double value(const SpacetimePoint& p1, const SpacetimePoint& p2) const override;

 protected:
  double step(double x) const override { return h_ * (1.0 + std::abs(x)); }

 private:
  HamiltonianSystem ham_;
  ShootingOptions opts_;
  double h_;
};

/// Free-particle S = m|q₂ − q₁|²/(2Δt).
double free_particle_action(const SpacetimePoint& p1, const SpacetimePoint& p2, double mass = 1.0);
/// Oscillator S = mω[(|q₁|² + |q₂|²) cos ωT − 2 q₁·q₂]/(2 sin ωT), T = t₂ − t₁.
double harmonic_action(const SpacetimePoint& p1, const SpacetimePoint& p2, double omega = 1.0, double mass = 1.0);

struct RecoveredState {
  Vec q2;
  Vec p2;
  int iterations = 0;
};

/// Solves ∂S/∂q₁ = −p₁ for q₂ by Newton and reads p₂ = ∂S/∂q₂. The default
/// seed is q₁ + (t₂ − t₁) p₁. Throws RecoveryFailure if the solve fails.
RecoveredState recover_trajectory(const CharacteristicFunction& s, const Vec& q1, const Vec& p1, double t1, double t2,
                                  const std::optional<Vec>& seed_q2 = std::nullopt);

}  // namespace hjkit
