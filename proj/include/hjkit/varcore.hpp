#pragma once

/// @file varcore.hpp
/// @brief Variational systems: Lagrangians, the Legendre transformation to
/// Hamiltonians, Euler-Lagrange residuals, canonical extremal integration and
/// the homogenised system in which the parameter becomes a coordinate.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>

#include "hjkit/errors.hpp"
#include "hjkit/numerics.hpp"
#include "hjkit/types.hpp"

namespace hjkit {

/// L(q, q̇, t) with optional analytic derivatives. Missing derivatives are
/// taken by central differences.
class LagrangianSystem {
 public:
  using ValueFn = std::function<double(const VarState&)>;
  using VecFn = std::function<Vec(const VarState&)>;
  using MatFn = std::function<Mat(const VarState&)>;

  LagrangianSystem(int dim, ValueFn lagrangian, Domain domain);

  LagrangianSystem& with_gradients(VecFn d_q, VecFn d_qdot);
  LagrangianSystem& with_velocity_hessian(MatFn hess);
  LagrangianSystem& with_time_derivative(ValueFn d_t);

  int dim() const { return dim_; }
  const Domain& domain() const { return domain_; }

  double value(const VarState& s) const { return value_(s); }
  double operator()(const VarState& s) const { return value_(s); }
  Vec d_q(const VarState& s) const;
  Vec d_qdot(const VarState& s) const;
  double d_t(const VarState& s) const;
  /// Matrix L_q̇ᵢq̇ⱼ.
  Mat velocity_hessian(const VarState& s) const;

  bool has_analytic_gradients() const { return static_cast<bool>(d_qdot_); }

 private:
  int dim_;
  ValueFn value_;
  Domain domain_;
  VecFn d_q_;
  VecFn d_qdot_;
  MatFn hess_;
  ValueFn d_t_;
};

/// Determinant of the velocity Hessian and whether it counts as degenerate.
struct HessianCheck {
  double det = 0.0;
  /// Frobenius norm of the Hessian; degeneracy is judged relative to norm^n.
  double norm = 0.0;
  bool degenerate = false;
};

inline constexpr double kDegeneracyTol = 1e-8;

HessianCheck hessian_det(const LagrangianSystem& sys, const VarState& state,
                         double degeneracy_tol = kDegeneracyTol);

/// Throws DegenerateLagrangian when hessian_det flags the state.
void require_nondegenerate(const LagrangianSystem& sys, const VarState& state,
                           double degeneracy_tol = kDegeneracyTol);

struct InversionOptions {
  double tol = 1e-10;
  int max_iter = 50;
};

/// Solves L_q̇(q, q̇, t) = p for q̇ by damped Newton from `seed`.
/// Throws InversionFailure carrying the last residual norm.
Vec invert_momentum(const LagrangianSystem& sys, const Vec& q, const Vec& p, double t,
                    const Vec& seed, const InversionOptions& opts = {});

/// H(q, p, t) either supplied directly or obtained from a Lagrangian by the
/// Legendre transformation.
class HamiltonianSystem {
 public:
  using ValueFn = std::function<double(const PhasePoint&)>;
  using VecFn = std::function<Vec(const PhasePoint&)>;

  HamiltonianSystem(int dim, ValueFn hamiltonian, Domain domain);

  HamiltonianSystem& with_gradients(VecFn d_q, VecFn d_p);
  HamiltonianSystem& with_time_derivative(ValueFn d_t);

  int dim() const { return dim_; }
  const Domain& domain() const { return domain_; }

  double value(const PhasePoint& x) const { return value_(x); }
  double operator()(const PhasePoint& x) const { return value_(x); }
  Vec d_q(const PhasePoint& x) const;
  Vec d_p(const PhasePoint& x) const;
  double d_t(const PhasePoint& x) const;
  /// Matrix H_pᵢpⱼ by differences of H_p.
  Mat momentum_hessian(const PhasePoint& x) const;

  /// q̇ = H_p.
  Vec velocity(const PhasePoint& x) const { return d_p(x); }
  /// L = p·H_p − H evaluated on the phase point.
  double lagrangian(const PhasePoint& x) const;

  bool is_derived() const { return static_cast<bool>(source_); }
  /// The Lagrangian this Hamiltonian was derived from, if any.
  const LagrangianSystem* source() const { return source_.get(); }

 private:
  friend HamiltonianSystem to_hamiltonian(const LagrangianSystem&, const InversionOptions&);

  int dim_;
  ValueFn value_;
  Domain domain_;
  VecFn d_q_;
  VecFn d_p_;
  ValueFn d_t_;
  std::shared_ptr<const LagrangianSystem> source_;
};

/// Legendre transformation. Spot-checks the Hessian on a sample lattice of
/// the domain first (throws DegenerateLagrangian). The returned H inverts
/// p = L_q̇ on demand, warm-starting from the calling thread's previous
/// inversion for this system.
HamiltonianSystem to_hamiltonian(const LagrangianSystem& sys, const InversionOptions& opts = {});

/// Parametrised curve q(t) on [t0, t1] with optional analytic velocity.
struct TimeCurve {
  std::function<Vec(double)> q;
  std::function<Vec(double)> qdot;
  double t0 = 0.0;
  double t1 = 0.0;

  Vec position(double t) const { return q(t); }
  /// Analytic velocity if present, else a five-point difference.
  Vec velocity(double t) const;

  /// Dense curve through the samples of an extremal: each query restarts the
  /// canonical flow from the nearest earlier sample.
  static TimeCurve from_extremal(const ExtremalCurve& curve, const HamiltonianSystem& ham);
};

/// ∫ L dt along the curve by composite Simpson on `quadrature_steps` panels.
/// Throws BadCurve for t1 < t0 and DomainEscape when a node leaves the domain.
double fundamental_integral(const LagrangianSystem& sys, const TimeCurve& curve,
                            std::size_t quadrature_steps);

/// d/dt L_q̇ − L_q at time t along the curve. Throws BoundaryPoint when the
/// difference stencil does not fit inside [t0, t1].
Vec el_residual(const LagrangianSystem& sys, const TimeCurve& curve, double t);

struct StepControl {
  /// Largest step; the span is divided into equal steps not exceeding it.
  /// For t-independent H the energy drift of the fourth-order scheme over a
  /// fixed horizon scales as step^4.
  double step = 1e-3;
};

/// Integrates q̇ = H_p, ṗ = −H_q with the fundamental integral alongside.
/// Throws DomainEscape (carrying the partial curve) if the trajectory leaves
/// the domain.
ExtremalCurve integrate_extremal(const HamiltonianSystem& ham, const PhasePoint& start,
                                 double t_end, const StepControl& control = {});

/// Canonical right-hand side on y = (q, p, action).
Rhs canonical_rhs(const HamiltonianSystem& ham);

/// Outcome of canonical integration stopped by an event.
struct StoppedExtremal {
  ExtremalCurve curve;
  bool hit = false;
};

/// Event function on (t, phase point, running action); integration stops at
/// its first sign change, refined by bisection in t to `t_tol`.
using ExtremalEvent = std::function<double(double, const PhasePoint&, double)>;

/// Integrates from `start` over at most `max_span` in t (negative spans run
/// backwards) and stops at the first sign change of `event`.
StoppedExtremal integrate_extremal_until(const HamiltonianSystem& ham, const PhasePoint& start,
                                         double max_span, const ExtremalEvent& event,
                                         const StepControl& control = {}, double t_tol = 1e-12);

/// The system with the parameter promoted to the last coordinate q_n:
/// L*(q, q') = L(q_α, q'_α / q'_n, q_n) q'_n and Φ(q, p) = H(q_α, p_α, q_n) + p_n.
class ExtendedSystem {
 public:
  ExtendedSystem(LagrangianSystem base, HamiltonianSystem ham);

  /// Extended dimension (base dimension + 1).
  int dim() const { return base_.dim() + 1; }
  const LagrangianSystem& base() const { return base_; }
  const HamiltonianSystem& hamiltonian() const { return ham_; }

  /// Throws BadParameterDirection when q'_n <= 0.
  double lstar(const Vec& q, const Vec& qprime) const;
  double phi(const Vec& q, const Vec& p) const;
  /// Momenta ∂L*/∂q'ᵢ by central differences.
  Vec momenta(const Vec& q, const Vec& qprime) const;

 private:
  LagrangianSystem base_;
  HamiltonianSystem ham_;
};

/// Builds the extended system; the Hamiltonian comes from to_hamiltonian.
ExtendedSystem homogenize(const LagrangianSystem& sys);

/// p_n = L − Σ p_α q̇_α for the line element.
double parameter_momentum(const LagrangianSystem& sys, const VarState& state);

}  // namespace hjkit
