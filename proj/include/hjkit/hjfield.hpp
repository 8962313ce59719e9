#pragma once

/// @file hjfield.hpp
/// @brief Hypersurface families S(q, t) = σ and fields of extremals: the
/// Hamilton-Jacobi residual, geodesic equidistance, transversality, Lagrange
/// brackets and Hilbert's independent integral.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hjkit/varcore.hpp"

namespace hjkit {

/// Scalar S(q, t) whose level sets form the family. Gradients are analytic
/// when supplied, central differences otherwise.
class HypersurfaceFamily {
 public:
  using ValueFn = std::function<double(const Vec&, double)>;
  using GradFn = std::function<Vec(const Vec&, double)>;

  HypersurfaceFamily(int dim, ValueFn s, Domain domain);
  /// ∇_q S and S_t.
  HypersurfaceFamily& with_gradient(GradFn grad_q, ValueFn d_t);

  int dim() const { return dim_; }
  const Domain& domain() const { return domain_; }
  double value(const Vec& q, double t) const { return s_(q, t); }
  Vec grad_q(const Vec& q, double t) const;
  double d_t(const Vec& q, double t) const;

 private:
  int dim_;
  ValueFn s_;
  Domain domain_;
  GradFn grad_q_;
  ValueFn d_t_;
};

/// Moves (q, t) onto S = σ by Newton steps along the full (q, t) gradient.
/// Returns nothing if the iteration stalls or leaves the domain.
std::optional<SpacetimePoint> project_to_level(const HypersurfaceFamily& fam, const SpacetimePoint& x,
                                               double sigma, double tol = 1e-13);

/// S_t + H(q, ∇S, t). Throws DomainEscape outside the family's domain.
double hj_residual(const HamiltonianSystem& ham, const HypersurfaceFamily& fam, const Vec& q, double t);

/// Velocity q̇ solving L_q̇ = ∇S at (q, t).
Vec geodesic_gradient(const LagrangianSystem& lag, const HypersurfaceFamily& fam, const Vec& q, double t);

/// L/Δ at (q, t) for a family that need not be normalised: the scalar φ with
/// L(q̇) = φ Δ(q̇) where L_q̇(q̇) = φ ∇S and Δ = ∇S·q̇ + S_t.
/// Throws InversionFailure if no such φ is found near 1.
double geodesic_scale(const LagrangianSystem& lag, const HypersurfaceFamily& fam, const Vec& q, double t);

struct EquidistanceOptions {
  double step = 1e-3;
  /// Largest |t| excursion searched for the S = σ₂ crossing.
  double horizon = 10.0;
  double t_tol = 1e-10;
};

/// Complete-figure diagnostic: fundamental integral along each congruence
/// curve from S = σ₁ to S = σ₂.
struct EquidistanceReport {
  std::vector<double> actions;
  /// Arrival point on S = σ₂ per seed.
  std::vector<SpacetimePoint> endpoints;
  /// Error name and message for seeds that produced no action.
  std::vector<std::optional<std::string>> errors;
  double target = 0.0;
  double max_abs_deviation = 0.0;

  bool all_reached() const;
};

/// Seeds are projected onto S = σ₁ first. Seeds whose curve never meets
/// S = σ₂ within the horizon get a CrossingNotFound entry in `errors`.
EquidistanceReport equidistance_check(const LagrangianSystem& lag, const HypersurfaceFamily& fam, double sigma1,
                                      double sigma2, const std::vector<SpacetimePoint>& seeds,
                                      const EquidistanceOptions& opts = {});

/// p·δq − H δt with p = ∇S. Throws NotTangent when the displacement leaves
/// the level set by more than tol relative to its size.
double transversality_defect(const HamiltonianSystem& ham, const HypersurfaceFamily& fam, const SpacetimePoint& at,
                             const Vec& dq, double dt, double tol = 1e-8);

/// Residual ṗ + H_q along the congruence of a family, with ṗ taken by a
/// central difference of ∇S over RK4 steps of ±h along the congruence.
Vec family_canonical_residual(const LagrangianSystem& lag, const HamiltonianSystem& ham,
                              const HypersurfaceFamily& fam, const Vec& q, double t, double h);

/// Field (q(u, t), p(u, t)) with n parameters u.
class FieldCongruence {
 public:
  using MapFn = std::function<PhasePoint(const Vec&, double)>;

  FieldCongruence(int dim, MapFn map, Domain u_domain);

  int dim() const { return dim_; }
  const Domain& u_domain() const { return u_domain_; }
  PhasePoint at(const Vec& u, double t) const { return map_(u, t); }

  /// ∂q/∂u at (u, t).
  Mat position_jacobian(const Vec& u, double t) const;
  /// Solves q(u, t) = q for u by Newton from `seed`. Returns nothing on failure.
  std::optional<Vec> locate(const Vec& q, double t, const Vec& seed) const;

 private:
  int dim_;
  MapFn map_;
  Domain u_domain_;
};

/// [u_α, u_β] = Σᵢ (∂qᵢ/∂u_α ∂pᵢ/∂u_β − ∂qᵢ/∂u_β ∂pᵢ/∂u_α), antisymmetrised.
Mat lagrange_brackets(const FieldCongruence& field, const Vec& u, double t);

/// (∂q/∂t − H_p, ∂p/∂t + H_q) along the field curve through u.
Vec canonical_residual(const HamiltonianSystem& ham, const FieldCongruence& field, const Vec& u, double t);

/// Curve λ ↦ (q(λ), t(λ)) in extended configuration space, λ ∈ [l0, l1].
/// Derivatives default to five-point differences.
struct SpacetimePath {
  std::function<Vec(double)> q;
  std::function<double(double)> t;
  std::function<Vec(double)> dq;
  std::function<double(double)> dt;
  double l0 = 0.0;
  double l1 = 1.0;

  Vec q_prime(double l) const;
  double t_prime(double l) const;

  /// Straight segment from a to b.
  static SpacetimePath segment(const SpacetimePoint& a, const SpacetimePoint& b);
  /// The graph (q(t), t) of a curve.
  static SpacetimePath graph(const TimeCurve& curve);
};

/// ∫ (p·q′ − H t′) dλ with p = ∇S. Equals S(end) − S(start) when S solves
/// the Hamilton-Jacobi equation.
double hilbert_integral(const HamiltonianSystem& ham, const HypersurfaceFamily& fam, const SpacetimePath& path,
                        std::size_t panels = 400);

/// Same integral with p read from the field (u located by Newton along the path).
double hilbert_integral(const HamiltonianSystem& ham, const FieldCongruence& field, const SpacetimePath& path,
                        std::size_t panels = 400);

/// S(q, t) built as the field's Hilbert integral from `base` along straight
/// segments. The gradient is the field momentum and S_t = −H.
HypersurfaceFamily reconstruct_family(const HamiltonianSystem& ham, const FieldCongruence& field,
                                      const SpacetimePoint& base, const Domain& domain, std::size_t panels = 200);

struct NormalizeOptions {
  /// Allowed spread of L/Δ over one level set, relative to its mean.
  double tol = 1e-5;
};

/// Reparametrised family ψ(S) with ψ′ = φ = L/Δ interpolated linearly between
/// the sampled levels. Throws NotEquidistantFamily if L/Δ is not constant on
/// some level set.
HypersurfaceFamily normalize_family(const LagrangianSystem& lag, const HypersurfaceFamily& fam,
                                    const std::vector<SpacetimePoint>& lattice, const std::vector<double>& levels,
                                    const NormalizeOptions& opts = {});

}  // namespace hjkit
