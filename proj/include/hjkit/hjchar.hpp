#pragma once

/// @file hjchar.hpp
/// @brief First-order PDE Φ(q, ∂S/∂q) = 0 solved by characteristic strips
/// launched from an initial data surface.

#include <functional>
#include <vector>

#include "hjkit/varcore.hpp"

namespace hjkit {

/// Φ(q, p) on n ≤ 3 coordinates with optional analytic gradients.
class PdeProblem {
 public:
  using ValueFn = std::function<double(const Vec&, const Vec&)>;
  using GradFn = std::function<Vec(const Vec&, const Vec&)>;

  PdeProblem(int dim, ValueFn phi, Domain domain);
  PdeProblem& with_gradients(GradFn d_q, GradFn d_p);

  /// Φ = H(q_α, p_α, q_n) + p_n on the coordinates (q_α, t).
  static PdeProblem from_hamiltonian(const HamiltonianSystem& ham);

  int dim() const { return dim_; }
  const Domain& domain() const { return domain_; }
  double value(const Vec& q, const Vec& p) const { return phi_(q, p); }
  Vec d_q(const Vec& q, const Vec& p) const;
  Vec d_p(const Vec& q, const Vec& p) const;

 private:
  int dim_;
  ValueFn phi_;
  Domain domain_;
  GradFn d_q_;
  GradFn d_p_;
};

/// Data surface q = a(u) carrying S = c(u), u in an (n−1)-dimensional box.
struct InitialSurface {
  std::function<Vec(const Vec&)> a;
  std::function<double(const Vec&)> c;
  /// Must be bounded; its dimension is n − 1.
  Domain u_domain;

  int dim_u() const { return u_domain.dim(); }
  /// ∂a/∂u (n × (n−1)) by central differences.
  Mat tangent(const Vec& u, int n) const;
};

/// Solves Φ(a(u), b) = 0 and ∂c/∂u_α = b·∂a/∂u_α for b by Newton from `seed`.
/// Throws StripFailure when Newton diverges or the system is singular away
/// from a root.
Vec solve_strip_conditions(const PdeProblem& prob, const InitialSurface& surf, const Vec& u, const Vec& seed);

/// Strips on a uniform lattice of the u box (`counts` points per axis,
/// first axis fastest). Each strip is seeded from its solved predecessor.
struct StripLattice {
  std::vector<int> counts;
  std::vector<Vec> u;
  std::vector<Vec> b;
};

StripLattice solve_strips(const PdeProblem& prob, const InitialSurface& surf, const std::vector<int>& counts,
                          const Vec& seed);

struct SheetOptions {
  /// Samples whose (s, u) → q Jacobian, normalised by the column lengths,
  /// falls below this are flagged.
  double jac_tol = 1e-6;
};

/// Characteristic congruence q(s, u), p(s, u), z(s, u) sampled on the
/// (s, u) lattice. Keeps the problem and surface so strips can be
/// re-integrated at arbitrary (s, u).
class CharacteristicSheet {
 public:
  struct Strip {
    Vec u;
    Vec b;
    std::vector<Vec> q;
    std::vector<Vec> p;
    std::vector<double> z;
    /// False once the strip has left the problem's domain.
    std::vector<char> valid;
    std::vector<char> jacobian_ok;
  };

  const PdeProblem& problem() const { return prob_; }
  const InitialSurface& surface() const { return surf_; }
  const std::vector<Strip>& strips() const { return strips_; }
  const std::vector<double>& s_values() const { return s_; }
  const std::vector<int>& counts() const { return counts_; }
  Interval s_range() const { return {s_.front(), s_.back()}; }
  double step() const { return step_; }

  /// max |Φ(q, p)| over valid samples.
  double max_phi_residual() const;
  /// Number of samples flagged by the Jacobian test.
  std::size_t flagged_cells() const;

  /// State (q, p, z) at arbitrary (s, u) by solving the strip at u and
  /// integrating from s = 0.
  StateVec integrate_to(double s, const Vec& u) const;
  /// Same, with the strip momentum already known.
  StateVec integrate_to(double s, const Vec& u, const Vec& b) const;
  /// Momentum of the lattice strip nearest to u, a seed for strip solves.
  Vec strip_seed(const Vec& u) const;

 private:
  friend CharacteristicSheet trace_characteristics(const PdeProblem&, const InitialSurface&, const StripLattice&,
                                                   Interval, double, const SheetOptions&);
  CharacteristicSheet(PdeProblem prob, InitialSurface surf) : prob_(std::move(prob)), surf_(std::move(surf)) {}

  PdeProblem prob_;
  InitialSurface surf_;
  std::vector<int> counts_;
  std::vector<double> s_;
  std::size_t s_zero_ = 0;
  double step_ = 0.0;
  std::vector<Strip> strips_;
};

/// Integrates q̇ = Φ_p, ṗ = −Φ_q, ż = p·Φ_p from s = 0 over `s_range`
/// (which must contain 0) for each strip. Strips that leave the domain are
/// truncated and flagged invalid from that sample on.
CharacteristicSheet trace_characteristics(const PdeProblem& prob, const InitialSurface& surf,
                                          const StripLattice& strips, Interval s_range, double step,
                                          const SheetOptions& opts = {});

/// Solution value read off the sheet at q, with the solved characteristic
/// coordinates and momentum.
struct SheetPoint {
  double value = 0.0;
  Vec p;
  double s = 0.0;
  Vec u;
};

/// Inverts q(s, u) = q by Newton from the nearest lattice sample (simplex
/// search if Newton stalls). Throws OutOfSheet outside the traced region and
/// CausticSuspected where the Jacobian degenerates.
SheetPoint evaluate_solution(const CharacteristicSheet& sheet, const Vec& q);

/// Lagrange brackets of the sheet parameters w = (s, u_1, …) at (s, u),
/// by differentiating re-integrated strips in u.
Mat sheet_brackets(const CharacteristicSheet& sheet, double s, const Vec& u);

}  // namespace hjkit
