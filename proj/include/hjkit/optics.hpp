#pragma once

/// @file optics.hpp
/// @brief Geometric optics on (q₁, q₂) with the optical axis t as parameter:
/// isotropic media, Fermat rays, point-source fronts, Huygens' construction
/// and front propagation along the rays of a solution of the eikonal equation.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hjkit/hjfield.hpp"
#include "hjkit/varcore.hpp"

namespace hjkit {

/// Isotropic refractive index n(q₁, q₂, t) and vacuum speed c.
class Medium {
 public:
  using IndexFn = std::function<double(const Vec&, double)>;
  using GradFn = std::function<Vec(const Vec&, double)>;

  Medium(IndexFn n, double c = 1.0);
  Medium& with_gradient(GradFn grad);

  static Medium homogeneous(double n, double c = 1.0);
  /// n = n0 + g·q.
  static Medium linear(double n0, const Vec& g, double c = 1.0);
  /// n = ½(n1 + n2) + ½(n2 − n1) tanh((q_axis − at)/width).
  static Medium interface(double n1, double n2, int axis, double at, double width, double c = 1.0);

  double c() const { return c_; }
  double n(const Vec& q, double t) const { return n_(q, t); }
  Vec grad_n(const Vec& q, double t) const;
  /// Largest index seen must be finite and the smallest at least 1 − tol.
  bool physical(const Vec& q, double t, double tol = 1e-12) const;

 private:
  IndexFn n_;
  double c_;
  GradFn grad_;
};

/// L = (n/c) √(1 + |q̇|²) with analytic derivatives and Hessian.
LagrangianSystem optical_lagrangian(const Medium& m);
/// H = −√(n²/c² − |p|²); NaN where |p| ≥ n/c.
HamiltonianSystem optical_hamiltonian(const Medium& m);
/// The Fermat integrand (n/c)|ẋ| on three spatial coordinates with a free
/// parameter: degree-1 homogeneous, hence degenerate.
LagrangianSystem fermat_time_lagrangian(const Medium& m);

/// Momentum p = (n/c) q̇ / √(1 + |q̇|²) of a ray leaving `at` with slope q̇.
Vec ray_momentum(const Medium& m, const SpacetimePoint& at, const Vec& slope);

struct RayOptions {
  double step = 1e-3;
  /// Rays with |q̇| above this are rejected as turning away from the axis.
  double max_slope = 1e3;
  double t_tol = 1e-13;
};

/// Integrates the ray from `start` with slope `direction` up to t_end.
/// Action is travel time. Throws ParaxialViolation with the partial ray.
ExtremalCurve trace_ray(const Medium& m, const SpacetimePoint& start, const Vec& direction, double t_end,
                        const RayOptions& opts = {});

/// Continues a ray from phase point `x` until its travel time reaches dT.
ExtremalCurve trace_ray_for_time(const Medium& m, const PhasePoint& x, double dT, const RayOptions& opts = {});

/// Bouguer invariant n cos θ = −c H (θ the angle to the t-axis).
double bouguer_invariant(const Medium& m, const PhasePoint& x);
/// sin of the angle between the ray and the normal of a planar interface
/// orthogonal to q_axis.
double interface_sine(const Medium& m, const PhasePoint& x, int axis);

/// Sampled front on an index lattice (rows × cols, row-major).
struct WaveFront {
  double T = 0.0;
  int rows = 0;
  int cols = 0;
  std::vector<SpacetimePoint> points;
  std::vector<Vec> momenta;
  /// Error text for samples whose ray failed; such samples are unusable.
  std::vector<std::optional<std::string>> errors;
  std::string source;

  std::size_t size() const { return points.size(); }
  bool ok(std::size_t k) const { return !errors[k].has_value(); }
  std::size_t failures() const;
};

struct FanSpec {
  int rows = 1;
  int cols = 41;
  /// Slopes span [−aperture, aperture] per lattice axis; a single row has q̇₁ = 0.
  double aperture = 1.0;
};

/// Geodesic sphere of radius T around P1 sampled by a fan of rays.
WaveFront wavefront_from_point(const Medium& m, const SpacetimePoint& p1, double T, const FanSpec& fan = {},
                               const RayOptions& opts = {});

/// Moves every sample of a front along its ray by travel time dT.
WaveFront continue_front(const Medium& m, const WaveFront& front, double dT, const RayOptions& opts = {});

/// Samples S = σ (lattice points projected onto the level set, p = ∇S) and
/// follows the rays until the travel time is T. Throws NotEquidistantFamily
/// if S does not solve the optical equation at a sample.
WaveFront propagate_front(const Medium& m, const HypersurfaceFamily& fam, double sigma, double T,
                          const std::vector<SpacetimePoint>& lattice, int rows, int cols,
                          const RayOptions& opts = {});

struct HuygensReport {
  /// Largest |min over centres S(centre, X) − dT| · c/n(X) over checked samples.
  double max_defect = 0.0;
  std::size_t checked = 0;
  /// The directly propagated front the envelope was compared with.
  WaveFront direct;
};

/// Compares the envelope of secondary fronts of radius dT around the samples
/// of `front` with the directly propagated front. Throws SamplingTooCoarse
/// when neighbouring samples are farther apart than dT or too few samples
/// admit an interior touching point.
HuygensReport huygens_check(const Medium& m, const WaveFront& front, double dT, const RayOptions& opts = {});

/// Largest |p·δq − H δt| / (n/c |δ|) over lattice tangents δ of the front:
/// zero when the rays are normal to the front. Tangents use five-point
/// differences; samples without a full stencil are skipped unless the lattice
/// axis is shorter than five.
double front_normal_defect(const Medium& m, const WaveFront& front);

}  // namespace hjkit
