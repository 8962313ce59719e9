#pragma once

/// @file wavemech.hpp
/// @brief Wave-front speed and de Broglie relations of a conservative
/// Hamilton-Jacobi solution, a split-step Schrödinger propagator on periodic
/// grids, polar decomposition ψ = R exp(iS/ħ), the quantum potential, Bohm
/// guidance trajectories and pilot-wave residuals.

#include <complex>
#include <functional>
#include <memory>
#include <vector>

#include "hjkit/errors.hpp"
#include "hjkit/types.hpp"

namespace hjkit {

using cplx = std::complex<double>;

/// S(q, t) = S*(q) − E t.
struct ConservativeHJ {
  std::function<double(const Vec&)> s_star;
  double E = 0.0;
  /// Optional ∇S*; central differences otherwise.
  std::function<Vec(const Vec&)> grad;

  double value(const Vec& q, double t) const { return s_star(q) - E * t; }
  Vec gradient(const Vec& q) const;
};

/// u = E / |∇S*|. Throws StationaryFront when |∇S*| ≤ tol.
double wavefront_speed(const ConservativeHJ& chj, const Vec& q, double tol = 1e-8);

struct PhaseWave {
  double u = 0.0;
  double nu = 0.0;
  double lambda = 0.0;
  double h = 0.0;
  double hbar = 0.0;
};

/// ν = E/h, λ = h/p and u = λν. Throws std::invalid_argument unless p, h > 0.
PhaseWave debroglie(double E, double p, double h);

/// Uniform periodic grid in one or two dimensions. Samples are stored
/// row-major with x fastest: index = j·nx + i.
struct WaveGrid {
  int nx = 0;
  int ny = 1;
  double dx = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;
  double hbar = 1.0;
  double m = 1.0;
  double t = 0.0;
  std::vector<cplx> psi;
  std::vector<double> V;

  static WaveGrid line(int nx, double x0, double dx, double hbar = 1.0, double m = 1.0);
  static WaveGrid plane(int nx, int ny, double x0, double y0, double dx, double hbar = 1.0, double m = 1.0);

  int dim() const { return ny > 1 ? 2 : 1; }
  std::size_t size() const { return psi.size(); }
  std::size_t index(int i, int j = 0) const { return static_cast<std::size_t>(j) * nx + i; }
  double x(int i) const { return x0 + dx * i; }
  double y(int j) const { return y0 + dx * j; }
  Vec point(std::size_t k) const;

  void fill(const std::function<cplx(const Vec&)>& f);
  void set_potential(const std::function<double(const Vec&)>& f);
  /// Σ|ψ|² dxⁿ.
  double norm() const;
  void normalize();
  /// ⟨q⟩ and the per-axis standard deviation of |ψ|².
  Vec mean_position() const;
  Vec position_spread() const;
};

/// Strang splitting: half potential kick, exact kinetic step in Fourier
/// space, half potential kick. Unitary for any dt; steps with
/// max|V|·dt/(2ħ) > π are rejected because the potential phase aliases.
class SplitStepPropagator {
 public:
  explicit SplitStepPropagator(const WaveGrid& shape);
  ~SplitStepPropagator();
  SplitStepPropagator(const SplitStepPropagator&) = delete;
  SplitStepPropagator& operator=(const SplitStepPropagator&) = delete;

  /// Throws UnstableStep for dt ≤ 0 or an aliasing potential phase.
  void step(WaveGrid& g, double dt);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

WaveGrid schrodinger_step(const WaveGrid& g, double dt);

/// Scalar field on the sample positions of a grid; NaN marks masked cells.
struct GridScalar {
  int nx = 0;
  int ny = 1;
  double dx = 0.0;
  std::vector<double> v;

  double at(int i, int j = 0) const { return v[static_cast<std::size_t>(j) * nx + i]; }
  /// Largest |v| over unmasked cells.
  double max_abs() const;
};

enum class NodePolicy { Throw, Mask };

struct Polar {
  GridScalar R;
  GridScalar S;
  /// Unwrapping region of each cell; −1 for nodes.
  std::vector<int> region;
  int regions = 0;
};

/// R = |ψ| and S = ħ·(unwrapped phase), swept row-major from the origin.
/// Cells with |ψ| ≤ node_tol are nodes: NodeOnPath is thrown under
/// NodePolicy::Throw; otherwise they are masked and the remaining cells are
/// unwrapped in independent regions.
Polar polar_decompose(const WaveGrid& g, double node_tol = 1e-8, NodePolicy policy = NodePolicy::Throw);

/// Q = −(ħ²/2m) ∇²R / R with second-order central differences. Boundary
/// cells and cells with R ≤ node_tol are masked.
GridScalar quantum_potential(const GridScalar& R, double hbar, double m, double node_tol = 1e-8);

/// Guidance velocity (ħ/m)·∇(phase) from central phase differences of each
/// frame, interpolated by Catmull-Rom splines in space and linearly in time.
class WaveHistory {
 public:
  explicit WaveHistory(std::vector<WaveGrid> frames, double node_tol = 1e-8);

  /// Propagates g for `steps` steps of dt, keeping every `stride`-th grid.
  static WaveHistory record(const WaveGrid& g, double dt, int steps, int stride = 1, double node_tol = 1e-8);

  const std::vector<WaveGrid>& frames() const { return frames_; }
  double t_begin() const { return frames_.front().t; }
  double t_end() const { return frames_.back().t; }
  /// Throws NodeEncounter if the interpolation stencil touches a node and
  /// std::out_of_range outside the recorded time span.
  Vec velocity(const Vec& q, double t) const;

 private:
  Vec frame_velocity(std::size_t f, const Vec& q) const;

  std::vector<WaveGrid> frames_;
  std::vector<std::vector<double>> vx_;
  std::vector<std::vector<double>> vy_;
  std::vector<std::vector<char>> node_;
  double node_tol_;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> q;
};

/// RK4 on dq/dt = ∇S/m over t_range with step dt.
Trajectory bohm_trajectory(const WaveHistory& history, const Vec& q0, Interval t_range, double dt);

struct PilotResiduals {
  /// S_t + |∇S|²/2m + Q + V.
  GridScalar qhj;
  /// ρ_t + ∇·(ρ∇S)/m.
  GridScalar continuity;
};

/// Residuals at the middle of three grids equally spaced in time. Cells
/// within two of the boundary, nodes and cells with R below mask_fraction of
/// the largest R are masked.
PilotResiduals pilot_wave_residuals(const WaveGrid& before, const WaveGrid& mid, const WaveGrid& after,
                                    double node_tol = 1e-8, double mask_fraction = 0.0);

/// √(Σ r² ρ dxⁿ / Σ ρ dxⁿ) over unmasked cells, ρ = |ψ|² of `g`.
double weighted_norm(const GridScalar& r, const WaveGrid& g);

/// Phase rate arg(ψ_b/ψ_a)/(t_b − t_a) at sample k; ħ times this is −E for
/// a stationary state.
double time_phase_rate(const WaveGrid& a, const WaveGrid& b, std::size_t k);

/// Gaussian packet on a line: centre, mean momentum p0 and position spread σ.
struct PacketScenario {
  int n = 1024;
  double x_min = -20.0;
  double x_max = 20.0;
  double hbar = 1.0;
  double m = 1.0;
  double center = 0.0;
  double p0 = 0.0;
  double sigma = 1.0;
  std::function<double(double)> V = [](double) { return 0.0; };
  /// V′ for the classical extremal; central differences if empty.
  std::function<double(double)> dV;
  double dt = 1e-3;
  double horizon = 1.0;
  int ensemble = 41;
};

/// Normalised ψ₀ = (2πσ²)^(−¼) exp(−(x−c)²/4σ² + i p0 x/ħ) on the scenario grid.
WaveGrid gaussian_packet(const PacketScenario& s);

struct ClassicalLimitReport {
  std::vector<double> t;
  /// Equal-weight mean of Bohm trajectories started at quantiles of |ψ₀|².
  std::vector<double> bohm_mean;
  std::vector<double> grid_mean;
  std::vector<double> classical;
  double max_deviation = 0.0;
};

/// Bohm ensemble against the classical extremal of H = p²/2m + V from
/// (centre, p0).
ClassicalLimitReport classical_limit_check(const PacketScenario& s);

struct LimitTrend {
  std::vector<double> hbar;
  std::vector<double> deviation;
  bool monotone = false;
};

/// Repeats classical_limit_check for each ħ with σ scaled by √(ħ/ħ₀).
LimitTrend classical_limit_trend(const PacketScenario& s, const std::vector<double>& hbars);

}  // namespace hjkit
