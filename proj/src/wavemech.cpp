#include "hjkit/wavemech.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "hjkit/numerics.hpp"
#include "hjkit/varcore.hpp"

namespace hjkit {

// ---------------------------------------------------------------------------
// Conservative fronts and de Broglie relations
// ---------------------------------------------------------------------------

Vec ConservativeHJ::gradient(const Vec& q) const {
  if (grad) return grad(q);
  return hjkit::gradient(s_star, q);
}

double wavefront_speed(const ConservativeHJ& chj, const Vec& q, double tol) {
  const double p = chj.gradient(q).norm();
  if (!(p > tol)) {
    std::ostringstream os;
    os << "|grad S*| = " << p << " at q = " << q.transpose();
    throw StationaryFront(os.str());
  }
  return chj.E / p;
}

PhaseWave debroglie(double E, double p, double h) {
  if (!(p > 0.0) || !(h > 0.0)) throw std::invalid_argument("debroglie: p and h must be positive");
  PhaseWave w;
  w.h = h;
  w.hbar = h / (2.0 * kPi);
  w.nu = E / h;
  w.lambda = h / p;
  w.u = w.lambda * w.nu;
  return w;
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

WaveGrid WaveGrid::line(int nx, double x0, double dx, double hbar, double m) {
  return plane(nx, 1, x0, 0.0, dx, hbar, m);
}

WaveGrid WaveGrid::plane(int nx, int ny, double x0, double y0, double dx, double hbar, double m) {
  if (nx < 4 || ny < 1) throw std::invalid_argument("WaveGrid: too few samples");
  if (!(dx > 0.0) || !(hbar > 0.0) || !(m > 0.0)) {
    throw std::invalid_argument("WaveGrid: dx, hbar and m must be positive");
  }
  WaveGrid g;
  g.nx = nx;
  g.ny = ny;
  g.dx = dx;
  g.x0 = x0;
  g.y0 = y0;
  g.hbar = hbar;
  g.m = m;
  const auto n = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  g.psi.assign(n, cplx(0.0, 0.0));
  g.V.assign(n, 0.0);
  return g;
}

Vec WaveGrid::point(std::size_t k) const {
  const int i = static_cast<int>(k % static_cast<std::size_t>(nx));
  const int j = static_cast<int>(k / static_cast<std::size_t>(nx));
  return ny > 1 ? vec({x(i), y(j)}) : vec({x(i)});
}

void WaveGrid::fill(const std::function<cplx(const Vec&)>& f) {
  for (std::size_t k = 0; k < psi.size(); ++k) psi[k] = f(point(k));
}

void WaveGrid::set_potential(const std::function<double(const Vec&)>& f) {
  for (std::size_t k = 0; k < V.size(); ++k) V[k] = f(point(k));
}

double WaveGrid::norm() const {
  double s = 0.0;
  for (const cplx& z : psi) s += std::norm(z);
  return s * std::pow(dx, dim());
}

void WaveGrid::normalize() {
  const double n = norm();
  if (!(n > 0.0)) throw std::invalid_argument("WaveGrid::normalize: zero wave function");
  const double f = 1.0 / std::sqrt(n);
  for (cplx& z : psi) z *= f;
}

Vec WaveGrid::mean_position() const {
  Vec mean = Vec::Zero(dim());
  double total = 0.0;
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const double w = std::norm(psi[k]);
    mean += w * point(k);
    total += w;
  }
  return mean / total;
}

Vec WaveGrid::position_spread() const {
  const Vec mean = mean_position();
  Vec var = Vec::Zero(dim());
  double total = 0.0;
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const double w = std::norm(psi[k]);
    var += w * (point(k) - mean).cwiseAbs2();
    total += w;
  }
  return (var / total).cwiseSqrt();
}

// ---------------------------------------------------------------------------
// Split-step propagator
// ---------------------------------------------------------------------------

namespace {
// The FFTW planner is not thread-safe; execution is.
std::mutex g_planner;
}  // namespace

struct SplitStepPropagator::Impl {
  int nx = 0;
  int ny = 1;
  double dx = 0.0;
  fftw_complex* buf = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  std::vector<double> k2;
  double cached_dt = kNaN;
  double cached_ratio = kNaN;
  std::vector<cplx> kinetic;
};

SplitStepPropagator::SplitStepPropagator(const WaveGrid& shape) : impl_(std::make_unique<Impl>()) {
  Impl& s = *impl_;
  s.nx = shape.nx;
  s.ny = shape.ny;
  s.dx = shape.dx;
  const std::size_t n = shape.size();
  {
    std::lock_guard<std::mutex> lock(g_planner);
    s.buf = fftw_alloc_complex(n);
    if (s.ny > 1) {
      s.fwd = fftw_plan_dft_2d(s.ny, s.nx, s.buf, s.buf, FFTW_FORWARD, FFTW_ESTIMATE);
      s.bwd = fftw_plan_dft_2d(s.ny, s.nx, s.buf, s.buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    } else {
      s.fwd = fftw_plan_dft_1d(s.nx, s.buf, s.buf, FFTW_FORWARD, FFTW_ESTIMATE);
      s.bwd = fftw_plan_dft_1d(s.nx, s.buf, s.buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
  }
  auto wave = [](int i, int n, double d) {
    const int f = i <= n / 2 ? i : i - n;
    return 2.0 * kPi * f / (n * d);
  };
  s.k2.resize(n);
  for (int j = 0; j < s.ny; ++j) {
    const double ky = s.ny > 1 ? wave(j, s.ny, s.dx) : 0.0;
    for (int i = 0; i < s.nx; ++i) {
      const double kx = wave(i, s.nx, s.dx);
      s.k2[static_cast<std::size_t>(j) * s.nx + i] = kx * kx + ky * ky;
    }
  }
}

SplitStepPropagator::~SplitStepPropagator() {
  std::lock_guard<std::mutex> lock(g_planner);
  fftw_destroy_plan(impl_->fwd);
  fftw_destroy_plan(impl_->bwd);
  fftw_free(impl_->buf);
}

void SplitStepPropagator::step(WaveGrid& g, double dt) {
  Impl& s = *impl_;
  if (g.nx != s.nx || g.ny != s.ny || g.dx != s.dx) {
    throw std::invalid_argument("SplitStepPropagator: grid shape differs from the planned one");
  }
  if (!(dt > 0.0)) throw UnstableStep("time step must be positive");
  double vmax = 0.0;
  for (double v : g.V) vmax = std::max(vmax, std::abs(v));
  if (vmax * dt / (2.0 * g.hbar) > kPi) {
    std::ostringstream os;
    os << "potential phase max|V| dt / 2hbar = " << vmax * dt / (2.0 * g.hbar) << " exceeds pi";
    throw UnstableStep(os.str());
  }
  const std::size_t n = g.size();
  const double ratio = g.hbar / g.m;
  if (dt != s.cached_dt || ratio != s.cached_ratio) {
    s.kinetic.resize(n);
    for (std::size_t k = 0; k < n; ++k) s.kinetic[k] = std::polar(1.0, -0.5 * ratio * s.k2[k] * dt);
    s.cached_dt = dt;
    s.cached_ratio = ratio;
  }
  auto* z = reinterpret_cast<cplx*>(s.buf);
  for (std::size_t k = 0; k < n; ++k) z[k] = g.psi[k] * std::polar(1.0, -0.5 * g.V[k] * dt / g.hbar);
  fftw_execute(s.fwd);
  for (std::size_t k = 0; k < n; ++k) z[k] *= s.kinetic[k];
  fftw_execute(s.bwd);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) g.psi[k] = z[k] * inv * std::polar(1.0, -0.5 * g.V[k] * dt / g.hbar);
  g.t += dt;
}

WaveGrid schrodinger_step(const WaveGrid& g, double dt) {
  WaveGrid out = g;
  SplitStepPropagator(g).step(out, dt);
  return out;
}

// ---------------------------------------------------------------------------
// Polar decomposition and quantum potential
// ---------------------------------------------------------------------------

double GridScalar::max_abs() const {
  double m = 0.0;
  for (double x : v) {
    if (!std::isnan(x)) m = std::max(m, std::abs(x));
  }
  return m;
}

namespace {

GridScalar scalar_like(const WaveGrid& g) {
  return GridScalar{g.nx, g.ny, g.dx, std::vector<double>(g.size(), kNaN)};
}

}  // namespace

Polar polar_decompose(const WaveGrid& g, double node_tol, NodePolicy policy) {
  Polar out;
  out.R = scalar_like(g);
  out.S = scalar_like(g);
  out.region.assign(g.size(), -1);
  auto node = [&](std::size_t k) { return std::abs(g.psi[k]) <= node_tol; };
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t k = g.index(i, j);
      out.R.v[k] = std::abs(g.psi[k]);
      if (node(k)) {
        if (policy == NodePolicy::Throw) {
          std::ostringstream os;
          os << "|psi| = " << out.R.v[k] << " at q = " << g.point(k).transpose();
          throw NodeOnPath(os.str());
        }
        continue;
      }
      std::size_t pred = k;
      if (i > 0 && !node(k - 1)) {
        pred = k - 1;
      } else if (j > 0 && !node(k - static_cast<std::size_t>(g.nx))) {
        pred = k - static_cast<std::size_t>(g.nx);
      }
      if (pred == k) {
        out.S.v[k] = g.hbar * std::arg(g.psi[k]);
        out.region[k] = out.regions++;
      } else {
        out.S.v[k] = out.S.v[pred] + g.hbar * std::arg(g.psi[k] * std::conj(g.psi[pred]));
        out.region[k] = out.region[pred];
      }
    }
  }
  return out;
}

GridScalar quantum_potential(const GridScalar& R, double hbar, double m, double node_tol) {
  GridScalar Q{R.nx, R.ny, R.dx, std::vector<double>(R.v.size(), kNaN)};
  const bool two = R.ny > 1;
  const double h2 = R.dx * R.dx;
  for (int j = two ? 1 : 0; j < (two ? R.ny - 1 : 1); ++j) {
    for (int i = 1; i < R.nx - 1; ++i) {
      const double r = R.at(i, j);
      if (!(r > node_tol)) continue;
      double lap = (R.at(i + 1, j) + R.at(i - 1, j) - 2.0 * r) / h2;
      if (two) lap += (R.at(i, j + 1) + R.at(i, j - 1) - 2.0 * r) / h2;
      if (std::isnan(lap)) continue;
      Q.v[static_cast<std::size_t>(j) * R.nx + i] = -hbar * hbar / (2.0 * m) * lap / r;
    }
  }
  return Q;
}

// ---------------------------------------------------------------------------
// Guidance
// ---------------------------------------------------------------------------

namespace {

int wrap(int i, int n) { return ((i % n) + n) % n; }

// Catmull-Rom weights for offsets −1, 0, 1, 2 at fraction u.
std::array<double, 4> catmull_rom(double u) {
  const double u2 = u * u;
  const double u3 = u2 * u;
  return {0.5 * (-u3 + 2.0 * u2 - u), 0.5 * (3.0 * u3 - 5.0 * u2 + 2.0), 0.5 * (-3.0 * u3 + 4.0 * u2 + u),
          0.5 * (u3 - u2)};
}

}  // namespace

WaveHistory::WaveHistory(std::vector<WaveGrid> frames, double node_tol)
    : frames_(std::move(frames)), node_tol_(node_tol) {
  if (frames_.empty()) throw std::invalid_argument("WaveHistory: no frames");
  for (std::size_t f = 1; f < frames_.size(); ++f) {
    if (!(frames_[f].t > frames_[f - 1].t)) throw std::invalid_argument("WaveHistory: times must increase");
  }
  const std::size_t nf = frames_.size();
  vx_.resize(nf);
  vy_.resize(nf);
  node_.resize(nf);
  parallel_for(nf, [&](std::size_t f) {
    const WaveGrid& g = frames_[f];
    const double scale = g.hbar / (g.m * 2.0 * g.dx);
    vx_[f].resize(g.size());
    node_[f].resize(g.size());
    if (g.ny > 1) vy_[f].resize(g.size());
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        const std::size_t k = g.index(i, j);
        node_[f][k] = std::abs(g.psi[k]) <= node_tol_ ? 1 : 0;
        vx_[f][k] = scale * std::arg(g.psi[g.index(wrap(i + 1, g.nx), j)] *
                                     std::conj(g.psi[g.index(wrap(i - 1, g.nx), j)]));
        if (g.ny > 1) {
          vy_[f][k] = scale * std::arg(g.psi[g.index(i, wrap(j + 1, g.ny))] *
                                       std::conj(g.psi[g.index(i, wrap(j - 1, g.ny))]));
        }
      }
    }
  });
}

WaveHistory WaveHistory::record(const WaveGrid& g, double dt, int steps, int stride, double node_tol) {
  if (steps < 1 || stride < 1) throw std::invalid_argument("WaveHistory::record: steps and stride must be positive");
  std::vector<WaveGrid> frames{g};
  WaveGrid cur = g;
  SplitStepPropagator prop(g);
  for (int s = 1; s <= steps; ++s) {
    prop.step(cur, dt);
    if (s % stride == 0) frames.push_back(cur);
  }
  return WaveHistory(std::move(frames), node_tol);
}

Vec WaveHistory::frame_velocity(std::size_t f, const Vec& q) const {
  const WaveGrid& g = frames_[f];
  const double sx = (q(0) - g.x0) / g.dx;
  const int ix = static_cast<int>(std::floor(sx));
  const auto wx = catmull_rom(sx - ix);
  const bool two = g.ny > 1;
  int iy = 0;
  std::array<double, 4> wy{0.0, 1.0, 0.0, 0.0};
  if (two) {
    const double sy = (q(1) - g.y0) / g.dx;
    iy = static_cast<int>(std::floor(sy));
    wy = catmull_rom(sy - iy);
  }
  Vec v = Vec::Zero(g.dim());
  for (int b = 0; b < 4; ++b) {
    if (!two && b != 1) continue;
    const int j = two ? wrap(iy + b - 1, g.ny) : 0;
    for (int a = 0; a < 4; ++a) {
      const std::size_t k = g.index(wrap(ix + a - 1, g.nx), j);
      if (node_[f][k]) {
        std::ostringstream os;
        os << "guidance stencil meets a node near q = " << q.transpose() << " at t = " << g.t;
        throw NodeEncounter(os.str());
      }
      const double w = wx[a] * wy[b];
      v(0) += w * vx_[f][k];
      if (two) v(1) += w * vy_[f][k];
    }
  }
  return v;
}

Vec WaveHistory::velocity(const Vec& q, double t) const {
  const double slack = 1e-9 * (1.0 + std::abs(t_end()));
  if (t < t_begin() - slack || t > t_end() + slack) throw std::out_of_range("WaveHistory: time outside the record");
  if (frames_.size() == 1) return frame_velocity(0, q);
  auto it = std::upper_bound(frames_.begin(), frames_.end(), t,
                             [](double x, const WaveGrid& g) { return x < g.t; });
  std::size_t f1 = static_cast<std::size_t>(std::distance(frames_.begin(), it));
  f1 = std::clamp<std::size_t>(f1, 1, frames_.size() - 1);
  const std::size_t f0 = f1 - 1;
  const double w = std::clamp((t - frames_[f0].t) / (frames_[f1].t - frames_[f0].t), 0.0, 1.0);
  if (w == 0.0) return frame_velocity(f0, q);
  if (w == 1.0) return frame_velocity(f1, q);
  return (1.0 - w) * frame_velocity(f0, q) + w * frame_velocity(f1, q);
}

Trajectory bohm_trajectory(const WaveHistory& history, const Vec& q0, Interval t_range, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("bohm_trajectory: dt must be positive");
  if (q0.size() != history.frames().front().dim()) throw std::invalid_argument("bohm_trajectory: q0 dimension");
  Trajectory tr;
  const std::size_t n = step_count(t_range.length(), dt);
  const double h = n == 0 ? 0.0 : t_range.length() / static_cast<double>(n);
  Vec q = q0;
  tr.t.push_back(t_range.lo);
  tr.q.push_back(q);
  history.velocity(q, t_range.lo);
  for (std::size_t s = 0; s < n; ++s) {
    const double t = t_range.lo + h * static_cast<double>(s);
    const Vec k1 = history.velocity(q, t);
    const Vec k2 = history.velocity(q + 0.5 * h * k1, t + 0.5 * h);
    const Vec k3 = history.velocity(q + 0.5 * h * k2, t + 0.5 * h);
    const Vec k4 = history.velocity(q + h * k3, t + h);
    q += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    tr.t.push_back(t_range.lo + h * static_cast<double>(s + 1));
    tr.q.push_back(q);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Pilot-wave residuals
// ---------------------------------------------------------------------------

PilotResiduals pilot_wave_residuals(const WaveGrid& before, const WaveGrid& mid, const WaveGrid& after,
                                    double node_tol, double mask_fraction) {
  if (before.size() != mid.size() || after.size() != mid.size()) {
    throw std::invalid_argument("pilot_wave_residuals: grid shapes differ");
  }
  const double dt = 0.5 * (after.t - before.t);
  if (!(dt > 0.0) || std::abs((mid.t - before.t) - dt) > 1e-9 * (1.0 + dt)) {
    throw std::invalid_argument("pilot_wave_residuals: grids must be equally spaced in time");
  }
  PilotResiduals out{scalar_like(mid), scalar_like(mid)};
  const bool two = mid.ny > 1;
  const double hbar = mid.hbar;
  const double m = mid.m;
  const double dx = mid.dx;
  double rmax = 0.0;
  for (const cplx& z : mid.psi) rmax = std::max(rmax, std::abs(z));
  const double floor = std::max(node_tol, mask_fraction * rmax);

  auto psi = [&](int i, int j) { return mid.psi[mid.index(i, j)]; };
  auto rho = [&](int i, int j) { return std::norm(psi(i, j)); };
  auto grad_s = [&](int i, int j) {
    Eigen::Vector2d g(hbar * std::arg(psi(i + 1, j) * std::conj(psi(i - 1, j))) / (2.0 * dx), 0.0);
    if (two) g(1) = hbar * std::arg(psi(i, j + 1) * std::conj(psi(i, j - 1))) / (2.0 * dx);
    return g;
  };
  const int jlo = two ? 2 : 0;
  const int jhi = two ? mid.ny - 2 : 1;
  for (int j = jlo; j < jhi; ++j) {
    for (int i = 2; i < mid.nx - 2; ++i) {
      bool masked = false;
      for (int d = -2; d <= 2 && !masked; ++d) {
        masked = std::abs(psi(i + d, j)) <= floor || (two && std::abs(psi(i, j + d)) <= floor);
      }
      if (masked) continue;
      const std::size_t k = mid.index(i, j);
      const double r = std::abs(psi(i, j));
      double lap = (std::abs(psi(i + 1, j)) + std::abs(psi(i - 1, j)) - 2.0 * r) / (dx * dx);
      if (two) lap += (std::abs(psi(i, j + 1)) + std::abs(psi(i, j - 1)) - 2.0 * r) / (dx * dx);
      const double Q = -hbar * hbar / (2.0 * m) * lap / r;
      const double s_t = hbar * std::arg(after.psi[k] * std::conj(before.psi[k])) / (2.0 * dt);
      const Eigen::Vector2d gs = grad_s(i, j);
      out.qhj.v[k] = s_t + gs.squaredNorm() / (2.0 * m) + Q + mid.V[k];

      const double rho_t = (std::norm(after.psi[k]) - std::norm(before.psi[k])) / (2.0 * dt);
      double div = (rho(i + 1, j) * grad_s(i + 1, j)(0) - rho(i - 1, j) * grad_s(i - 1, j)(0)) / (2.0 * dx);
      if (two) div += (rho(i, j + 1) * grad_s(i, j + 1)(1) - rho(i, j - 1) * grad_s(i, j - 1)(1)) / (2.0 * dx);
      out.continuity.v[k] = rho_t + div / m;
    }
  }
  return out;
}

double weighted_norm(const GridScalar& r, const WaveGrid& g) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < r.v.size(); ++k) {
    if (std::isnan(r.v[k])) continue;
    const double w = std::norm(g.psi[k]);
    num += r.v[k] * r.v[k] * w;
    den += w;
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

double time_phase_rate(const WaveGrid& a, const WaveGrid& b, std::size_t k) {
  return std::arg(b.psi[k] * std::conj(a.psi[k])) / (b.t - a.t);
}

// ---------------------------------------------------------------------------
// Classical limit
// ---------------------------------------------------------------------------

WaveGrid gaussian_packet(const PacketScenario& s) {
  if (!(s.x_max > s.x_min) || s.n < 8 || !(s.sigma > 0.0)) {
    throw std::invalid_argument("gaussian_packet: invalid grid or width");
  }
  WaveGrid g = WaveGrid::line(s.n, s.x_min, (s.x_max - s.x_min) / s.n, s.hbar, s.m);
  const double amp = std::pow(2.0 * kPi * s.sigma * s.sigma, -0.25);
  g.fill([&](const Vec& q) {
    const double d = q(0) - s.center;
    return amp * std::exp(cplx(-d * d / (4.0 * s.sigma * s.sigma), s.p0 * q(0) / s.hbar));
  });
  g.set_potential([&](const Vec& q) { return s.V(q(0)); });
  return g;
}

namespace {

// Positions splitting |ψ|² into equal-mass cells, taken at cell midpoints.
std::vector<double> quantile_points(const WaveGrid& g, int count) {
  std::vector<double> cdf(g.size() + 1, 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) cdf[k + 1] = cdf[k] + std::norm(g.psi[k]);
  const double total = cdf.back();
  std::vector<double> out;
  for (int c = 0; c < count; ++c) {
    const double target = total * (c + 0.5) / count;
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
    const std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - cdf.begin()));
    // Mass of sample k − 1 is spread over the cell [x − dx/2, x + dx/2].
    const double frac = (target - cdf[k - 1]) / (cdf[k] - cdf[k - 1]);
    out.push_back(g.x(static_cast<int>(k - 1)) + (frac - 0.5) * g.dx);
  }
  return out;
}

}  // namespace

ClassicalLimitReport classical_limit_check(const PacketScenario& s) {
  const WaveGrid g0 = gaussian_packet(s);
  const int steps = static_cast<int>(step_count(s.horizon, s.dt));
  const double dt = s.horizon / steps;
  const WaveHistory hist = WaveHistory::record(g0, dt, steps, 1, 0.0);

  const std::vector<double> starts = quantile_points(g0, s.ensemble);
  std::vector<Trajectory> trajs(starts.size());
  parallel_for(starts.size(), [&](std::size_t e) {
    trajs[e] = bohm_trajectory(hist, vec({starts[e]}), {0.0, s.horizon}, dt);
  });

  std::function<double(double)> dV = s.dV;
  if (!dV) dV = [V = s.V](double x) { return derivative(V, x); };
  const double m = s.m;
  HamiltonianSystem ham(1, [V = s.V, m](const PhasePoint& x) { return 0.5 * x.p(0) * x.p(0) / m + V(x.q(0)); },
                        Domain::unbounded(1));
  ham.with_gradients([dV](const PhasePoint& x) { return vec({dV(x.q(0))}); },
                     [m](const PhasePoint& x) { return Vec(x.p / m); });
  const ExtremalCurve cl = integrate_extremal(ham, {vec({s.center}), vec({s.p0}), 0.0}, s.horizon, {dt});

  ClassicalLimitReport rep;
  for (int k = 0; k <= steps; ++k) {
    double mean = 0.0;
    for (const auto& tr : trajs) mean += tr.q[static_cast<std::size_t>(k)](0);
    mean /= static_cast<double>(trajs.size());
    rep.t.push_back(hist.frames()[static_cast<std::size_t>(k)].t);
    rep.bohm_mean.push_back(mean);
    rep.grid_mean.push_back(hist.frames()[static_cast<std::size_t>(k)].mean_position()(0));
    rep.classical.push_back(cl.samples[static_cast<std::size_t>(k)].q(0));
    rep.max_deviation = std::max(rep.max_deviation, std::abs(mean - rep.classical.back()));
  }
  return rep;
}

LimitTrend classical_limit_trend(const PacketScenario& s, const std::vector<double>& hbars) {
  LimitTrend tr;
  for (double h : hbars) {
    PacketScenario c = s;
    c.hbar = h;
    c.sigma = s.sigma * std::sqrt(h / s.hbar);
    tr.hbar.push_back(h);
    tr.deviation.push_back(classical_limit_check(c).max_deviation);
  }
  tr.monotone = true;
  for (std::size_t k = 1; k < tr.deviation.size(); ++k) {
    const bool smaller_h = tr.hbar[k] < tr.hbar[k - 1];
    if (smaller_h != (tr.deviation[k] < tr.deviation[k - 1])) tr.monotone = false;
  }
  return tr;
}

}  // namespace hjkit
