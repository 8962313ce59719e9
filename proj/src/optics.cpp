#include "hjkit/optics.hpp"

#include <cmath>
#include <sstream>

#include "hjkit/charfn.hpp"

namespace hjkit {

// ---------------------------------------------------------------------------
// Medium
// ---------------------------------------------------------------------------

Medium::Medium(IndexFn n, double c) : n_(std::move(n)), c_(c) {
  if (!(c_ > 0.0)) throw std::invalid_argument("Medium: c must be positive");
}

Medium& Medium::with_gradient(GradFn grad) {
  grad_ = std::move(grad);
  return *this;
}

Vec Medium::grad_n(const Vec& q, double t) const {
  if (grad_) return grad_(q, t);
  return gradient([&](const Vec& x) { return n_(x, t); }, q);
}

bool Medium::physical(const Vec& q, double t, double tol) const {
  const double v = n_(q, t);
  return std::isfinite(v) && v >= 1.0 - tol;
}

Medium Medium::homogeneous(double n, double c) {
  Medium m([n](const Vec&, double) { return n; }, c);
  m.with_gradient([](const Vec& q, double) { return Vec(Vec::Zero(q.size())); });
  return m;
}

Medium Medium::linear(double n0, const Vec& g, double c) {
  Medium m([n0, g](const Vec& q, double) { return n0 + g.dot(q); }, c);
  m.with_gradient([g](const Vec&, double) { return g; });
  return m;
}

Medium Medium::interface(double n1, double n2, int axis, double at, double width, double c) {
  if (!(width > 0.0)) throw std::invalid_argument("Medium::interface: width must be positive");
  const double mean = 0.5 * (n1 + n2);
  const double half = 0.5 * (n2 - n1);
  Medium m([=](const Vec& q, double) { return mean + half * std::tanh((q(axis) - at) / width); }, c);
  m.with_gradient([=](const Vec& q, double) {
    Vec g = Vec::Zero(q.size());
    const double th = std::tanh((q(axis) - at) / width);
    g(axis) = half * (1.0 - th * th) / width;
    return g;
  });
  return m;
}

// ---------------------------------------------------------------------------
// Optical systems
// ---------------------------------------------------------------------------

LagrangianSystem optical_lagrangian(const Medium& m) {
  const double c = m.c();
  LagrangianSystem sys(
      2, [m, c](const VarState& s) { return m.n(s.q, s.t) / c * std::sqrt(1.0 + s.qdot.squaredNorm()); },
      Domain::unbounded(2));
  sys.with_gradients(
      [m, c](const VarState& s) {
        return Vec(m.grad_n(s.q, s.t) / c * std::sqrt(1.0 + s.qdot.squaredNorm()));
      },
      [m, c](const VarState& s) {
        return Vec(m.n(s.q, s.t) / c * s.qdot / std::sqrt(1.0 + s.qdot.squaredNorm()));
      });
  sys.with_velocity_hessian([m, c](const VarState& s) {
    const double w = std::sqrt(1.0 + s.qdot.squaredNorm());
    const Mat id = Mat::Identity(2, 2);
    return Mat(m.n(s.q, s.t) / c * (id / w - s.qdot * s.qdot.transpose() / (w * w * w)));
  });
  return sys;
}

HamiltonianSystem optical_hamiltonian(const Medium& m) {
  const double c = m.c();
  auto root = [m, c](const PhasePoint& x) {
    const double n = m.n(x.q, x.t);
    const double r = n * n / (c * c) - x.p.squaredNorm();
    return r > 0.0 ? std::sqrt(r) : kNaN;
  };
  HamiltonianSystem ham(2, [root](const PhasePoint& x) { return -root(x); }, Domain::unbounded(2));
  ham.with_gradients(
      [m, c, root](const PhasePoint& x) {
        return Vec(-m.n(x.q, x.t) * m.grad_n(x.q, x.t) / (c * c * root(x)));
      },
      [root](const PhasePoint& x) { return Vec(x.p / root(x)); });
  return ham;
}

LagrangianSystem fermat_time_lagrangian(const Medium& m) {
  const double c = m.c();
  auto index = [m](const Vec& x) { return m.n(x.head(2), x(2)); };
  LagrangianSystem sys(3, [index, c](const VarState& s) { return index(s.q) / c * s.qdot.norm(); },
                       Domain::unbounded(3));
  sys.with_gradients(
      [index, c](const VarState& s) { return Vec(gradient(index, s.q) / c * s.qdot.norm()); },
      [index, c](const VarState& s) { return Vec(index(s.q) / c * s.qdot / s.qdot.norm()); });
  sys.with_velocity_hessian([index, c](const VarState& s) {
    const double w = s.qdot.norm();
    const Mat id = Mat::Identity(3, 3);
    return Mat(index(s.q) / c * (id / w - s.qdot * s.qdot.transpose() / (w * w * w)));
  });
  return sys;
}

Vec ray_momentum(const Medium& m, const SpacetimePoint& at, const Vec& slope) {
  return m.n(at.q, at.t) / m.c() * slope / std::sqrt(1.0 + slope.squaredNorm());
}

double bouguer_invariant(const Medium& m, const PhasePoint& x) {
  return -m.c() * optical_hamiltonian(m).value(x);
}

double interface_sine(const Medium& m, const PhasePoint& x, int axis) {
  const Vec v = optical_hamiltonian(m).d_p(x);
  const double w2 = 1.0 + v.squaredNorm();
  return std::sqrt(w2 - v(axis) * v(axis)) / std::sqrt(w2);
}

// ---------------------------------------------------------------------------
// Rays
// ---------------------------------------------------------------------------

namespace {

PhasePoint unpack(const StateVec& y, double t) {
  PhasePoint x;
  x.q = y.head(2);
  x.p = y.segment(2, 2);
  x.t = t;
  return x;
}

StateVec pack(const PhasePoint& x, double action) {
  StateVec y(5);
  y.head(2) = x.q;
  y.segment(2, 2) = x.p;
  y(4) = action;
  return y;
}

void check_slope(const HamiltonianSystem& ham, const PhasePoint& x, const RayOptions& o,
                 const ExtremalCurve& partial) {
  const Vec v = ham.d_p(x);
  if (!v.allFinite() || !x.q.allFinite() || v.norm() > o.max_slope) {
    std::ostringstream os;
    os << "ray slope " << v.norm() << " exceeds " << o.max_slope << " at t=" << x.t;
    throw ParaxialViolation(os.str(), partial);
  }
}

/// Fixed-step RK4 over at most `span` in t; stops where the travel time
/// reaches `target` if one is given.
ExtremalCurve run_ray(const HamiltonianSystem& ham, const PhasePoint& start, double span,
                      std::optional<double> target, const RayOptions& o) {
  const Rhs rhs = canonical_rhs(ham);
  ExtremalCurve curve;
  curve.samples.push_back(start);
  curve.action.push_back(0.0);
  check_slope(ham, start, o, curve);
  if (target && *target == 0.0) return curve;

  const std::size_t n = step_count(span, o.step);
  const double h = n == 0 ? 0.0 : span / static_cast<double>(n);
  StateVec y = pack(start, 0.0);
  double t = start.t;
  auto event = [&](double, const StateVec& s) { return s(4) - *target; };
  for (std::size_t k = 0; k < n; ++k) {
    StateVec next = rk4_step(rhs, t, y, h);
    const double t_next = start.t + h * static_cast<double>(k + 1);
    check_slope(ham, unpack(next, t_next), o, curve);
    if (target && event(t_next, next) >= 0.0) {
      const EventHit hit = refine_event(rhs, t, y, h, event, o.t_tol);
      curve.samples.push_back(unpack(hit.y, hit.t));
      curve.action.push_back(hit.y(4));
      return curve;
    }
    y = next;
    t = t_next;
    curve.samples.push_back(unpack(y, t));
    curve.action.push_back(y(4));
  }
  if (target) {
    std::ostringstream os;
    os << "travel time " << curve.total_action() << " short of " << *target << " after span " << span;
    throw ParaxialViolation(os.str(), curve);
  }
  return curve;
}

/// Bound on the t-advance needed for travel time dT: the time per unit t is
/// (n/c)√(1 + |q̇|²) ≥ n/c.
double span_for_time(const Medium& m, const PhasePoint& x, double dT) {
  const double n = m.n(x.q, x.t);
  return 4.0 * dT * m.c() / std::max(n, 0.25) + 1e-9;
}

}  // namespace

ExtremalCurve trace_ray(const Medium& m, const SpacetimePoint& start, const Vec& direction, double t_end,
                        const RayOptions& opts) {
  if (t_end < start.t) throw BadCurve("trace_ray: t_end precedes the start");
  if (direction.size() != 2) throw std::invalid_argument("trace_ray: direction must have two components");
  const PhasePoint x{start.q, ray_momentum(m, start, direction), start.t};
  return run_ray(optical_hamiltonian(m), x, t_end - start.t, std::nullopt, opts);
}

ExtremalCurve trace_ray_for_time(const Medium& m, const PhasePoint& x, double dT, const RayOptions& opts) {
  if (dT < 0.0) throw BadCurve("trace_ray_for_time: negative travel time");
  return run_ray(optical_hamiltonian(m), x, span_for_time(m, x, dT), dT, opts);
}

// ---------------------------------------------------------------------------
// Fronts
// ---------------------------------------------------------------------------

std::size_t WaveFront::failures() const {
  std::size_t n = 0;
  for (const auto& e : errors) n += e.has_value() ? 1 : 0;
  return n;
}

namespace {

WaveFront empty_front(double T, int rows, int cols, std::string source) {
  WaveFront f;
  f.T = T;
  f.rows = rows;
  f.cols = cols;
  const auto n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  f.points.assign(n, SpacetimePoint{Vec::Constant(2, kNaN), kNaN});
  f.momenta.assign(n, Vec::Constant(2, kNaN));
  f.errors.assign(n, std::nullopt);
  f.source = std::move(source);
  return f;
}

/// Advances sample k of `out` from phase point x by travel time dT.
void advance_sample(const Medium& m, WaveFront& out, std::size_t k, const PhasePoint& x, double dT,
                    const RayOptions& opts) {
  try {
    const ExtremalCurve ray = trace_ray_for_time(m, x, dT, opts);
    out.points[k] = {ray.back().q, ray.back().t};
    out.momenta[k] = ray.back().p;
  } catch (const Error& e) {
    out.errors[k] = e.name();
  }
}

}  // namespace

WaveFront wavefront_from_point(const Medium& m, const SpacetimePoint& p1, double T, const FanSpec& fan,
                               const RayOptions& opts) {
  if (fan.rows < 1 || fan.cols < 1) throw std::invalid_argument("wavefront_from_point: empty fan");
  if (T < 0.0) throw BadCurve("wavefront_from_point: negative travel time");
  WaveFront f = empty_front(T, fan.rows, fan.cols, "point");
  auto slope = [&](int i, int n) {
    return n == 1 ? 0.0 : -fan.aperture + 2.0 * fan.aperture * i / (n - 1);
  };
  parallel_for(f.size(), [&](std::size_t k) {
    const int r = static_cast<int>(k) / fan.cols;
    const int c = static_cast<int>(k) % fan.cols;
    const Vec dir = vec({slope(r, fan.rows), slope(c, fan.cols)});
    const PhasePoint x{p1.q, ray_momentum(m, p1, dir), p1.t};
    advance_sample(m, f, k, x, T, opts);
  });
  return f;
}

WaveFront continue_front(const Medium& m, const WaveFront& front, double dT, const RayOptions& opts) {
  WaveFront f = empty_front(front.T + dT, front.rows, front.cols, front.source);
  parallel_for(f.size(), [&](std::size_t k) {
    if (!front.ok(k)) {
      f.errors[k] = front.errors[k];
      return;
    }
    advance_sample(m, f, k, PhasePoint{front.points[k].q, front.momenta[k], front.points[k].t}, dT, opts);
  });
  return f;
}

WaveFront propagate_front(const Medium& m, const HypersurfaceFamily& fam, double sigma, double T,
                          const std::vector<SpacetimePoint>& lattice, int rows, int cols, const RayOptions& opts) {
  if (lattice.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw std::invalid_argument("propagate_front: lattice size does not match rows x cols");
  }
  if (fam.dim() != 2) throw std::invalid_argument("propagate_front: family must live on two coordinates");
  const HamiltonianSystem ham = optical_hamiltonian(m);
  WaveFront f = empty_front(T, rows, cols, "family");
  std::vector<PhasePoint> starts(lattice.size());
  for (std::size_t k = 0; k < lattice.size(); ++k) {
    const auto on = project_to_level(fam, lattice[k], sigma);
    if (!on) {
      f.errors[k] = "ProjectionFailure";
      continue;
    }
    const Vec p = fam.grad_q(on->q, on->t);
    const double r = fam.d_t(on->q, on->t) + ham.value({on->q, p, on->t});
    if (!(std::abs(r) <= 1e-6)) {
      std::ostringstream os;
      os << "eikonal residual " << r << " at sample " << k;
      throw NotEquidistantFamily(os.str());
    }
    starts[k] = {on->q, p, on->t};
  }
  parallel_for(f.size(), [&](std::size_t k) {
    if (f.errors[k]) return;
    advance_sample(m, f, k, starts[k], T, opts);
  });
  return f;
}

// ---------------------------------------------------------------------------
// Huygens' construction
// ---------------------------------------------------------------------------

namespace {

Eigen::Vector3d lift(const SpacetimePoint& x) { return {x.q(0), x.q(1), x.t}; }

struct LatticeAxis {
  int stride;
  int extent;
};

}  // namespace

HuygensReport huygens_check(const Medium& m, const WaveFront& front, double dT, const RayOptions& opts) {
  if (!(dT > 0.0)) throw std::invalid_argument("huygens_check: dT must be positive");
  const std::size_t n = front.size();
  const int rows = front.rows;
  const int cols = front.cols;
  std::vector<LatticeAxis> axes;
  if (cols > 1) axes.push_back({1, cols});
  if (rows > 1) axes.push_back({cols, rows});
  if (axes.empty()) throw SamplingTooCoarse("huygens_check: front has a single sample");

  for (std::size_t k = 0; k < n; ++k) {
    if (!front.ok(k)) continue;
    for (const auto& ax : axes) {
      const int idx = ax.stride == 1 ? static_cast<int>(k) % cols : static_cast<int>(k) / cols;
      if (idx + 1 >= ax.extent) continue;
      const std::size_t j = k + static_cast<std::size_t>(ax.stride);
      if (!front.ok(j)) continue;
      const double gap = (lift(front.points[j]) - lift(front.points[k])).norm();
      if (gap > dT) {
        std::ostringstream os;
        os << "neighbouring samples " << gap << " apart exceed the secondary radius " << dT;
        throw SamplingTooCoarse(os.str());
      }
    }
  }

  HuygensReport rep;
  rep.direct = continue_front(m, front, dT, opts);
  const HamiltonianSystem ham = optical_hamiltonian(m);
  ShootingOptions so;
  so.tol = 1e-12;
  so.step = StepControl{std::min(opts.step, dT / 20.0)};

  // Travel time from centre j to target X; +inf where no forward connection exists.
  auto travel = [&](std::size_t j, const SpacetimePoint& X) {
    if (!front.ok(j)) return kInf;
    const SpacetimePoint& cj = front.points[j];
    if (!(X.t > cj.t + 1e-12)) return kInf;
    try {
      const TwoPointResult r = two_point_characteristic(ham, cj, X, front.momenta[j], so);
      return r.value;
    } catch (const Error&) {
      return kInf;
    }
  };

  std::vector<double> defect(n, kNaN);
  parallel_for(n, [&](std::size_t k) {
    if (!front.ok(k) || !rep.direct.ok(k)) return;
    const SpacetimePoint& X = rep.direct.points[k];
    int r = static_cast<int>(k) / cols;
    int c = static_cast<int>(k) % cols;
    auto at = [&](int rr, int cc) { return static_cast<std::size_t>(rr) * cols + static_cast<std::size_t>(cc); };
    // Walk to the lattice minimum of the travel time.
    double best = travel(k, X);
    for (int walk = 0; walk < 8; ++walk) {
      bool moved = false;
      for (int dr = -1; dr <= 1 && !moved; ++dr) {
        for (int dc = -1; dc <= 1 && !moved; ++dc) {
          if ((dr == 0 && dc == 0) || r + dr < 0 || r + dr >= rows || c + dc < 0 || c + dc >= cols) continue;
          const double v = travel(at(r + dr, c + dc), X);
          if (v < best) {
            best = v;
            r += dr;
            c += dc;
            moved = true;
          }
        }
      }
      if (!moved) break;
    }
    if (!std::isfinite(best)) return;
    // Separable parabolic refinement; a touching point on the lattice edge
    // cannot be bracketed and the sample is skipped.
    double fmin = best;
    if (cols > 1) {
      if (c == 0 || c == cols - 1) return;
      const double a = travel(at(r, c - 1), X);
      const double b = travel(at(r, c + 1), X);
      const double curv = a - 2.0 * best + b;
      if (!std::isfinite(curv)) return;
      if (curv > 0.0) fmin -= (b - a) * (b - a) / (8.0 * curv);
    }
    if (rows > 1) {
      if (r == 0 || r == rows - 1) return;
      const double a = travel(at(r - 1, c), X);
      const double b = travel(at(r + 1, c), X);
      const double curv = a - 2.0 * best + b;
      if (!std::isfinite(curv)) return;
      if (curv > 0.0) fmin -= (b - a) * (b - a) / (8.0 * curv);
    }
    defect[k] = std::abs(fmin - dT) * m.c() / m.n(X.q, X.t);
  });

  for (double d : defect) {
    if (std::isnan(d)) continue;
    rep.max_defect = std::max(rep.max_defect, d);
    ++rep.checked;
  }
  if (rep.checked == 0) throw SamplingTooCoarse("huygens_check: no sample has an interior touching point");
  return rep;
}

double front_normal_defect(const Medium& m, const WaveFront& front) {
  const HamiltonianSystem ham = optical_hamiltonian(m);
  const int rows = front.rows;
  const int cols = front.cols;
  double worst = 0.0;
  auto ok = [&](int r, int c) {
    return r >= 0 && r < rows && c >= 0 && c < cols && front.ok(static_cast<std::size_t>(r * cols + c));
  };
  auto X = [&](int r, int c) { return lift(front.points[static_cast<std::size_t>(r * cols + c)]); };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!ok(r, c)) continue;
      const std::size_t k = static_cast<std::size_t>(r * cols + c);
      const PhasePoint x{front.points[k].q, front.momenta[k], front.points[k].t};
      const Eigen::Vector3d normal(x.p(0), x.p(1), -ham.value(x));
      const double scale = m.n(x.q, x.t) / m.c();
      for (int axis = 0; axis < 2; ++axis) {
        const int dr = axis == 1 ? 1 : 0;
        const int dc = axis == 0 ? 1 : 0;
        Eigen::Vector3d tangent;
        if (ok(r + 2 * dr, c + 2 * dc) && ok(r - 2 * dr, c - 2 * dc) && ok(r + dr, c + dc) && ok(r - dr, c - dc)) {
          tangent = (X(r - 2 * dr, c - 2 * dc) - 8.0 * X(r - dr, c - dc) + 8.0 * X(r + dr, c + dc) -
                     X(r + 2 * dr, c + 2 * dc)) / 12.0;
        } else if ((axis == 0 ? cols : rows) < 5 && ok(r + dr, c + dc) && ok(r - dr, c - dc)) {
          tangent = 0.5 * (X(r + dr, c + dc) - X(r - dr, c - dc));
        } else {
          continue;
        }
        if (tangent.norm() == 0.0) continue;
        worst = std::max(worst, std::abs(normal.dot(tangent)) / (scale * tangent.norm()));
      }
    }
  }
  return worst;
}

}  // namespace hjkit
