#include "hjkit/varcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hjkit {

// ---------------------------------------------------------------------------
// LagrangianSystem
// ---------------------------------------------------------------------------

LagrangianSystem::LagrangianSystem(int dim, ValueFn lagrangian, Domain domain)
    : dim_(dim), value_(std::move(lagrangian)), domain_(std::move(domain)) {
  if (dim_ <= 0 || dim_ > kMaxDim) throw std::invalid_argument("LagrangianSystem: bad dimension");
  if (domain_.dim() != dim_) throw std::invalid_argument("LagrangianSystem: domain dimension mismatch");
}

LagrangianSystem& LagrangianSystem::with_gradients(VecFn d_q, VecFn d_qdot) {
  d_q_ = std::move(d_q);
  d_qdot_ = std::move(d_qdot);
  return *this;
}

LagrangianSystem& LagrangianSystem::with_velocity_hessian(MatFn hess) {
  hess_ = std::move(hess);
  return *this;
}

LagrangianSystem& LagrangianSystem::with_time_derivative(ValueFn d_t) {
  d_t_ = std::move(d_t);
  return *this;
}

Vec LagrangianSystem::d_q(const VarState& s) const {
  if (d_q_) return d_q_(s);
  return gradient([&](const Vec& q) { return value_({q, s.qdot, s.t}); }, s.q);
}

Vec LagrangianSystem::d_qdot(const VarState& s) const {
  if (d_qdot_) return d_qdot_(s);
  return gradient([&](const Vec& v) { return value_({s.q, v, s.t}); }, s.qdot);
}

double LagrangianSystem::d_t(const VarState& s) const {
  if (d_t_) return d_t_(s);
  return derivative([&](double t) { return value_({s.q, s.qdot, t}); }, s.t);
}

Mat LagrangianSystem::velocity_hessian(const VarState& s) const {
  if (hess_) return hess_(s);
  Mat h;
  if (d_qdot_) {
    h = jacobian([&](const Vec& v) { return d_qdot_({s.q, v, s.t}); }, s.qdot, dim_);
    h = 0.5 * (h + h.transpose()).eval();
  } else {
    h = hessian_from_values([&](const Vec& v) { return value_({s.q, v, s.t}); }, s.qdot);
  }
  return h;
}

HessianCheck hessian_det(const LagrangianSystem& sys, const VarState& state, double degeneracy_tol) {
  const Mat h = sys.velocity_hessian(state);
  HessianCheck out;
  out.det = h.determinant();
  out.norm = h.norm();
  const double scale = std::pow(std::max(out.norm, 1e-300), static_cast<double>(sys.dim()));
  out.degenerate = !(std::abs(out.det) > degeneracy_tol * scale);
  return out;
}

void require_nondegenerate(const LagrangianSystem& sys, const VarState& state, double degeneracy_tol) {
  const HessianCheck c = hessian_det(sys, state, degeneracy_tol);
  if (c.degenerate) {
    std::ostringstream os;
    os << "velocity Hessian determinant " << c.det << " (norm " << c.norm << ") at t=" << state.t;
    throw DegenerateLagrangian(os.str());
  }
}

// ---------------------------------------------------------------------------
// Legendre inversion
// ---------------------------------------------------------------------------

Vec invert_momentum(const LagrangianSystem& sys, const Vec& q, const Vec& p, double t,
                    const Vec& seed, const InversionOptions& opts) {
  const int n = sys.dim();
  Vec v = (seed.size() == n && seed.allFinite()) ? seed : Vec(Vec::Zero(n));
  auto residual = [&](const Vec& x) -> Vec { return sys.d_qdot({q, x, t}) - p; };
  const double scale = 1.0 + p.norm();

  Vec r = residual(v);
  double rn = r.norm();
  for (int it = 0; it < opts.max_iter; ++it) {
    if (!std::isfinite(rn)) break;
    const bool converged = rn <= opts.tol * scale;
    const Mat jac = sys.velocity_hessian({q, v, t});
    const Vec dv = jac.fullPivLu().solve(-r);
    if (!dv.allFinite()) break;
    double lambda = 1.0;
    Vec trial = v + dv;
    Vec rt = residual(trial);
    double rtn = rt.norm();
    for (int ls = 0; ls < 30 && !(rtn < rn) && !converged; ++ls) {
      lambda *= 0.5;
      trial = v + lambda * dv;
      rt = residual(trial);
      rtn = rt.norm();
    }
    if (converged) {
      // One polishing step past the tolerance; keep it only if it helps.
      return (std::isfinite(rtn) && rtn <= rn) ? trial : v;
    }
    if (!(rtn < rn) && !(rtn <= opts.tol * scale)) {
      rn = rtn;
      break;
    }
    v = trial;
    r = rt;
    rn = rtn;
  }
  if (rn <= opts.tol * scale) return v;
  std::ostringstream os;
  os << "p = L_qdot not inverted after " << opts.max_iter << " iterations (residual " << rn << ")";
  throw InversionFailure(os.str(), rn);
}

// ---------------------------------------------------------------------------
// HamiltonianSystem
// ---------------------------------------------------------------------------

HamiltonianSystem::HamiltonianSystem(int dim, ValueFn hamiltonian, Domain domain)
    : dim_(dim), value_(std::move(hamiltonian)), domain_(std::move(domain)) {
  if (dim_ <= 0 || dim_ > kMaxDim) throw std::invalid_argument("HamiltonianSystem: bad dimension");
  if (domain_.dim() != dim_) throw std::invalid_argument("HamiltonianSystem: domain dimension mismatch");
}

HamiltonianSystem& HamiltonianSystem::with_gradients(VecFn d_q, VecFn d_p) {
  d_q_ = std::move(d_q);
  d_p_ = std::move(d_p);
  return *this;
}

HamiltonianSystem& HamiltonianSystem::with_time_derivative(ValueFn d_t) {
  d_t_ = std::move(d_t);
  return *this;
}

Vec HamiltonianSystem::d_q(const PhasePoint& x) const {
  if (d_q_) return d_q_(x);
  return gradient([&](const Vec& q) { return value_({q, x.p, x.t}); }, x.q);
}

Vec HamiltonianSystem::d_p(const PhasePoint& x) const {
  if (d_p_) return d_p_(x);
  return gradient([&](const Vec& p) { return value_({x.q, p, x.t}); }, x.p);
}

double HamiltonianSystem::d_t(const PhasePoint& x) const {
  if (d_t_) return d_t_(x);
  return derivative([&](double t) { return value_({x.q, x.p, t}); }, x.t);
}

Mat HamiltonianSystem::momentum_hessian(const PhasePoint& x) const {
  if (d_p_) {
    Mat h = jacobian([&](const Vec& p) { return d_p_({x.q, p, x.t}); }, x.p, dim_);
    return 0.5 * (h + h.transpose());
  }
  return hessian_from_values([&](const Vec& p) { return value_({x.q, p, x.t}); }, x.p);
}

double HamiltonianSystem::lagrangian(const PhasePoint& x) const {
  return x.p.dot(d_p(x)) - value_(x);
}

namespace {

// Per-thread memo of the last inversion: an exact hit skips Newton, and any
// earlier solution for the same system seeds the next one.
struct InversionMemo {
  const void* owner = nullptr;
  Vec q;
  Vec p;
  double t = 0.0;
  Vec qdot;
};
thread_local InversionMemo t_memo;

Vec cached_inversion(const std::shared_ptr<const LagrangianSystem>& sys, const InversionOptions& opts,
                     const PhasePoint& x) {
  InversionMemo& m = t_memo;
  const bool same_owner = m.owner == sys.get() && m.qdot.size() == x.p.size();
  if (same_owner && m.t == x.t && m.q == x.q && m.p == x.p) return m.qdot;
  Vec v;
  if (same_owner) {
    try {
      v = invert_momentum(*sys, x.q, x.p, x.t, m.qdot, opts);
    } catch (const InversionFailure&) {
      v = invert_momentum(*sys, x.q, x.p, x.t, Vec::Zero(x.p.size()), opts);
    }
  } else {
    v = invert_momentum(*sys, x.q, x.p, x.t, Vec::Zero(x.p.size()), opts);
  }
  m.owner = sys.get();
  m.q = x.q;
  m.p = x.p;
  m.t = x.t;
  m.qdot = v;
  return v;
}

// Sample points covering the finite part of a domain (unit box where unbounded).
std::vector<VarState> spot_check_states(const LagrangianSystem& sys) {
  const int n = sys.dim();
  const Domain& d = sys.domain();
  auto span = [](double lo, double hi) {
    const double a = std::isfinite(lo) ? lo : std::min(-1.0, std::isfinite(hi) ? hi - 2.0 : -1.0);
    const double b = std::isfinite(hi) ? hi : std::max(1.0, a + 2.0);
    return Interval{a, b};
  };
  const Interval tr = span(d.t_range().lo, d.t_range().hi);
  const double t_mid = std::isfinite(d.t_range().lo) || std::isfinite(d.t_range().hi)
                           ? 0.5 * (tr.lo + tr.hi)
                           : 0.0;
  std::vector<VarState> out;
  const int slots = 2 * n;
  if (slots <= 6) {
    std::size_t total = 1;
    for (int k = 0; k < slots; ++k) total *= 3;
    for (std::size_t idx = 0; idx < total; ++idx) {
      VarState s{Vec(n), Vec(n), t_mid};
      std::size_t code = idx;
      for (int k = 0; k < slots; ++k) {
        const double frac = 0.1 + 0.4 * static_cast<double>(code % 3);
        code /= 3;
        if (k < n) {
          const Interval qi = span(d.lower()(k), d.upper()(k));
          s.q(k) = qi.lo + frac * qi.length();
        } else {
          s.qdot(k - n) = -1.0 + 2.0 * frac;
        }
      }
      out.push_back(s);
    }
  } else {
    UniformSource rng(0x5eedULL);
    for (int k = 0; k < 64; ++k) {
      VarState s{Vec(n), Vec(n), t_mid};
      for (int i = 0; i < n; ++i) {
        const Interval qi = span(d.lower()(i), d.upper()(i));
        s.q(i) = qi.lo + (0.1 + 0.8 * rng.next()) * qi.length();
        s.qdot(i) = rng.uniform(-1.0, 1.0);
      }
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace

HamiltonianSystem to_hamiltonian(const LagrangianSystem& sys, const InversionOptions& opts) {
  for (const VarState& s : spot_check_states(sys)) require_nondegenerate(sys, s);

  auto source = std::make_shared<const LagrangianSystem>(sys);
  auto value = [source, opts](const PhasePoint& x) {
    const Vec v = cached_inversion(source, opts, x);
    return x.p.dot(v) - source->value({x.q, v, x.t});
  };
  HamiltonianSystem ham(sys.dim(), value, sys.domain());
  ham.with_gradients(
      [source, opts](const PhasePoint& x) -> Vec {
        const Vec v = cached_inversion(source, opts, x);
        return -source->d_q({x.q, v, x.t});
      },
      [source, opts](const PhasePoint& x) -> Vec { return cached_inversion(source, opts, x); });
  ham.with_time_derivative([source, opts](const PhasePoint& x) {
    const Vec v = cached_inversion(source, opts, x);
    return -source->d_t({x.q, v, x.t});
  });
  ham.source_ = source;
  return ham;
}

// ---------------------------------------------------------------------------
// Curves, fundamental integral, Euler-Lagrange residual
// ---------------------------------------------------------------------------

Vec TimeCurve::velocity(double t) const {
  if (qdot) return qdot(t);
  const double span = std::abs(t1 - t0);
  const double h = 1e-3 * std::clamp(span, 1e-3, 1.0);
  return derivative5([this](double s) -> Vec { return q(s); }, t, h);
}

Rhs canonical_rhs(const HamiltonianSystem& ham) {
  const int n = ham.dim();
  return [ham, n](double t, const StateVec& y) -> StateVec {
    const PhasePoint x{y.head(n), y.segment(n, n), t};
    const Vec hp = ham.d_p(x);
    const Vec hq = ham.d_q(x);
    StateVec dy(2 * n + 1);
    dy.head(n) = hp;
    dy.segment(n, n) = -hq;
    dy(2 * n) = x.p.dot(hp) - ham.value(x);
    return dy;
  };
}

TimeCurve TimeCurve::from_extremal(const ExtremalCurve& curve, const HamiltonianSystem& ham) {
  if (curve.empty()) throw BadCurve("empty extremal");
  auto samples = std::make_shared<const std::vector<PhasePoint>>(curve.samples);
  auto rhs = std::make_shared<const Rhs>(canonical_rhs(ham));
  const int n = ham.dim();
  auto state_at = [samples, rhs, n](double t) -> StateVec {
    const auto& s = *samples;
    std::size_t k = 0;
    if (s.size() > 1) {
      auto it = std::upper_bound(s.begin(), s.end(), t,
                                 [](double v, const PhasePoint& p) { return v < p.t; });
      k = it == s.begin() ? 0 : static_cast<std::size_t>(it - s.begin()) - 1;
      k = std::min(k, s.size() - 2);
    }
    StateVec y(2 * n + 1);
    y.head(n) = s[k].q;
    y.segment(n, n) = s[k].p;
    y(2 * n) = 0.0;
    const double h = t - s[k].t;
    return h == 0.0 ? y : rk4_step(*rhs, s[k].t, y, h);
  };
  TimeCurve out;
  out.t0 = curve.samples.front().t;
  out.t1 = curve.samples.back().t;
  out.q = [state_at, n](double t) -> Vec { return state_at(t).head(n); };
  out.qdot = [state_at, ham, n](double t) -> Vec {
    const StateVec y = state_at(t);
    return ham.d_p({y.head(n), y.segment(n, n), t});
  };
  return out;
}

double fundamental_integral(const LagrangianSystem& sys, const TimeCurve& curve,
                            std::size_t quadrature_steps) {
  if (!std::isfinite(curve.t0) || !std::isfinite(curve.t1) || curve.t1 < curve.t0) {
    throw BadCurve("parameter must increase along the curve");
  }
  if (curve.t1 == curve.t0) return 0.0;
  auto integrand = [&](double t) {
    const Vec q = curve.position(t);
    if (!sys.domain().contains(q, t)) {
      std::ostringstream os;
      os << "curve leaves the domain at t=" << t;
      throw DomainEscape(os.str());
    }
    return sys.value({q, curve.velocity(t), t});
  };
  return simpson(integrand, curve.t0, curve.t1, quadrature_steps);
}

Vec el_residual(const LagrangianSystem& sys, const TimeCurve& curve, double t) {
  const double h = std::min(1e-3, (curve.t1 - curve.t0) / 16.0);
  if (!(h > 0.0) || t - 2.0 * h < curve.t0 || t + 2.0 * h > curve.t1) {
    std::ostringstream os;
    os << "t=" << t << " too close to the curve ends [" << curve.t0 << ", " << curve.t1 << "]";
    throw BoundaryPoint(os.str());
  }
  auto momentum = [&](double s) -> Vec {
    return sys.d_qdot({curve.position(s), curve.velocity(s), s});
  };
  const Vec dp = derivative5(momentum, t, h);
  return dp - sys.d_q({curve.position(t), curve.velocity(t), t});
}

// ---------------------------------------------------------------------------
// Canonical integration
// ---------------------------------------------------------------------------

namespace {

StateVec pack(const PhasePoint& x, double action) {
  const auto n = x.q.size();
  StateVec y(2 * n + 1);
  y.head(n) = x.q;
  y.segment(n, n) = x.p;
  y(2 * n) = action;
  return y;
}

PhasePoint unpack(const StateVec& y, double t) {
  const auto n = (y.size() - 1) / 2;
  return {y.head(n), y.segment(n, n), t};
}

void check_inside(const HamiltonianSystem& ham, const StateVec& y, double t, ExtremalCurve& curve) {
  const PhasePoint x = unpack(y, t);
  if (!y.allFinite() || !ham.domain().contains(x.q, t)) {
    std::ostringstream os;
    os << "extremal leaves the domain near t=" << t;
    throw DomainEscape(os.str(), std::move(curve));
  }
}

}  // namespace

ExtremalCurve integrate_extremal(const HamiltonianSystem& ham, const PhasePoint& start, double t_end,
                                 const StepControl& control) {
  if (start.q.size() != ham.dim() || start.p.size() != ham.dim()) {
    throw std::invalid_argument("integrate_extremal: start has wrong dimension");
  }
  if (!(t_end >= start.t)) throw BadCurve("integrate_extremal requires t_end >= start.t");
  if (!ham.domain().contains(start.q, start.t)) throw DomainEscape("start point outside the domain");
  if (!(control.step > 0.0)) throw std::invalid_argument("integrate_extremal: step must be positive");

  ExtremalCurve curve;
  curve.samples.push_back(start);
  curve.action.push_back(0.0);
  const std::size_t steps = step_count(t_end - start.t, control.step);
  if (steps == 0) return curve;
  const double h = (t_end - start.t) / static_cast<double>(steps);
  const Rhs rhs = canonical_rhs(ham);
  StateVec y = pack(start, 0.0);
  const auto n = start.q.size();
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = start.t + h * static_cast<double>(k);
    y = rk4_step(rhs, t, y, h);
    const double t_next = (k + 1 == steps) ? t_end : start.t + h * static_cast<double>(k + 1);
    check_inside(ham, y, t_next, curve);
    curve.samples.push_back(unpack(y, t_next));
    curve.action.push_back(y(2 * n));
  }
  return curve;
}

StoppedExtremal integrate_extremal_until(const HamiltonianSystem& ham, const PhasePoint& start,
                                         double max_span, const ExtremalEvent& event,
                                         const StepControl& control, double t_tol) {
  StoppedExtremal out;
  out.curve.samples.push_back(start);
  out.curve.action.push_back(0.0);
  if (!ham.domain().contains(start.q, start.t)) throw DomainEscape("start point outside the domain");
  const auto n = start.q.size();
  auto g = [&](double t, const StateVec& y) { return event(t, unpack(y, t), y(2 * n)); };
  StateVec y = pack(start, 0.0);
  double g_prev = g(start.t, y);
  if (g_prev == 0.0) {
    out.hit = true;
    return out;
  }
  const std::size_t steps = step_count(max_span, control.step);
  if (steps == 0) return out;
  const double h = max_span / static_cast<double>(steps);
  const Rhs rhs = canonical_rhs(ham);
  double t = start.t;
  for (std::size_t k = 0; k < steps; ++k) {
    const StateVec y_next = rk4_step(rhs, t, y, h);
    const double t_next = start.t + h * static_cast<double>(k + 1);
    check_inside(ham, y_next, t_next, out.curve);
    const double g_next = g(t_next, y_next);
    if (g_next == 0.0 || (g_next > 0) != (g_prev > 0)) {
      const EventHit hit = refine_event(rhs, t, y, h, g, t_tol);
      out.curve.samples.push_back(unpack(hit.y, hit.t));
      out.curve.action.push_back(hit.y(2 * n));
      out.hit = true;
      return out;
    }
    y = y_next;
    t = t_next;
    g_prev = g_next;
    out.curve.samples.push_back(unpack(y, t));
    out.curve.action.push_back(y(2 * n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Homogenised system
// ---------------------------------------------------------------------------

ExtendedSystem::ExtendedSystem(LagrangianSystem base, HamiltonianSystem ham)
    : base_(std::move(base)), ham_(std::move(ham)) {
  if (base_.dim() + 1 > kMaxDim) throw std::invalid_argument("ExtendedSystem: dimension too large");
}

double ExtendedSystem::lstar(const Vec& q, const Vec& qprime) const {
  const int m = base_.dim();
  if (q.size() != m + 1 || qprime.size() != m + 1) {
    throw std::invalid_argument("ExtendedSystem::lstar: wrong dimension");
  }
  const double qn = qprime(m);
  if (!(qn > 0.0)) throw BadParameterDirection("q'_n must be positive");
  const Vec qdot = qprime.head(m) / qn;
  return base_.value({q.head(m), qdot, q(m)}) * qn;
}

double ExtendedSystem::phi(const Vec& q, const Vec& p) const {
  const int m = base_.dim();
  return ham_.value({q.head(m), p.head(m), q(m)}) + p(m);
}

Vec ExtendedSystem::momenta(const Vec& q, const Vec& qprime) const {
  return gradient([&](const Vec& qp) { return lstar(q, qp); }, qprime);
}

ExtendedSystem homogenize(const LagrangianSystem& sys) { return ExtendedSystem(sys, to_hamiltonian(sys)); }

double parameter_momentum(const LagrangianSystem& sys, const VarState& state) {
  return sys.value(state) - sys.d_qdot(state).dot(state.qdot);
}

}  // namespace hjkit
