#include "hjkit/charfn.hpp"

#include <cmath>
#include <sstream>

namespace hjkit {

Vec straight_line_seed(const HamiltonianSystem& ham, const SpacetimePoint& p1, const SpacetimePoint& p2) {
  const int n = ham.dim();
  const Vec target = (p2.q - p1.q) / (p2.t - p1.t);
  Vec p = Vec::Zero(n);
  try {
    auto residual = [&](const Vec& m) { return Vec(ham.d_p({p1.q, m, p1.t}) - target); };
    Vec r = residual(p);
    for (int it = 0; it < 30; ++it) {
      if (!r.allFinite()) return Vec::Zero(n);
      if (r.norm() <= 1e-12 * (1.0 + target.norm())) break;
      const Vec dp = ham.momentum_hessian({p1.q, p, p1.t}).fullPivLu().solve(-r);
      if (!dp.allFinite()) return Vec::Zero(n);
      // Backtrack until the residual is finite and smaller.
      double lambda = 1.0;
      for (int ls = 0; ls < 40; ++ls, lambda *= 0.5) {
        const Vec trial = residual(p + lambda * dp);
        if (trial.allFinite() && trial.norm() < r.norm()) break;
      }
      p += lambda * dp;
      r = residual(p);
    }
  } catch (const Error&) {
    return Vec::Zero(n);
  }
  return p.allFinite() ? p : Vec(Vec::Zero(n));
}

namespace {

struct Shot {
  ExtremalCurve curve;
  Vec miss;
};

Shot shoot(const HamiltonianSystem& ham, const SpacetimePoint& p1, const SpacetimePoint& p2, const Vec& p,
           const ShootingOptions& opts) {
  Shot s;
  s.curve = integrate_extremal(ham, {p1.q, p, p1.t}, p2.t, opts.step);
  s.miss = s.curve.back().q - p2.q;
  return s;
}

// Newton on the initial momentum. Returns nothing if it does not converge.
std::optional<TwoPointResult> newton_shoot(const HamiltonianSystem& ham, const SpacetimePoint& p1,
                                           const SpacetimePoint& p2, const Vec& seed, const ShootingOptions& opts,
                                           Mat* final_jacobian) {
  const int n = ham.dim();
  Vec p = seed;
  TwoPointResult res;
  Shot cur;
  try {
    cur = shoot(ham, p1, p2, p, opts);
  } catch (const DomainEscape&) {
    return std::nullopt;
  }
  ++res.shots;
  for (int it = 0; it < opts.max_iter; ++it) {
    const double miss = cur.miss.norm();
    if (!std::isfinite(miss)) return std::nullopt;
    Mat j(n, n);
    try {
      j = jacobian([&](const Vec& x) -> Vec { return shoot(ham, p1, p2, x, opts).miss; }, p, n);
    } catch (const DomainEscape&) {
      return std::nullopt;
    }
    res.shots += 2 * n;
    if (miss <= opts.tol) {
      if (final_jacobian) *final_jacobian = j;
      res.value = cur.curve.total_action();
      res.p1 = p;
      res.p2 = cur.curve.back().p;
      res.converged = true;
      return res;
    }
    const Vec dp = j.fullPivLu().solve(-cur.miss);
    if (!dp.allFinite()) return std::nullopt;
    double lambda = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      try {
        Shot trial = shoot(ham, p1, p2, p + lambda * dp, opts);
        ++res.shots;
        if (trial.miss.norm() < miss) {
          p += lambda * dp;
          cur = std::move(trial);
          improved = true;
          break;
        }
      } catch (const DomainEscape&) {
      }
      lambda *= 0.5;
    }
    if (!improved) return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

TwoPointResult two_point_characteristic(const HamiltonianSystem& ham, const SpacetimePoint& p1,
                                        const SpacetimePoint& p2, const std::optional<Vec>& seed_p1,
                                        const ShootingOptions& opts) {
  if (!(p2.t > p1.t)) throw BadCurve("two-point characteristic requires t2 > t1");
  const int n = ham.dim();
  const Vec seed = seed_p1 ? *seed_p1 : straight_line_seed(ham, p1, p2);
  Mat j(n, n);
  const auto res = newton_shoot(ham, p1, p2, seed, opts, &j);
  if (!res) {
    std::ostringstream os;
    os << "shooting did not reach the end point within " << opts.max_iter << " iterations";
    throw NoConnection(os.str());
  }
  // A singular terminal Jacobian means neighbouring momenta also connect (a
  // conjugate point). Reference: the short-time Jacobian Δt·H_pp at the start.
  const Mat ref = (p2.t - p1.t) * ham.momentum_hessian({p1.q, res->p1, p1.t});
  const double scale = std::abs(ref.determinant());
  if (std::abs(j.determinant()) < 1e-8 * scale) {
    throw AmbiguousConnection("end point is conjugate to the start: the connection is not locally unique");
  }
  if (opts.probe_ambiguity) {
    const double radius = std::max(1.0, res->p1.norm());
    ShootingOptions probe = opts;
    probe.probe_ambiguity = false;
    for (int i = 0; i < n; ++i) {
      for (double offset : {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0}) {
        Vec s = res->p1;
        s(i) += offset * radius;
        const auto other = newton_shoot(ham, p1, p2, s, probe, nullptr);
        if (other && (other->p1 - res->p1).norm() > 1e-6 * (1.0 + res->p1.norm())) {
          std::ostringstream os;
          os << "initial momenta " << res->p1.transpose() << " and " << other->p1.transpose()
             << " both connect the points";
          throw AmbiguousConnection(os.str());
        }
      }
    }
  }
  return *res;
}

CharGradients char_gradients(const HamiltonianSystem& ham, const SpacetimePoint& p1, const SpacetimePoint& p2,
                             double h, const ShootingOptions& opts) {
  const int n = ham.dim();
  CharGradients g;
  g.base = two_point_characteristic(ham, p1, p2, std::nullopt, opts);
  const Vec seed = g.base.p1;
  auto s = [&](const SpacetimePoint& a, const SpacetimePoint& b) {
    return two_point_characteristic(ham, a, b, seed, opts).value;
  };
  auto central = [&](auto&& shift, double x) {
    const double d = h * (1.0 + std::abs(x));
    return (shift(d) - shift(-d)) / (2.0 * d);
  };
  g.s_q1 = Vec(n);
  g.s_q2 = Vec(n);
  for (int i = 0; i < n; ++i) {
    g.s_q1(i) = central(
        [&](double d) {
          SpacetimePoint a = p1;
          a.q(i) += d;
          return s(a, p2);
        },
        p1.q(i));
    g.s_q2(i) = central(
        [&](double d) {
          SpacetimePoint b = p2;
          b.q(i) += d;
          return s(p1, b);
        },
        p2.q(i));
  }
  g.s_t1 = central([&](double d) { return s({p1.q, p1.t + d}, p2); }, p1.t);
  g.s_t2 = central([&](double d) { return s(p1, {p2.q, p2.t + d}); }, p2.t);
  return g;
}

Vec CharacteristicFunction::grad_q1(const SpacetimePoint& p1, const SpacetimePoint& p2) const {
  return gradient_with_step(
      [&](const Vec& q) { return value({q, p1.t}, p2); }, p1.q, [this](double x) { return step(x); });
}

Vec CharacteristicFunction::grad_q2(const SpacetimePoint& p1, const SpacetimePoint& p2) const {
  return gradient_with_step(
      [&](const Vec& q) { return value(p1, {q, p2.t}); }, p2.q, [this](double x) { return step(x); });
}

double ShootingCharacteristic::value(const SpacetimePoint& p1, const SpacetimePoint& p2) const {
  return two_point_characteristic(ham_, p1, p2, std::nullopt, opts_).value;
}

double free_particle_action(const SpacetimePoint& p1, const SpacetimePoint& p2, double mass) {
  return 0.5 * mass * (p2.q - p1.q).squaredNorm() / (p2.t - p1.t);
}

double harmonic_action(const SpacetimePoint& p1, const SpacetimePoint& p2, double omega, double mass) {
  const double wt = omega * (p2.t - p1.t);
  return mass * omega * ((p1.q.squaredNorm() + p2.q.squaredNorm()) * std::cos(wt) - 2.0 * p1.q.dot(p2.q)) /
         (2.0 * std::sin(wt));
}

RecoveredState recover_trajectory(const CharacteristicFunction& s, const Vec& q1, const Vec& p1, double t1, double t2,
                                  const std::optional<Vec>& seed_q2) {
  const int n = s.dim();
  const SpacetimePoint a{q1, t1};
  Vec q2 = seed_q2 ? *seed_q2 : Vec(q1 + (t2 - t1) * p1);
  auto residual = [&](const Vec& x) -> Vec { return s.grad_q1(a, {x, t2}) + p1; };
  RecoveredState out;
  Vec r;
  try {
    r = residual(q2);
    for (int it = 0; it < 40; ++it) {
      out.iterations = it;
      if (r.norm() <= 1e-10 * (1.0 + p1.norm())) break;
      // The residual is itself a difference quotient, so its own Jacobian
      // needs a coarser step than the default.
      const Mat j = jacobian_with_step(residual, q2, n, [](double x) { return 1e-3 * (1.0 + std::abs(x)); });
      const Vec dq = j.fullPivLu().solve(-r);
      if (!dq.allFinite()) throw RecoveryFailure("∂²S/∂q₁∂q₂ is singular");
      // Below this the residual is difference noise; backtracking would only burn shots.
      if (dq.norm() <= 1e-9 * (1.0 + q2.norm())) break;
      double lambda = 1.0;
      Vec trial = q2 + dq;
      Vec rt = residual(trial);
      for (int ls = 0; ls < 20 && !(rt.norm() < r.norm()); ++ls) {
        lambda *= 0.5;
        trial = q2 + lambda * dq;
        rt = residual(trial);
      }
      if (!(rt.norm() < r.norm())) break;
      q2 = trial;
      r = rt;
      if ((lambda * dq).norm() <= 1e-13 * (1.0 + q2.norm())) break;
    }
  } catch (const RecoveryFailure&) {
    throw;
  } catch (const Error& e) {
    throw RecoveryFailure(std::string("characteristic function unavailable: ") + e.what());
  }
  if (!(r.norm() <= 1e-6 * (1.0 + p1.norm()))) {
    std::ostringstream os;
    os << "∂S/∂q₁ = −p₁ not solved (residual " << r.norm() << ")";
    throw RecoveryFailure(os.str());
  }
  out.q2 = q2;
  out.p2 = s.grad_q2(a, {q2, t2});
  return out;
}

}  // namespace hjkit
