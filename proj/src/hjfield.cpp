#include "hjkit/hjfield.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace hjkit {

HypersurfaceFamily::HypersurfaceFamily(int dim, ValueFn s, Domain domain)
    : dim_(dim), s_(std::move(s)), domain_(std::move(domain)) {
  if (dim_ <= 0 || dim_ > kMaxDim) throw std::invalid_argument("HypersurfaceFamily: bad dimension");
  if (domain_.dim() != dim_) throw std::invalid_argument("HypersurfaceFamily: domain dimension mismatch");
}

HypersurfaceFamily& HypersurfaceFamily::with_gradient(GradFn grad_q, ValueFn d_t) {
  grad_q_ = std::move(grad_q);
  d_t_ = std::move(d_t);
  return *this;
}

Vec HypersurfaceFamily::grad_q(const Vec& q, double t) const {
  if (grad_q_) return grad_q_(q, t);
  return gradient([&](const Vec& x) { return s_(x, t); }, q);
}

double HypersurfaceFamily::d_t(const Vec& q, double t) const {
  if (d_t_) return d_t_(q, t);
  return derivative([&](double s) { return s_(q, s); }, t);
}

namespace {

void require_inside(const Domain& d, const Vec& q, double t) {
  if (!d.contains(q, t)) {
    std::ostringstream os;
    os << "point (t=" << t << ") outside the domain";
    throw DomainEscape(os.str());
  }
}

}  // namespace

std::optional<SpacetimePoint> project_to_level(const HypersurfaceFamily& fam, const SpacetimePoint& x, double sigma,
                                               double tol) {
  SpacetimePoint y = x;
  for (int it = 0; it < 60; ++it) {
    if (!fam.domain().contains(y.q, y.t)) return std::nullopt;
    const double r = fam.value(y.q, y.t) - sigma;
    if (std::abs(r) <= tol * (1.0 + std::abs(sigma))) return y;
    const Vec g = fam.grad_q(y.q, y.t);
    const double gt = fam.d_t(y.q, y.t);
    const double gg = g.squaredNorm() + gt * gt;
    if (!(gg > 0.0) || !std::isfinite(gg)) return std::nullopt;
    y.q -= (r / gg) * g;
    y.t -= (r / gg) * gt;
  }
  return std::nullopt;
}

double hj_residual(const HamiltonianSystem& ham, const HypersurfaceFamily& fam, const Vec& q, double t) {
  require_inside(fam.domain(), q, t);
  return fam.d_t(q, t) + ham.value({q, fam.grad_q(q, t), t});
}

Vec geodesic_gradient(const LagrangianSystem& lag, const HypersurfaceFamily& fam, const Vec& q, double t) {
  require_inside(fam.domain(), q, t);
  return invert_momentum(lag, q, fam.grad_q(q, t), t, Vec::Zero(q.size()));
}

double geodesic_scale(const LagrangianSystem& lag, const HypersurfaceFamily& fam, const Vec& q, double t) {
  require_inside(fam.domain(), q, t);
  const Vec g = fam.grad_q(q, t);
  const double st = fam.d_t(q, t);
  Vec seed = Vec::Zero(q.size());
  auto f = [&](double phi) {
    const Vec v = invert_momentum(lag, q, phi * g, t, seed);
    seed = v;
    return lag.value({q, v, t}) - phi * (g.dot(v) + st);
  };
  double phi = 1.0;
  double r = f(phi);
  for (int it = 0; it < 60; ++it) {
    const double h = 1e-6 * (1.0 + std::abs(phi));
    const double slope = (f(phi + h) - f(phi - h)) / (2.0 * h);
    if (!(std::abs(slope) > 0.0) || !std::isfinite(slope)) break;
    const double step = r / slope;
    phi -= step;
    r = f(phi);
    if (std::abs(step) <= 1e-14 * (1.0 + std::abs(phi))) return phi;
  }
  if (std::abs(r) <= 1e-12) return phi;
  throw InversionFailure("no scale factor φ with L = φΔ", std::abs(r));
}

bool EquidistanceReport::all_reached() const {
  return std::none_of(errors.begin(), errors.end(), [](const auto& e) { return e.has_value(); });
}

EquidistanceReport equidistance_check(const LagrangianSystem& lag, const HypersurfaceFamily& fam, double sigma1,
                                      double sigma2, const std::vector<SpacetimePoint>& seeds,
                                      const EquidistanceOptions& opts) {
  EquidistanceReport report;
  report.target = sigma2 - sigma1;
  report.actions.assign(seeds.size(), kNaN);
  report.endpoints.resize(seeds.size());
  report.errors.resize(seeds.size());
  const int n = fam.dim();

  parallel_for(seeds.size(), [&](std::size_t i) {
    try {
      const auto start = project_to_level(fam, seeds[i], sigma1);
      if (!start) throw CrossingNotFound("seed could not be projected onto the first surface");
      if (sigma1 == sigma2) {
        report.actions[i] = 0.0;
        report.endpoints[i] = *start;
        return;
      }
      Vec warm = Vec::Zero(n);
      const Rhs rhs = [&](double t, const StateVec& y) -> StateVec {
        const Vec q = y.head(n);
        const Vec v = invert_momentum(lag, q, fam.grad_q(q, t), t, warm);
        warm = v;
        StateVec dy(n + 1);
        dy.head(n) = v;
        dy(n) = lag.value({q, v, t});
        return dy;
      };
      const Vec v0 = geodesic_gradient(lag, fam, start->q, start->t);
      const double delta0 = fam.grad_q(start->q, start->t).dot(v0) + fam.d_t(start->q, start->t);
      if (!(std::abs(delta0) > 0.0)) throw CrossingNotFound("congruence tangent to the first surface");
      const double dir = ((sigma2 - sigma1) * delta0 > 0.0) ? 1.0 : -1.0;
      const Interval tr = fam.domain().t_range();
      double span = opts.horizon;
      span = std::min(span, dir > 0 ? tr.hi - start->t : start->t - tr.lo);
      const std::size_t steps = step_count(span, opts.step);
      const double h = dir * span / static_cast<double>(std::max<std::size_t>(steps, 1));
      auto g = [&](double t, const StateVec& y) { return fam.value(y.head(n), t) - sigma2; };

      StateVec y(n + 1);
      y.head(n) = start->q;
      y(n) = 0.0;
      double t = start->t;
      double g_prev = g(t, y);
      for (std::size_t k = 0; k < steps; ++k) {
        const StateVec y_next = rk4_step(rhs, t, y, h);
        const double t_next = start->t + h * static_cast<double>(k + 1);
        if (!y_next.allFinite() || !fam.domain().contains(y_next.head(n), t_next)) {
          throw DomainEscape("congruence curve left the domain before the second surface");
        }
        const double g_next = g(t_next, y_next);
        if (g_next == 0.0 || (g_next > 0) != (g_prev > 0)) {
          const EventHit hit = refine_event(rhs, t, y, h, g, opts.t_tol);
          report.actions[i] = hit.y(n);
          report.endpoints[i] = {hit.y.head(n), hit.t};
          return;
        }
        y = y_next;
        t = t_next;
        g_prev = g_next;
      }
      throw CrossingNotFound("second surface not reached within the horizon");
    } catch (const Error& e) {
      report.errors[i] = std::string(e.what());
    }
  });

  double worst = 0.0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    worst = report.errors[i] ? kInf : std::max(worst, std::abs(report.actions[i] - report.target));
  }
  report.max_abs_deviation = worst;
  return report;
}

double transversality_defect(const HamiltonianSystem& ham, const HypersurfaceFamily& fam, const SpacetimePoint& at,
                             const Vec& dq, double dt, double tol) {
  require_inside(fam.domain(), at.q, at.t);
  const Vec p = fam.grad_q(at.q, at.t);
  const double st = fam.d_t(at.q, at.t);
  const double tangency = p.dot(dq) + st * dt;
  const double scale = 1.0 + p.norm() * dq.norm() + std::abs(st * dt);
  if (std::abs(tangency) > tol * scale) {
    std::ostringstream os;
    os << "displacement leaves the level set (∇S·δq + S_t δt = " << tangency << ")";
    throw NotTangent(os.str());
  }
  return p.dot(dq) - ham.value({at.q, p, at.t}) * dt;
}

Vec family_canonical_residual(const LagrangianSystem& lag, const HamiltonianSystem& ham,
                              const HypersurfaceFamily& fam, const Vec& q, double t, double h) {
  const Rhs rhs = [&](double s, const StateVec& y) -> StateVec { return geodesic_gradient(lag, fam, y, s); };
  const StateVec y0 = q;
  const Vec qp = rk4_step(rhs, t, y0, h);
  const Vec qm = rk4_step(rhs, t, y0, -h);
  const Vec pdot = (fam.grad_q(qp, t + h) - fam.grad_q(qm, t - h)) / (2.0 * h);
  return pdot + ham.d_q({q, fam.grad_q(q, t), t});
}

FieldCongruence::FieldCongruence(int dim, MapFn map, Domain u_domain)
    : dim_(dim), map_(std::move(map)), u_domain_(std::move(u_domain)) {
  if (dim_ <= 0 || dim_ > kMaxDim) throw std::invalid_argument("FieldCongruence: bad dimension");
  if (u_domain_.dim() != dim_) throw std::invalid_argument("FieldCongruence: domain dimension mismatch");
}

Mat FieldCongruence::position_jacobian(const Vec& u, double t) const {
  return jacobian([&](const Vec& x) -> Vec { return map_(x, t).q; }, u, dim_);
}

std::optional<Vec> FieldCongruence::locate(const Vec& q, double t, const Vec& seed) const {
  Vec u = seed;
  for (int it = 0; it < 50; ++it) {
    const Vec r = map_(u, t).q - q;
    if (r.norm() <= 1e-13 * (1.0 + q.norm())) return u;
    const Vec du = position_jacobian(u, t).fullPivLu().solve(-r);
    if (!du.allFinite()) return std::nullopt;
    u += du;
    if (du.norm() <= 1e-15 * (1.0 + u.norm())) return u;
  }
  const Vec r = map_(u, t).q - q;
  if (r.norm() <= 1e-10 * (1.0 + q.norm())) return u;
  return std::nullopt;
}

Mat lagrange_brackets(const FieldCongruence& field, const Vec& u, double t) {
  const int n = field.dim();
  const Mat jq = field.position_jacobian(u, t);
  const Mat jp = jacobian([&](const Vec& x) -> Vec { return field.at(x, t).p; }, u, n);
  const Mat b = jq.transpose() * jp - jp.transpose() * jq;
  return 0.5 * (b - b.transpose());
}

Vec canonical_residual(const HamiltonianSystem& ham, const FieldCongruence& field, const Vec& u, double t) {
  const int n = field.dim();
  const double h = fd_step(t);
  const PhasePoint a = field.at(u, t + h);
  const PhasePoint b = field.at(u, t - h);
  PhasePoint x = field.at(u, t);
  x.t = t;
  Vec out(2 * n);
  out.head(n) = (a.q - b.q) / (2.0 * h) - ham.d_p(x);
  out.tail(n) = (a.p - b.p) / (2.0 * h) + ham.d_q(x);
  return out;
}

// ---------------------------------------------------------------------------
// Hilbert integral
// ---------------------------------------------------------------------------

Vec SpacetimePath::q_prime(double l) const {
  if (dq) return dq(l);
  return derivative5([this](double s) -> Vec { return q(s); }, l, 1e-3 * (l1 - l0));
}

double SpacetimePath::t_prime(double l) const {
  if (dt) return dt(l);
  return derivative5([this](double s) { return t(s); }, l, 1e-3 * (l1 - l0));
}

SpacetimePath SpacetimePath::segment(const SpacetimePoint& a, const SpacetimePoint& b) {
  SpacetimePath p;
  const Vec dq = b.q - a.q;
  const double dt = b.t - a.t;
  const Vec qa = a.q;
  const double ta = a.t;
  p.q = [qa, dq](double l) -> Vec { return qa + l * dq; };
  p.t = [ta, dt](double l) { return ta + l * dt; };
  p.dq = [dq](double) -> Vec { return dq; };
  p.dt = [dt](double) { return dt; };
  return p;
}

SpacetimePath SpacetimePath::graph(const TimeCurve& curve) {
  SpacetimePath p;
  p.q = curve.q;
  p.t = [](double l) { return l; };
  p.dq = [curve](double l) -> Vec { return curve.velocity(l); };
  p.dt = [](double) { return 1.0; };
  p.l0 = curve.t0;
  p.l1 = curve.t1;
  return p;
}

double hilbert_integral(const HamiltonianSystem& ham, const HypersurfaceFamily& fam, const SpacetimePath& path,
                        std::size_t panels) {
  auto integrand = [&](double l) {
    const Vec q = path.q(l);
    const double t = path.t(l);
    require_inside(fam.domain(), q, t);
    const Vec p = fam.grad_q(q, t);
    return p.dot(path.q_prime(l)) - ham.value({q, p, t}) * path.t_prime(l);
  };
  return simpson(integrand, path.l0, path.l1, panels);
}

double hilbert_integral(const HamiltonianSystem& ham, const FieldCongruence& field, const SpacetimePath& path,
                        std::size_t panels) {
  Vec warm = path.q(path.l0);
  auto integrand = [&](double l) {
    const Vec q = path.q(l);
    const double t = path.t(l);
    auto u = field.locate(q, t, warm);
    if (!u) u = field.locate(q, t, q);
    if (!u) throw DomainEscape("path point not covered by the field");
    warm = *u;
    const Vec p = field.at(*u, t).p;
    return p.dot(path.q_prime(l)) - ham.value({q, p, t}) * path.t_prime(l);
  };
  return simpson(integrand, path.l0, path.l1, panels);
}

HypersurfaceFamily reconstruct_family(const HamiltonianSystem& ham, const FieldCongruence& field,
                                      const SpacetimePoint& base, const Domain& domain, std::size_t panels) {
  auto momentum = [field](const Vec& q, double t) -> Vec {
    auto u = field.locate(q, t, q);
    if (!u) throw DomainEscape("point not covered by the field");
    return field.at(*u, t).p;
  };
  HypersurfaceFamily fam(
      field.dim(),
      [ham, field, base, panels](const Vec& q, double t) {
        return hilbert_integral(ham, field, SpacetimePath::segment(base, {q, t}), panels);
      },
      domain);
  fam.with_gradient(momentum, [ham, momentum](const Vec& q, double t) { return -ham.value({q, momentum(q, t), t}); });
  return fam;
}

// ---------------------------------------------------------------------------
// Normalisation
// ---------------------------------------------------------------------------

namespace {

// ψ with ψ′ piecewise linear through (σ_k, φ_k), constant beyond the ends,
// and ψ(σ_0) = σ_0.
struct Reparametrization {
  std::vector<double> sigma;
  std::vector<double> phi;
  std::vector<double> psi;

  void build() {
    psi.assign(sigma.size(), sigma.front());
    for (std::size_t k = 1; k < sigma.size(); ++k) {
      psi[k] = psi[k - 1] + 0.5 * (phi[k - 1] + phi[k]) * (sigma[k] - sigma[k - 1]);
    }
  }

  std::size_t segment(double s) const {
    const auto it = std::upper_bound(sigma.begin(), sigma.end(), s);
    if (it == sigma.begin()) return 0;
    return std::min<std::size_t>(static_cast<std::size_t>(it - sigma.begin()) - 1, sigma.size() - 1);
  }

  double value(double s) const {
    if (s <= sigma.front()) return psi.front() + phi.front() * (s - sigma.front());
    if (s >= sigma.back()) return psi.back() + phi.back() * (s - sigma.back());
    const std::size_t k = segment(s);
    const double w = sigma[k + 1] - sigma[k];
    const double d = s - sigma[k];
    return psi[k] + phi[k] * d + 0.5 * (phi[k + 1] - phi[k]) / w * d * d;
  }

  double slope(double s) const {
    if (s <= sigma.front()) return phi.front();
    if (s >= sigma.back()) return phi.back();
    const std::size_t k = segment(s);
    const double w = sigma[k + 1] - sigma[k];
    return phi[k] + (phi[k + 1] - phi[k]) * (s - sigma[k]) / w;
  }
};

}  // namespace

HypersurfaceFamily normalize_family(const LagrangianSystem& lag, const HypersurfaceFamily& fam,
                                    const std::vector<SpacetimePoint>& lattice, const std::vector<double>& levels,
                                    const NormalizeOptions& opts) {
  if (levels.empty()) throw std::invalid_argument("normalize_family: no levels");
  std::vector<double> sorted = levels;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  auto rep = std::make_shared<Reparametrization>();
  for (double sigma : sorted) {
    std::vector<double> phis;
    for (const SpacetimePoint& x : lattice) {
      const auto on = project_to_level(fam, x, sigma);
      if (!on) continue;
      phis.push_back(geodesic_scale(lag, fam, on->q, on->t));
    }
    if (phis.empty()) {
      std::ostringstream os;
      os << "level " << sigma << " has no samples";
      throw NotEquidistantFamily(os.str());
    }
    const auto [lo, hi] = std::minmax_element(phis.begin(), phis.end());
    double mean = 0.0;
    for (double v : phis) mean += v;
    mean /= static_cast<double>(phis.size());
    if (*hi - *lo > opts.tol * std::max(1.0, std::abs(mean))) {
      std::ostringstream os;
      os << "L/Δ ranges over [" << *lo << ", " << *hi << "] on level " << sigma;
      throw NotEquidistantFamily(os.str());
    }
    rep->sigma.push_back(sigma);
    rep->phi.push_back(mean);
  }
  rep->build();

  HypersurfaceFamily out(
      fam.dim(), [fam, rep](const Vec& q, double t) { return rep->value(fam.value(q, t)); }, fam.domain());
  out.with_gradient(
      [fam, rep](const Vec& q, double t) -> Vec { return rep->slope(fam.value(q, t)) * fam.grad_q(q, t); },
      [fam, rep](const Vec& q, double t) { return rep->slope(fam.value(q, t)) * fam.d_t(q, t); });
  return out;
}

}  // namespace hjkit
