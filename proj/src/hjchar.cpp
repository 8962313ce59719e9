#include "hjkit/hjchar.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace hjkit {

PdeProblem::PdeProblem(int dim, ValueFn phi, Domain domain)
    : dim_(dim), phi_(std::move(phi)), domain_(std::move(domain)) {
  if (dim_ < 1 || dim_ > 3) throw std::invalid_argument("PdeProblem: dimension must be 1..3");
  if (domain_.dim() != dim_) throw std::invalid_argument("PdeProblem: domain dimension mismatch");
}

PdeProblem& PdeProblem::with_gradients(GradFn d_q, GradFn d_p) {
  d_q_ = std::move(d_q);
  d_p_ = std::move(d_p);
  return *this;
}

Vec PdeProblem::d_q(const Vec& q, const Vec& p) const {
  if (d_q_) return d_q_(q, p);
  return gradient([&](const Vec& x) { return phi_(x, p); }, q);
}

Vec PdeProblem::d_p(const Vec& q, const Vec& p) const {
  if (d_p_) return d_p_(q, p);
  return gradient([&](const Vec& x) { return phi_(q, x); }, p);
}

PdeProblem PdeProblem::from_hamiltonian(const HamiltonianSystem& ham) {
  const int m = ham.dim();
  const Domain& d = ham.domain();
  Vec lo(m + 1);
  Vec hi(m + 1);
  lo << d.lower(), d.t_range().lo;
  hi << d.upper(), d.t_range().hi;
  auto split = [m](const Vec& q, const Vec& p) { return PhasePoint{q.head(m), p.head(m), q(m)}; };
  PdeProblem prob(
      m + 1, [ham, split, m](const Vec& q, const Vec& p) { return ham.value(split(q, p)) + p(m); },
      Domain(lo, hi, {-kInf, kInf}));
  prob.with_gradients(
      [ham, split, m](const Vec& q, const Vec& p) -> Vec {
        const PhasePoint x = split(q, p);
        Vec g(m + 1);
        g << ham.d_q(x), ham.d_t(x);
        return g;
      },
      [ham, split, m](const Vec& q, const Vec& p) -> Vec {
        Vec g(m + 1);
        g << ham.d_p(split(q, p)), 1.0;
        return g;
      });
  return prob;
}

Mat InitialSurface::tangent(const Vec& u, int n) const {
  if (u.size() == 0) return Mat(n, 0);
  return jacobian([this](const Vec& x) -> Vec { return a(x); }, u, n);
}

Vec solve_strip_conditions(const PdeProblem& prob, const InitialSurface& surf, const Vec& u, const Vec& seed) {
  const int n = prob.dim();
  const int m = surf.dim_u();
  if (m != n - 1) throw std::invalid_argument("solve_strip_conditions: surface must have dimension n-1");
  if (seed.size() != n) throw std::invalid_argument("solve_strip_conditions: seed has wrong size");
  const Vec x = surf.a(u);
  const Mat tan = surf.tangent(u, n);
  Vec cu(m);
  if (m > 0) cu = gradient([&](const Vec& v) { return surf.c(v); }, u);

  auto residual = [&](const Vec& b) -> Vec {
    Vec r(n);
    r(0) = prob.value(x, b);
    if (m > 0) r.tail(m) = tan.transpose() * b - cu;
    return r;
  };
  auto jac = [&](const Vec& b) -> Mat {
    Mat j(n, n);
    j.row(0) = prob.d_p(x, b).transpose();
    if (m > 0) j.bottomRows(m) = tan.transpose();
    return j;
  };

  Vec b = seed;
  Vec r = residual(b);
  double rn = r.norm();
  bool converged = false;
  for (int it = 0; it < 80; ++it) {
    if (!std::isfinite(rn)) break;
    const double tol = 1e-13 * (1.0 + b.norm() + cu.norm());
    const Vec db = jac(b).fullPivLu().solve(-r);
    if (!db.allFinite()) break;
    Vec trial = b + db;
    Vec rt = residual(trial);
    double lambda = 1.0;
    for (int ls = 0; ls < 40 && !(rt.norm() < rn) && rn > tol; ++ls) {
      lambda *= 0.5;
      trial = b + lambda * db;
      rt = residual(trial);
    }
    if (rn <= tol) {
      // Polishing step.
      if (rt.norm() <= rn) b = trial;
      converged = true;
      break;
    }
    if (!(rt.norm() < rn)) break;
    b = trial;
    r = rt;
    rn = rt.norm();
    if ((lambda * db).norm() <= 1e-16 * (1.0 + b.norm()) && rn <= 1e-10) {
      converged = true;
      break;
    }
  }
  if (!converged && !(rn <= 1e-10 * (1.0 + b.norm()))) {
    std::ostringstream os;
    os << "strip conditions not solved (residual " << rn << ")";
    throw StripFailure(os.str());
  }
  return b;
}

namespace {

Vec lattice_point(const Domain& d, const std::vector<int>& counts, std::size_t index) {
  const int m = d.dim();
  Vec u(m);
  for (int a = 0; a < m; ++a) {
    const int c = counts[static_cast<std::size_t>(a)];
    const int k = static_cast<int>(index % static_cast<std::size_t>(c));
    index /= static_cast<std::size_t>(c);
    const double lo = d.lower()(a);
    const double hi = d.upper()(a);
    u(a) = c == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(c - 1);
  }
  return u;
}

std::size_t lattice_size(const std::vector<int>& counts) {
  std::size_t total = 1;
  for (int c : counts) total *= static_cast<std::size_t>(c);
  return total;
}

Rhs characteristic_rhs(const PdeProblem& prob) {
  const int n = prob.dim();
  return [&prob, n](double, const StateVec& y) -> StateVec {
    const Vec q = y.head(n);
    const Vec p = y.segment(n, n);
    const Vec fp = prob.d_p(q, p);
    StateVec dy(2 * n + 1);
    dy.head(n) = fp;
    dy.segment(n, n) = -prob.d_q(q, p);
    dy(2 * n) = p.dot(fp);
    return dy;
  };
}

// |det| of (Φ_p, ∂q/∂u_1, …) relative to |Φ_p| and the u-column lengths on
// the data surface, i.e. the area compression of the congruence since s = 0.
double normalized_det(const Mat& cols, const Vec& u_ref) {
  double scale = cols.col(0).norm();
  for (Eigen::Index j = 1; j < cols.cols(); ++j) scale *= u_ref(j - 1);
  if (!(scale > 0.0)) return 0.0;
  return std::abs(cols.determinant()) / scale;
}

}  // namespace

StripLattice solve_strips(const PdeProblem& prob, const InitialSurface& surf, const std::vector<int>& counts,
                          const Vec& seed) {
  const int m = surf.dim_u();
  if (static_cast<int>(counts.size()) != m) throw std::invalid_argument("solve_strips: counts must match dim u");
  for (int c : counts) {
    if (c < 1) throw std::invalid_argument("solve_strips: counts must be positive");
  }
  for (int a = 0; a < m; ++a) {
    if (!std::isfinite(surf.u_domain.lower()(a)) || !std::isfinite(surf.u_domain.upper()(a))) {
      throw std::invalid_argument("solve_strips: u domain must be bounded");
    }
  }
  StripLattice out;
  out.counts = counts;
  const std::size_t total = lattice_size(counts);
  const std::size_t row = counts.empty() ? 1 : static_cast<std::size_t>(counts[0]);
  for (std::size_t j = 0; j < total; ++j) {
    const Vec u = lattice_point(surf.u_domain, counts, j);
    Vec s = seed;
    if (j % row != 0) {
      s = out.b[j - 1];
    } else if (j >= row) {
      s = out.b[j - row];
    }
    out.u.push_back(u);
    out.b.push_back(solve_strip_conditions(prob, surf, u, s));
  }
  return out;
}

double CharacteristicSheet::max_phi_residual() const {
  double worst = 0.0;
  for (const Strip& st : strips_) {
    for (std::size_t k = 0; k < s_.size(); ++k) {
      if (st.valid[k]) worst = std::max(worst, std::abs(prob_.value(st.q[k], st.p[k])));
    }
  }
  return worst;
}

std::size_t CharacteristicSheet::flagged_cells() const {
  std::size_t count = 0;
  for (const Strip& st : strips_) {
    for (std::size_t k = 0; k < s_.size(); ++k) count += st.valid[k] && !st.jacobian_ok[k];
  }
  return count;
}

Vec CharacteristicSheet::strip_seed(const Vec& u) const {
  const Strip* best = &strips_.front();
  double dist = kInf;
  for (const Strip& st : strips_) {
    const double d = (st.u - u).squaredNorm();
    if (d < dist) {
      dist = d;
      best = &st;
    }
  }
  return best->b;
}

StateVec CharacteristicSheet::integrate_to(double s, const Vec& u) const {
  return integrate_to(s, u, solve_strip_conditions(prob_, surf_, u, strip_seed(u)));
}

StateVec CharacteristicSheet::integrate_to(double s, const Vec& u, const Vec& b) const {
  const int n = prob_.dim();
  StateVec y(2 * n + 1);
  y.head(n) = surf_.a(u);
  y.segment(n, n) = b;
  y(2 * n) = surf_.c(u);
  const std::size_t steps = step_count(s, step_);
  if (steps == 0) return y;
  const double h = s / static_cast<double>(steps);
  const Rhs rhs = characteristic_rhs(prob_);
  for (std::size_t k = 0; k < steps; ++k) y = rk4_step(rhs, h * static_cast<double>(k), y, h);
  return y;
}

CharacteristicSheet trace_characteristics(const PdeProblem& prob, const InitialSurface& surf,
                                          const StripLattice& strips, Interval s_range, double step,
                                          const SheetOptions& opts) {
  if (!(s_range.lo <= 0.0 && s_range.hi >= 0.0)) {
    throw std::invalid_argument("trace_characteristics: s range must contain 0");
  }
  if (!(step > 0.0)) throw std::invalid_argument("trace_characteristics: step must be positive");
  if (strips.u.empty()) throw std::invalid_argument("trace_characteristics: no strips");
  const int n = prob.dim();

  CharacteristicSheet sheet(prob, surf);
  sheet.counts_ = strips.counts;
  sheet.step_ = step;
  const std::size_t nb = step_count(-s_range.lo, step);
  const std::size_t nf = step_count(s_range.hi, step);
  const double hb = nb ? s_range.lo / static_cast<double>(nb) : 0.0;
  const double hf = nf ? s_range.hi / static_cast<double>(nf) : 0.0;
  for (std::size_t k = nb; k > 0; --k) sheet.s_.push_back(hb * static_cast<double>(k));
  sheet.s_.push_back(0.0);
  for (std::size_t k = 1; k <= nf; ++k) sheet.s_.push_back(hf * static_cast<double>(k));
  if (nb) sheet.s_.front() = s_range.lo;
  if (nf) sheet.s_.back() = s_range.hi;
  sheet.s_zero_ = nb;
  const std::size_t ns = sheet.s_.size();

  sheet.strips_.resize(strips.u.size());
  const PdeProblem& p_ref = sheet.prob_;
  const Rhs rhs = characteristic_rhs(p_ref);
  parallel_for(strips.u.size(), [&](std::size_t j) {
    CharacteristicSheet::Strip& st = sheet.strips_[j];
    st.u = strips.u[j];
    st.b = strips.b[j];
    st.q.assign(ns, Vec::Constant(n, kNaN));
    st.p.assign(ns, Vec::Constant(n, kNaN));
    st.z.assign(ns, kNaN);
    st.valid.assign(ns, 0);
    st.jacobian_ok.assign(ns, 0);
    StateVec y0(2 * n + 1);
    y0.head(n) = surf.a(st.u);
    y0.segment(n, n) = st.b;
    y0(2 * n) = surf.c(st.u);
    auto store = [&](std::size_t k, const StateVec& y) {
      st.q[k] = y.head(n);
      st.p[k] = y.segment(n, n);
      st.z[k] = y(2 * n);
      st.valid[k] = 1;
    };
    auto inside = [&](const StateVec& y) { return y.allFinite() && prob.domain().contains_q(y.head(n)); };
    if (!inside(y0)) return;
    store(nb, y0);
    StateVec y = y0;
    for (std::size_t k = 0; k < nf; ++k) {
      y = rk4_step(rhs, hf * static_cast<double>(k), y, hf);
      if (!inside(y)) break;
      store(nb + k + 1, y);
    }
    y = y0;
    for (std::size_t k = 0; k < nb; ++k) {
      y = rk4_step(rhs, hb * static_cast<double>(k), y, hb);
      if (!inside(y)) break;
      store(nb - k - 1, y);
    }
  });

  // Jacobian flags from lattice neighbours in u.
  const int m = surf.dim_u();
  std::vector<std::size_t> stride(static_cast<std::size_t>(m), 1);
  for (int a = 1; a < m; ++a) stride[a] = stride[a - 1] * static_cast<std::size_t>(strips.counts[a - 1]);
  for (std::size_t j = 0; j < sheet.strips_.size(); ++j) {
    CharacteristicSheet::Strip& st = sheet.strips_[j];
    for (std::size_t k = 0; k < ns; ++k) {
      if (!st.valid[k]) continue;
      Mat cols(n, n);
      Vec ref(m);
      cols.col(0) = prob.d_p(st.q[k], st.p[k]);
      bool ok = true;
      for (int a = 0; a < m && ok; ++a) {
        const std::size_t c = static_cast<std::size_t>(strips.counts[a]);
        const std::size_t idx = (j / stride[a]) % c;
        const CharacteristicSheet::Strip* lo = idx > 0 ? &sheet.strips_[j - stride[a]] : &st;
        const CharacteristicSheet::Strip* hi = idx + 1 < c ? &sheet.strips_[j + stride[a]] : &st;
        if (lo == hi || !lo->valid[k] || !hi->valid[k]) {
          ok = false;
          break;
        }
        cols.col(a + 1) = hi->q[k] - lo->q[k];
        ref(a) = (hi->q[nb] - lo->q[nb]).norm();
        ok = lo->valid[nb] && hi->valid[nb];
      }
      st.jacobian_ok[k] = ok && normalized_det(cols, ref) >= opts.jac_tol;
    }
  }
  return sheet;
}

// ---------------------------------------------------------------------------
// Reading the solution off the sheet
// ---------------------------------------------------------------------------

namespace {

struct Located {
  double s = 0.0;
  Vec u;
  Vec b;
  StateVec y;
  double residual = kInf;
};

// q(s, u) − target and the strip momentum at u; throws StripFailure.
struct SheetMap {
  const CharacteristicSheet& sheet;
  const Vec& target;

  Located eval(double s, const Vec& u, const Vec& b_seed) const {
    Located out;
    out.s = s;
    out.u = u;
    out.b = solve_strip_conditions(sheet.problem(), sheet.surface(), u, b_seed);
    out.y = sheet.integrate_to(s, u, out.b);
    out.residual = (out.y.head(target.size()) - target).norm();
    return out;
  }

  Mat jacobian(const Located& at) const {
    const int n = sheet.problem().dim();
    const int m = n - 1;
    Mat j(n, n);
    j.col(0) = sheet.problem().d_p(at.y.head(n), at.y.segment(n, n));
    for (int a = 0; a < m; ++a) {
      const double h = fd_step(at.u(a));
      Vec up = at.u;
      Vec um = at.u;
      up(a) += h;
      um(a) -= h;
      const Located lp = eval(at.s, up, at.b);
      const Located lm = eval(at.s, um, at.b);
      j.col(a + 1) = (lp.y.head(n) - lm.y.head(n)) / (up(a) - um(a));
    }
    return j;
  }
};

struct SimplexContext {
  const SheetMap* map;
  Vec b_seed;
  int m;
};

double simplex_objective(const gsl_vector* w, void* params) {
  auto* ctx = static_cast<SimplexContext*>(params);
  Vec u(ctx->m);
  for (int a = 0; a < ctx->m; ++a) u(a) = gsl_vector_get(w, static_cast<std::size_t>(a) + 1);
  try {
    const Located l = ctx->map->eval(gsl_vector_get(w, 0), u, ctx->b_seed);
    return l.residual * l.residual;
  } catch (const Error&) {
    return GSL_POSINF;
  }
}

// Nelder-Mead on |q(s, u) − target|² as a fallback when Newton stalls.
Located simplex_search(const SheetMap& map, const Located& start, double ds, double du) {
  const int n = map.sheet.problem().dim();
  const int m = n - 1;
  SimplexContext ctx{&map, start.b, m};
  gsl_multimin_function fn{&simplex_objective, static_cast<std::size_t>(n), &ctx};
  gsl_vector* x = gsl_vector_alloc(static_cast<std::size_t>(n));
  gsl_vector* size = gsl_vector_alloc(static_cast<std::size_t>(n));
  gsl_vector_set(x, 0, start.s);
  gsl_vector_set(size, 0, ds);
  for (int a = 0; a < m; ++a) {
    gsl_vector_set(x, static_cast<std::size_t>(a) + 1, start.u(a));
    gsl_vector_set(size, static_cast<std::size_t>(a) + 1, du);
  }
  gsl_multimin_fminimizer* solver = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2,
                                                                  static_cast<std::size_t>(n));
  gsl_multimin_fminimizer_set(solver, &fn, x, size);
  for (int it = 0; it < 2000; ++it) {
    if (gsl_multimin_fminimizer_iterate(solver) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(solver), 1e-14) == GSL_SUCCESS) break;
  }
  Located out = start;
  const gsl_vector* best = gsl_multimin_fminimizer_x(solver);
  Vec u(m);
  for (int a = 0; a < m; ++a) u(a) = gsl_vector_get(best, static_cast<std::size_t>(a) + 1);
  try {
    out = map.eval(gsl_vector_get(best, 0), u, start.b);
  } catch (const Error&) {
  }
  gsl_multimin_fminimizer_free(solver);
  gsl_vector_free(size);
  gsl_vector_free(x);
  return out;
}

}  // namespace

SheetPoint evaluate_solution(const CharacteristicSheet& sheet, const Vec& q) {
  const PdeProblem& prob = sheet.problem();
  const int n = prob.dim();
  const int m = n - 1;
  if (q.size() != n) throw std::invalid_argument("evaluate_solution: wrong dimension");
  const auto& strips = sheet.strips();
  const auto& s = sheet.s_values();

  // Nearest lattice sample.
  std::size_t bj = 0;
  std::size_t bk = 0;
  double best = kInf;
  for (std::size_t j = 0; j < strips.size(); ++j) {
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (!strips[j].valid[k]) continue;
      const double d = (strips[j].q[k] - q).squaredNorm();
      if (d < best) {
        best = d;
        bj = j;
        bk = k;
      }
    }
  }
  if (!std::isfinite(best)) throw OutOfSheet("sheet has no valid samples");

  const auto& st = strips[bj];
  const Interval sr = sheet.s_range();
  const Domain& ud = sheet.surface().u_domain;
  const double tol = 1e-11 * (1.0 + q.norm());
  SheetMap map{sheet, q};

  Located cur;
  try {
    cur = map.eval(s[bk], st.u, st.b);
  } catch (const StripFailure&) {
    throw OutOfSheet("strip at the nearest sample cannot be solved");
  }
  bool newton_ok = false;
  for (int it = 0; it < 40; ++it) {
    if (cur.residual <= tol) {
      newton_ok = true;
      break;
    }
    Mat j;
    try {
      j = map.jacobian(cur);
    } catch (const StripFailure&) {
      break;
    }
    const Vec r = cur.y.head(n) - q;
    const Vec dw = j.fullPivLu().solve(-r);
    if (!dw.allFinite()) break;
    double lambda = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      try {
        const Located trial = map.eval(cur.s + lambda * dw(0), cur.u + lambda * dw.tail(m), cur.b);
        if (trial.residual < cur.residual) {
          cur = trial;
          improved = true;
          break;
        }
      } catch (const StripFailure&) {
      }
      lambda *= 0.5;
    }
    if (!improved) break;
  }
  if (!newton_ok) {
    double du = 0.0;
    for (int a = 0; a < m; ++a) du = std::max(du, ud.upper()(a) - ud.lower()(a));
    const int c0 = sheet.counts().empty() ? 2 : std::max(2, sheet.counts()[0]);
    cur = simplex_search(map, cur, sheet.step(), du / (c0 - 1));
  }

  const Vec yq = cur.y.head(n);
  const Vec yp = cur.y.segment(n, n);
  Mat cols(n, n);
  bool have_cols = true;
  try {
    cols = map.jacobian(cur);
  } catch (const StripFailure&) {
    have_cols = false;
  }
  Vec ref(m);
  if (m > 0) ref = sheet.surface().tangent(cur.u, n).colwise().norm().transpose();
  const bool degenerate = !have_cols || normalized_det(cols, ref) < 1e-6;
  if (cur.residual > 1e-9 * (1.0 + q.norm())) {
    if (degenerate) throw CausticSuspected("characteristics focus near the point");
    throw OutOfSheet("point not reached by any traced characteristic");
  }
  const double slack = 1e-9 * (1.0 + std::abs(sr.hi - sr.lo));
  bool inside = cur.s >= sr.lo - slack && cur.s <= sr.hi + slack;
  for (int a = 0; a < m; ++a) {
    const double w = 1e-9 * (1.0 + ud.upper()(a) - ud.lower()(a));
    inside = inside && cur.u(a) >= ud.lower()(a) - w && cur.u(a) <= ud.upper()(a) + w;
  }
  if (!inside) {
    std::ostringstream os;
    os << "point lies outside the traced region (s = " << cur.s << ")";
    throw OutOfSheet(os.str());
  }
  if (!prob.domain().contains_q(yq)) throw OutOfSheet("point outside the problem domain");
  if (degenerate) throw CausticSuspected("(s, u) -> q Jacobian degenerates at the point");
  return {cur.y(2 * n), yp, cur.s, cur.u};
}

Mat sheet_brackets(const CharacteristicSheet& sheet, double s, const Vec& u) {
  const PdeProblem& prob = sheet.problem();
  const int n = prob.dim();
  const int m = n - 1;
  const Vec b = solve_strip_conditions(prob, sheet.surface(), u, sheet.strip_seed(u));
  const StateVec y = sheet.integrate_to(s, u, b);
  Mat dq(n, n);
  Mat dp(n, n);
  const Vec q = y.head(n);
  const Vec p = y.segment(n, n);
  dq.col(0) = prob.d_p(q, p);
  dp.col(0) = -prob.d_q(q, p);
  for (int a = 0; a < m; ++a) {
    const double h = fd_step(u(a));
    Vec up = u;
    Vec um = u;
    up(a) += h;
    um(a) -= h;
    const StateVec yp = sheet.integrate_to(s, up, solve_strip_conditions(prob, sheet.surface(), up, b));
    const StateVec ym = sheet.integrate_to(s, um, solve_strip_conditions(prob, sheet.surface(), um, b));
    dq.col(a + 1) = (yp.head(n) - ym.head(n)) / (up(a) - um(a));
    dp.col(a + 1) = (yp.segment(n, n) - ym.segment(n, n)) / (up(a) - um(a));
  }
  const Mat br = dq.transpose() * dp - dp.transpose() * dq;
  return 0.5 * (br - br.transpose());
}

}  // namespace hjkit
