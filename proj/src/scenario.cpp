#include "hjkit/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "hjkit/charfn.hpp"
#include "hjkit/hjchar.hpp"
#include "hjkit/hjfield.hpp"
#include "hjkit/optics.hpp"
#include "hjkit/systems.hpp"
#include "hjkit/wavemech.hpp"
#include "scenario_detail.hpp"

namespace hjkit {

namespace fs = std::filesystem;

using detail::Plot;
using detail::Polyline;
using detail::Section;
using detail::Table;
using detail::ValidationError;

namespace {

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

/// Everything a kind produces before files are written.
struct Output {
  std::vector<CheckRecord> records;
  std::vector<std::pair<std::string, Table>> tables;
  std::vector<std::pair<std::string, Plot>> plots;

  void check(const std::string& name, double value, double tol) {
    records.push_back({name, value, tol, std::abs(value) <= tol});
  }
  void check_against(const std::string& name, double value, double expected, double tol) {
    records.push_back({name, value, tol, std::abs(value - expected) <= tol});
  }
};

struct Context {
  std::string name;
  std::string kind;
  unsigned long long seed = 1;
};

/// Validation happens in the parse step; run() only computes.
using Runner = std::function<Output()>;

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

std::vector<double> sized(const Section& s, const std::string& key, std::size_t n) {
  const auto v = s.nums(key);
  if (v.size() != n) {
    throw ValidationError("key '" + s.where(key) + "' must have " + std::to_string(n) + " entries");
  }
  return v;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

std::vector<std::string> meta(const Context& c, const std::string& units) {
  return {"scenario: " + c.name, "kind: " + c.kind, "units: " + units};
}

// ---------------------------------------------------------------------------
// Mechanical systems
// ---------------------------------------------------------------------------

struct SystemSpec {
  int dim = 1;
  std::optional<LagrangianSystem> lag;
  std::optional<HamiltonianSystem> ham;
  bool time_dependent = false;
  std::function<double(const SpacetimePoint&, const SpacetimePoint&)> action;
};

SystemSpec read_system(const Section& s) {
  SystemSpec out;
  const std::string type = s.str("type");
  if (type == "free_particle" || type == "harmonic_oscillator") {
    out.dim = static_cast<int>(s.integer("dim", 1));
    require(out.dim >= 1 && out.dim <= 3, "system.dim must be 1, 2 or 3");
    const double m = s.num("mass", 1.0);
    require(m > 0, "system.mass must be positive");
    if (type == "free_particle") {
      out.lag = free_particle(out.dim, m);
      out.ham = free_particle_hamiltonian(out.dim, m);
      out.action = [m](const SpacetimePoint& a, const SpacetimePoint& b) { return free_particle_action(a, b, m); };
    } else {
      const double w = s.num("omega", 1.0);
      require(w > 0, "system.omega must be positive");
      out.lag = harmonic_oscillator(out.dim, w, m);
      out.ham = harmonic_hamiltonian(out.dim, w, m);
      out.action = [w, m](const SpacetimePoint& a, const SpacetimePoint& b) { return harmonic_action(a, b, w, m); };
    }
  } else if (type == "anharmonic") {
    const double lambda = s.num("lambda");
    out.lag = anharmonic_oscillator(lambda);
    HamiltonianSystem h(1,
                        [lambda](const PhasePoint& x) {
                          const double q = x.q(0);
                          return 0.5 * x.p(0) * x.p(0) + 0.5 * q * q + 0.25 * lambda * q * q * q * q;
                        },
                        Domain::unbounded(1));
    h.with_gradients([lambda](const PhasePoint& x) { return vec({x.q(0) + lambda * std::pow(x.q(0), 3)}); },
                     [](const PhasePoint& x) { return x.p; });
    out.ham = h;
  } else if (type == "magnetic") {
    out.dim = 2;
    const double B = s.num("field");
    const double k = s.num("spring", 0.0);
    out.lag = magnetic_particle(B, k);
    auto kinetic = [B](const PhasePoint& x) {
      return Vec(x.p - vec({-0.5 * B * x.q(1), 0.5 * B * x.q(0)}));
    };
    HamiltonianSystem h(2, [kinetic, k](const PhasePoint& x) {
      return 0.5 * kinetic(x).squaredNorm() + 0.5 * k * x.q.squaredNorm();
    }, Domain::unbounded(2));
    h.with_gradients(
        [kinetic, B, k](const PhasePoint& x) {
          const Vec v = kinetic(x);
          return Vec(vec({0.5 * B * v(1), -0.5 * B * v(0)}) + k * x.q);
        },
        kinetic);
    out.ham = h;
  } else if (type == "expression") {
    out.dim = static_cast<int>(s.integer("dim", 1));
    require(out.dim >= 1 && out.dim <= 3, "system.dim must be 1, 2 or 3");
    const int n = out.dim;
    const bool has_l = s.has("lagrangian");
    const bool has_h = s.has("hamiltonian");
    require(has_l != has_h, "expression systems need exactly one of 'lagrangian' and 'hamiltonian'");
    if (has_l) {
      auto vars = detail::indexed("q", n);
      for (const auto& v : detail::indexed("qd", n)) vars.push_back(v);
      vars.push_back("t");
      const Expression e = detail::expression(s, "lagrangian", vars);
      out.time_dependent = e.uses("t");
      out.lag = LagrangianSystem(n, [e, n](const VarState& st) {
        double buf[2 * kMaxDim + 1];
        for (int i = 0; i < n; ++i) {
          buf[i] = st.q(i);
          buf[n + i] = st.qdot(i);
        }
        buf[2 * n] = st.t;
        return e(buf);
      }, Domain::unbounded(n));
      out.ham = to_hamiltonian(*out.lag);
    } else {
      auto vars = detail::indexed("q", n);
      for (const auto& v : detail::indexed("p", n)) vars.push_back(v);
      vars.push_back("t");
      const Expression e = detail::expression(s, "hamiltonian", vars);
      out.time_dependent = e.uses("t");
      out.ham = HamiltonianSystem(n, [e, n](const PhasePoint& x) {
        double buf[2 * kMaxDim + 1];
        for (int i = 0; i < n; ++i) {
          buf[i] = x.q(i);
          buf[n + i] = x.p(i);
        }
        buf[2 * n] = x.t;
        return e(buf);
      }, Domain::unbounded(n));
    }
  } else {
    throw ValidationError("unknown system type '" + type + "'");
  }
  s.finish();
  return out;
}

// ---------------------------------------------------------------------------
// extremal
// ---------------------------------------------------------------------------

Runner parse_extremal(const Section& top, const Context& ctx) {
  const SystemSpec sys = read_system(top.require_sub("system"));
  const int n = sys.dim;
  const Vec q0 = to_vec(sized(top, "q0", n));
  const double t0 = top.num("t0", 0.0);
  const double t1 = top.num("t1");
  require(t1 > t0, "t1 must exceed t0");
  const double step = top.num("step", 1e-3);
  require(step > 0, "step must be positive");
  Vec p0;
  if (top.has("qdot0")) {
    require(!top.has("p0"), "give either qdot0 or p0, not both");
    require(sys.lag.has_value(), "qdot0 needs a Lagrangian system; give p0");
    p0 = sys.lag->d_qdot({q0, to_vec(sized(top, "qdot0", n)), t0});
  } else {
    p0 = to_vec(sized(top, "p0", n));
  }
  const double energy_tol = top.num("energy_tol", 1e-8);
  std::optional<Vec> expect;
  if (top.has("expect_final")) expect = to_vec(sized(top, "expect_final", n));
  const double final_tol = top.num("final_tol", 1e-9);
  const auto rows = static_cast<std::size_t>(top.integer("max_rows", 1000));
  require(rows >= 2, "max_rows must be at least 2");

  return [=]() {
    Output out;
    const ExtremalCurve c = integrate_extremal(*sys.ham, {q0, p0, t0}, t1, {step});
    if (!sys.time_dependent) {
      const double h0 = sys.ham->value(c.samples.front());
      double drift = 0.0;
      for (const auto& x : c.samples) drift = std::max(drift, std::abs(sys.ham->value(x) - h0));
      out.check("energy_drift", drift, energy_tol);
    }
    if (expect) out.check("final_position", (c.back().q - *expect).norm(), final_tol);

    Table t;
    t.meta = meta(ctx, "t time; q length; p momentum; action action");
    t.columns.push_back("t");
    for (const auto& v : detail::indexed("q", n)) t.columns.push_back(v);
    for (const auto& v : detail::indexed("p", n)) t.columns.push_back(v);
    t.columns.push_back("action");
    const std::size_t stride = std::max<std::size_t>(1, (c.size() + rows - 2) / (rows - 1));
    Plot plot{ctx.name, n == 2 ? "q1" : "t", n == 2 ? "q2" : "q1", {Polyline{}}};
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (k % stride != 0 && k + 1 != c.size()) continue;
      const auto& x = c.samples[k];
      std::vector<double> row{x.t};
      for (int i = 0; i < n; ++i) row.push_back(x.q(i));
      for (int i = 0; i < n; ++i) row.push_back(x.p(i));
      row.push_back(c.action[k]);
      t.rows.push_back(row);
      plot.lines[0].points.emplace_back(n == 2 ? x.q(0) : x.t, n == 2 ? x.q(1) : x.q(0));
    }
    out.tables.emplace_back("", std::move(t));
    out.plots.emplace_back("", std::move(plot));
    return out;
  };
}

// ---------------------------------------------------------------------------
// hj_field_check
// ---------------------------------------------------------------------------

HypersurfaceFamily read_family(const Section& s, int n) {
  const std::string type = s.str("type");
  HypersurfaceFamily fam = [&]() {
    if (type == "free_spreading") {
      const double m = s.num("mass", 1.0);
      const Domain d(Vec::Constant(n, -kInf), Vec::Constant(n, kInf), {1e-9, kInf});
      HypersurfaceFamily f(n, [m](const Vec& q, double t) { return m * q.squaredNorm() / (2 * t); }, d);
      f.with_gradient([m](const Vec& q, double t) { return Vec(m * q / t); },
                      [m](const Vec& q, double t) { return -m * q.squaredNorm() / (2 * t * t); });
      return f;
    }
    if (type == "oscillator") {
      const double m = s.num("mass", 1.0);
      const double w = s.num("omega", 1.0);
      const double edge = kPi / (2 * w) - 1e-9;
      const Domain d(Vec::Constant(n, -kInf), Vec::Constant(n, kInf), {-edge, edge});
      HypersurfaceFamily f(n, [m, w](const Vec& q, double t) { return -0.5 * m * w * q.squaredNorm() * std::tan(w * t); },
                           d);
      f.with_gradient([m, w](const Vec& q, double t) { return Vec(-m * w * q * std::tan(w * t)); },
                      [m, w](const Vec& q, double t) {
                        const double c = std::cos(w * t);
                        return -0.5 * m * w * w * q.squaredNorm() / (c * c);
                      });
      return f;
    }
    if (type == "expression") {
      auto vars = detail::indexed("q", n);
      vars.push_back("t");
      const Expression e = detail::expression(s, "S", vars);
      const double lo = s.num("t_lo", -kInf);
      const double hi = s.num("t_hi", kInf);
      require(lo < hi, "family.t_lo must be below family.t_hi");
      return HypersurfaceFamily(n, [e, n](const Vec& q, double t) {
        double buf[kMaxDim + 1];
        for (int i = 0; i < n; ++i) buf[i] = q(i);
        buf[n] = t;
        return e(buf);
      }, Domain(Vec::Constant(n, -kInf), Vec::Constant(n, kInf), {lo, hi}));
    }
    throw ValidationError("unknown family type '" + type + "'");
  }();
  s.finish();
  return fam;
}

Runner parse_field_check(const Section& top, const Context& ctx) {
  const SystemSpec sys = read_system(top.require_sub("system"));
  require(sys.lag.has_value(), "hj_field_check needs a Lagrangian system");
  const int n = sys.dim;
  const HypersurfaceFamily fam = read_family(top.require_sub("family"), n);
  const double s1 = top.num("sigma1");
  const double s2 = top.num("sigma2");
  const auto count = top.integer("seeds", 20);
  require(count >= 1, "seeds must be positive");
  const double lo = top.num("q_lo", 0.5);
  const double hi = top.num("q_hi", 2.0);
  const double tg = top.num("t_guess", 1.0);
  EquidistanceOptions eo;
  eo.step = top.num("step", 1e-3);
  eo.horizon = top.num("horizon", 10.0);
  const double tol = top.num("tol", 1e-6);
  const double hj_tol = top.num("hj_tol", 1e-6);

  return [=]() {
    std::vector<SpacetimePoint> seeds;
    for (long long k = 0; k < count; ++k) {
      Vec q = Vec::Zero(n);
      q(0) = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
      seeds.push_back({q, tg});
    }
    const EquidistanceReport rep = equidistance_check(*sys.lag, fam, s1, s2, seeds, eo);
    Output out;
    out.check("equidistance", rep.max_abs_deviation, tol);
    double hj = 0.0;
    for (std::size_t k = 0; k < rep.endpoints.size(); ++k) {
      if (rep.errors[k]) continue;
      hj = std::max(hj, std::abs(hj_residual(*sys.ham, fam, rep.endpoints[k].q, rep.endpoints[k].t)));
    }
    out.check("hj_residual", hj, hj_tol);

    Table t;
    t.meta = meta(ctx, "q length; t time; action action");
    t.columns.push_back("seed");
    for (const auto& v : detail::indexed("q_end", n)) t.columns.push_back(v);
    t.columns.push_back("t_end");
    t.columns.push_back("action");
    Plot plot{ctx.name, "q1", "t", {Polyline{}}};
    for (std::size_t k = 0; k < rep.actions.size(); ++k) {
      std::vector<double> row{static_cast<double>(k)};
      for (int i = 0; i < n; ++i) row.push_back(rep.errors[k] ? kNaN : rep.endpoints[k].q(i));
      row.push_back(rep.errors[k] ? kNaN : rep.endpoints[k].t);
      row.push_back(rep.actions[k]);
      t.rows.push_back(row);
      if (!rep.errors[k]) plot.lines[0].points.emplace_back(rep.endpoints[k].q(0), rep.endpoints[k].t);
    }
    out.tables.emplace_back("", std::move(t));
    out.plots.emplace_back("", std::move(plot));
    return out;
  };
}

// ---------------------------------------------------------------------------
// hj_characteristics
// ---------------------------------------------------------------------------

Runner parse_characteristics(const Section& top, const Context& ctx) {
  const Section ps = top.require_sub("problem");
  const std::string type = ps.str("type");
  std::optional<PdeProblem> prob;
  int n = 0;
  const double box = ps.num("box", 10.0);
  require(box > 0, "problem.box must be positive");
  if (type == "eikonal" || type == "expression") {
    n = static_cast<int>(ps.integer("dim", 2));
    require(n >= 2 && n <= 3, "problem.dim must be 2 or 3");
    const auto qv = detail::indexed("q", n);
    const Domain d = Domain::box(n, -box, box, {-kInf, kInf});
    if (type == "eikonal") {
      const Expression idx = detail::expression(ps, "index", "1", qv);
      prob = PdeProblem(n, [idx, n](const Vec& q, const Vec& p) {
        double buf[kMaxDim];
        for (int i = 0; i < n; ++i) buf[i] = q(i);
        const double m = idx(buf);
        return 0.5 * (p.squaredNorm() - m * m);
      }, d);
    } else {
      auto vars = qv;
      for (const auto& v : detail::indexed("p", n)) vars.push_back(v);
      const Expression e = detail::expression(ps, "phi", vars);
      prob = PdeProblem(n, [e, n](const Vec& q, const Vec& p) {
        double buf[2 * kMaxDim];
        for (int i = 0; i < n; ++i) {
          buf[i] = q(i);
          buf[n + i] = p(i);
        }
        return e(buf);
      }, d);
    }
  } else if (type == "hamiltonian") {
    const SystemSpec sys = read_system(top.require_sub("system"));
    prob = PdeProblem::from_hamiltonian(*sys.ham);
    n = sys.dim + 1;
  } else {
    throw ValidationError("unknown problem type '" + type + "'");
  }
  ps.finish();

  const Section ss = top.require_sub("surface");
  const int k = n - 1;
  const auto uv = detail::indexed("u", k);
  const auto a_text = ss.strs("a");
  require(static_cast<int>(a_text.size()) == n, "surface.a must have one expression per coordinate");
  std::vector<Expression> a;
  for (std::size_t i = 0; i < a_text.size(); ++i) {
    try {
      a.push_back(Expression::parse(a_text[i], uv));
    } catch (const ExprError& e) {
      throw ValidationError("key 'surface.a': " + std::string(e.what()));
    }
  }
  const Expression c = detail::expression(ss, "c", uv);
  const Vec u_lo = to_vec(sized(ss, "u_lo", static_cast<std::size_t>(k)));
  const Vec u_hi = to_vec(sized(ss, "u_hi", static_cast<std::size_t>(k)));
  std::vector<int> counts;
  for (double v : sized(ss, "counts", static_cast<std::size_t>(k))) {
    require(v >= 2 && v == std::round(v), "surface.counts must be integers of at least 2");
    counts.push_back(static_cast<int>(v));
  }
  const Vec seed_b = to_vec(sized(ss, "seed_b", static_cast<std::size_t>(n)));
  ss.finish();
  auto eval_u = [](const Expression& e, const Vec& u) {
    double buf[kMaxDim];
    for (Eigen::Index i = 0; i < u.size(); ++i) buf[i] = u(i);
    return e(buf);
  };
  const InitialSurface surf{[a, eval_u, n](const Vec& u) {
                              Vec q(n);
                              for (int i = 0; i < n; ++i) q(i) = eval_u(a[static_cast<std::size_t>(i)], u);
                              return q;
                            },
                            [c, eval_u](const Vec& u) { return eval_u(c, u); }, Domain(u_lo, u_hi, {-kInf, kInf})};

  const double s_lo = top.num("s_lo", 0.0);
  const double s_hi = top.num("s_hi", 1.0);
  require(s_lo <= 0 && s_hi >= 0 && s_hi > s_lo, "s_lo <= 0 <= s_hi required");
  const double step = top.num("step", 0.05);
  const double phi_tol = top.num("phi_tol", 1e-7);
  const double bracket_tol = top.num("bracket_tol", 1e-6);
  std::optional<Expression> exact;
  if (top.has("exact")) exact = detail::expression(top, "exact", detail::indexed("q", n));
  const auto samples = top.integer("samples", 1000);
  const Vec sample_lo = top.has("sample_lo") ? to_vec(sized(top, "sample_lo", n)) : Vec::Constant(n, 0.0);
  const Vec sample_hi = top.has("sample_hi") ? to_vec(sized(top, "sample_hi", n)) : Vec::Constant(n, 1.0);
  const double exact_tol = top.num("exact_tol", 1e-5);
  const unsigned long long seed = ctx.seed;

  return [=]() {
    Output out;
    const StripLattice lat = solve_strips(*prob, surf, counts, seed_b);
    const CharacteristicSheet sheet = trace_characteristics(*prob, surf, lat, {s_lo, s_hi}, step);
    out.check("phi_conservation", sheet.max_phi_residual(), phi_tol);

    // Brackets on a few strips at a few s values against their s = 0 values.
    double drift = 0.0;
    const auto& st = sheet.strips();
    const auto& sv = sheet.s_values();
    for (std::size_t j : {st.size() / 4, st.size() / 2, 3 * st.size() / 4}) {
      const Vec& u = st[j].u;
      const Mat b0 = sheet_brackets(sheet, 0.0, u);
      for (std::size_t m = 0; m < sv.size(); m += std::max<std::size_t>(1, sv.size() / 4)) {
        drift = std::max(drift, (sheet_brackets(sheet, sv[m], u) - b0).cwiseAbs().maxCoeff());
      }
    }
    out.check("bracket_constancy", drift, bracket_tol);

    if (exact) {
      UniformSource rng(seed);
      double worst = 0.0;
      for (long long m = 0; m < samples; ++m) {
        Vec q(n);
        for (int i = 0; i < n; ++i) q(i) = rng.uniform(sample_lo(i), sample_hi(i));
        double buf[kMaxDim];
        for (int i = 0; i < n; ++i) buf[i] = q(i);
        worst = std::max(worst, std::abs(evaluate_solution(sheet, q).value - (*exact)(buf)));
      }
      out.check("exact_solution", worst, exact_tol);
    }

    Table t;
    t.meta = meta(ctx, "s parameter; q length; p momentum; z solution value");
    for (const auto& v : detail::indexed("u", k)) t.columns.push_back(v);
    t.columns.push_back("s");
    for (const auto& v : detail::indexed("q", n)) t.columns.push_back(v);
    for (const auto& v : detail::indexed("p", n)) t.columns.push_back(v);
    t.columns.push_back("z");
    Plot plot{ctx.name, "q1", "q2", {}};
    for (const auto& strip : st) {
      Polyline line;
      for (std::size_t m = 0; m < sv.size(); ++m) {
        if (!strip.valid[m]) continue;
        std::vector<double> row;
        for (int i = 0; i < k; ++i) row.push_back(strip.u(i));
        row.push_back(sv[m]);
        for (int i = 0; i < n; ++i) row.push_back(strip.q[m](i));
        for (int i = 0; i < n; ++i) row.push_back(strip.p[m](i));
        row.push_back(strip.z[m]);
        t.rows.push_back(row);
        line.points.emplace_back(strip.q[m](0), strip.q[m](1));
      }
      plot.lines.push_back(std::move(line));
    }
    out.tables.emplace_back("", std::move(t));
    out.plots.emplace_back("", std::move(plot));
    return out;
  };
}

// ---------------------------------------------------------------------------
// charfn
// ---------------------------------------------------------------------------

Runner parse_charfn(const Section& top, const Context& ctx) {
  const SystemSpec sys = read_system(top.require_sub("system"));
  const int n = sys.dim;
  const auto pairs = top.integer("pairs", 50);
  require(pairs >= 1, "pairs must be positive");
  const double q_lo = top.num("q_lo", -1.0);
  const double q_hi = top.num("q_hi", 1.0);
  const double t1 = top.num("t1", 0.0);
  const double dt_lo = top.num("dt_lo", 0.5);
  const double dt_hi = top.num("dt_hi", 1.0);
  require(q_lo < q_hi && dt_lo > 0 && dt_hi >= dt_lo, "invalid sampling ranges");
  const double tol = top.num("tol", 1e-6);
  const double grad_tol = top.num("grad_tol", 1e-4);
  const double recover_tol = top.num("recover_tol", 1e-4);
  const bool recover = top.flag("recover", true);
  ShootingOptions so;
  so.step = {top.num("step", 1e-3)};
  const unsigned long long seed = ctx.seed;

  return [=]() {
    UniformSource rng(seed);
    std::vector<std::pair<SpacetimePoint, SpacetimePoint>> ends;
    for (long long k = 0; k < pairs; ++k) {
      Vec a(n), b(n);
      for (int i = 0; i < n; ++i) a(i) = rng.uniform(q_lo, q_hi);
      for (int i = 0; i < n; ++i) b(i) = rng.uniform(q_lo, q_hi);
      ends.push_back({{a, t1}, {b, t1 + rng.uniform(dt_lo, dt_hi)}});
    }
    const auto count = static_cast<std::size_t>(pairs);
    std::vector<double> value(count), oracle(count, kNaN), grad_err(count), rec_err(count, 0.0);
    const ShootingCharacteristic S(*sys.ham, so);
    parallel_for(count, [&](std::size_t k) {
      const auto& [p1, p2] = ends[k];
      const CharGradients g = char_gradients(*sys.ham, p1, p2, 1e-4, so);
      value[k] = g.base.value;
      if (sys.action) oracle[k] = sys.action(p1, p2);
      const double h1 = sys.ham->value({p1.q, g.base.p1, p1.t});
      const double h2 = sys.ham->value({p2.q, g.base.p2, p2.t});
      grad_err[k] = std::max({(g.s_q2 - g.base.p2).cwiseAbs().maxCoeff(), (g.s_q1 + g.base.p1).cwiseAbs().maxCoeff(),
                              std::abs(g.s_t2 + h2), std::abs(g.s_t1 - h1)});
      if (recover) {
        const RecoveredState r = recover_trajectory(S, p1.q, g.base.p1, p1.t, p2.t);
        const ExtremalCurve c = integrate_extremal(*sys.ham, {p1.q, g.base.p1, p1.t}, p2.t, so.step);
        rec_err[k] = std::max((r.q2 - c.back().q).norm(), (r.p2 - c.back().p).norm());
      }
    });
    Output out;
    if (sys.action) {
      double worst = 0.0;
      for (std::size_t k = 0; k < count; ++k) worst = std::max(worst, std::abs(value[k] - oracle[k]));
      out.check("action_oracle", worst, tol);
    }
    out.check("hj_gradients", *std::max_element(grad_err.begin(), grad_err.end()), grad_tol);
    if (recover) out.check("recovery", *std::max_element(rec_err.begin(), rec_err.end()), recover_tol);

    Table t;
    t.meta = meta(ctx, "q length; t time; value action");
    for (const auto& v : detail::indexed("q1_", n)) t.columns.push_back(v);
    t.columns.push_back("t1");
    for (const auto& v : detail::indexed("q2_", n)) t.columns.push_back(v);
    t.columns.push_back("t2");
    t.columns.push_back("value");
    t.columns.push_back("oracle");
    Plot plot{ctx.name, "pair", "value", {Polyline{}, Polyline{}}};
    for (std::size_t k = 0; k < count; ++k) {
      std::vector<double> row;
      for (int i = 0; i < n; ++i) row.push_back(ends[k].first.q(i));
      row.push_back(ends[k].first.t);
      for (int i = 0; i < n; ++i) row.push_back(ends[k].second.q(i));
      row.push_back(ends[k].second.t);
      row.push_back(value[k]);
      row.push_back(oracle[k]);
      t.rows.push_back(row);
      plot.lines[0].points.emplace_back(static_cast<double>(k), value[k]);
      plot.lines[1].points.emplace_back(static_cast<double>(k), oracle[k]);
    }
    out.tables.emplace_back("", std::move(t));
    out.plots.emplace_back("", std::move(plot));
    return out;
  };
}

// ---------------------------------------------------------------------------
// optics
// ---------------------------------------------------------------------------

struct MediumSpec {
  std::optional<Medium> medium;
  bool time_dependent = false;
  /// Zero-based normal axis of an interface medium.
  std::optional<int> interface_axis;
};

MediumSpec read_medium(const Section& s) {
  MediumSpec out;
  const std::string type = s.str("type");
  const double c = s.num("c", 1.0);
  require(c > 0, "medium.c must be positive");
  if (type == "homogeneous") {
    out.medium = Medium::homogeneous(s.num("n", 1.0), c);
  } else if (type == "linear") {
    out.medium = Medium::linear(s.num("n0", 1.0), to_vec(sized(s, "gradient", 2)), c);
  } else if (type == "interface") {
    const auto axis = s.integer("axis", 2);
    require(axis == 1 || axis == 2, "medium.axis must be 1 or 2");
    const double w = s.num("width");
    require(w > 0, "medium.width must be positive");
    out.medium = Medium::interface(s.num("n1"), s.num("n2"), static_cast<int>(axis) - 1, s.num("at", 0.0), w, c);
    out.interface_axis = static_cast<int>(axis) - 1;
  } else if (type == "expression") {
    const Expression e = detail::expression(s, "index", {"q1", "q2", "t"});
    out.time_dependent = e.uses("t");
    out.medium = Medium([e](const Vec& q, double t) {
      const double buf[3] = {q(0), q(1), t};
      return e(buf);
    }, c);
  } else {
    throw ValidationError("unknown medium type '" + type + "'");
  }
  s.finish();
  return out;
}

Runner parse_optics_ray(const Section& top, const Context& ctx) {
  const MediumSpec ms = read_medium(top.require_sub("medium"));
  const Vec start = to_vec(sized(top, "start", 2));
  const double t0 = top.num("t0", 0.0);
  const Vec dir = to_vec(sized(top, "direction", 2));
  const double t_end = top.num("t_end");
  require(t_end > t0, "t_end must exceed t0");
  RayOptions ro;
  ro.step = top.num("step", 1e-3);
  ro.max_slope = top.num("max_slope", 1e3);
  const double snell_tol = top.num("snell_tol", 1e-3);
  const double bouguer_tol = top.num("bouguer_tol", 1e-5);
  const auto rows = static_cast<std::size_t>(top.integer("max_rows", 1000));
  require(rows >= 2, "max_rows must be at least 2");

  return [=]() {
    const Medium& m = *ms.medium;
    const ExtremalCurve ray = trace_ray(m, {start, t0}, dir, t_end, ro);
    Output out;
    if (ms.interface_axis) {
      // The sine ratio across the interface should equal n_after / n_before.
      const int axis = *ms.interface_axis;
      const auto& a = ray.samples.front();
      const auto& b = ray.back();
      const double ratio = interface_sine(m, a, axis) / interface_sine(m, b, axis);
      out.check_against("snell_ratio", ratio, m.n(b.q, b.t) / m.n(a.q, a.t), snell_tol);
    }
    if (!ms.time_dependent) {
      const double b0 = bouguer_invariant(m, ray.samples.front());
      double drift = 0.0;
      for (const auto& x : ray.samples) drift = std::max(drift, std::abs(bouguer_invariant(m, x) - b0));
      out.check("bouguer_drift", drift, bouguer_tol);
    }
    Table t;
    t.meta = meta(ctx, "t axial length; q length; p dimensionless; travel_time time");
    t.columns = {"t", "q1", "q2", "p1", "p2", "travel_time"};
    Plot plot{ctx.name, "t", "q2", {Polyline{}}};
    const std::size_t stride = std::max<std::size_t>(1, (ray.size() + rows - 2) / (rows - 1));
    for (std::size_t k = 0; k < ray.size(); ++k) {
      if (k % stride != 0 && k + 1 != ray.size()) continue;
      const auto& x = ray.samples[k];
      t.rows.push_back({x.t, x.q(0), x.q(1), x.p(0), x.p(1), ray.action[k]});
      plot.lines[0].points.emplace_back(x.t, x.q(1));
    }
    out.tables.emplace_back("", std::move(t));
    out.plots.emplace_back("", std::move(plot));
    return out;
  };
}

Runner parse_optics_front(const Section& top, const Context& ctx) {
  const MediumSpec ms = read_medium(top.require_sub("medium"));
  const std::string source = top.str("source", "point");
  require(source == "point" || source == "plane", "source must be 'point' or 'plane'");
  const double T = top.num("T");
  require(T >= 0, "T must be non-negative");
  RayOptions ro;
  ro.step = top.num("step", 1e-3);
  Vec center = Vec::Zero(2);
  double t_center = 0.0;
  FanSpec fan;
  double q_lo = -1.0, q_hi = 1.0;
  int samples = 200;
  if (source == "point") {
    center = to_vec(sized(top, "center", 2));
    t_center = top.num("t_center", 0.0);
    fan.rows = static_cast<int>(top.integer("rows", 1));
    fan.cols = static_cast<int>(top.integer("cols", 81));
    fan.aperture = top.num("aperture", 1.0);
    require(fan.rows >= 1 && fan.cols >= 1 && fan.aperture > 0, "invalid fan");
  } else {
    q_lo = top.num("q_lo", -1.0);
    q_hi = top.num("q_hi", 1.0);
    samples = static_cast<int>(top.integer("samples", 200));
    require(q_lo < q_hi && samples >= 2, "invalid plane sampling");
  }
  const double huygens_dt = top.num("huygens_dt", 0.0);
  const double huygens_tol = top.num("huygens_tol", 1e-5);
  const double normal_tol = top.num("normal_tol", 1e-4);
  require(!ms.time_dependent || source == "point", "plane sources need a medium independent of t");

  return [=]() {
    const Medium& m = *ms.medium;
    WaveFront front;
    if (source == "point") {
      front = wavefront_from_point(m, {center, t_center}, T, fan, ro);
    } else {
      const double c = m.c();
      HypersurfaceFamily fam(2, [m, c](const Vec& q, double t) { return m.n(q, 0.0) * t / c; }, Domain::unbounded(2));
      std::vector<SpacetimePoint> lattice;
      for (int k = 0; k < samples; ++k) {
        lattice.push_back({vec({0.0, q_lo + (q_hi - q_lo) * k / (samples - 1)}), 0.0});
      }
      front = propagate_front(m, fam, 0.0, T, lattice, 1, samples, ro);
    }
    Output out;
    out.check("front_failures", static_cast<double>(front.failures()), 0.0);
    out.check("normal_defect", front_normal_defect(m, front), normal_tol);
    std::optional<WaveFront> direct;
    if (huygens_dt > 0) {
      HuygensReport rep = huygens_check(m, front, huygens_dt, ro);
      out.check("huygens_defect", rep.max_defect, huygens_tol);
      direct = std::move(rep.direct);
    }
    Table t;
    t.meta = meta(ctx, "q length; t axial length; p dimensionless; T time");
    t.columns = {"front", "row", "col", "q1", "q2", "t", "p1", "p2"};
    Plot plot{ctx.name, "q2", "t", {}};
    auto emit = [&](const WaveFront& f, int which) {
      Polyline line;
      for (std::size_t k = 0; k < f.size(); ++k) {
        const auto& x = f.points[k];
        t.rows.push_back({static_cast<double>(which), static_cast<double>(static_cast<int>(k) / f.cols),
                          static_cast<double>(static_cast<int>(k) % f.cols), x.q(0), x.q(1), x.t, f.momenta[k](0),
                          f.momenta[k](1)});
        if (f.ok(k)) line.points.emplace_back(x.q(1), x.t);
      }
      plot.lines.push_back(std::move(line));
    };
    emit(front, 0);
    if (direct) emit(*direct, 1);
    out.tables.emplace_back("", std::move(t));
    out.plots.emplace_back("", std::move(plot));
    return out;
  };
}

// ---------------------------------------------------------------------------
// Wave mechanics
// ---------------------------------------------------------------------------

PacketScenario read_packet(const Section& s) {
  PacketScenario p;
  p.n = static_cast<int>(s.integer("n", 1024));
  p.x_min = s.num("x_min", -20.0);
  p.x_max = s.num("x_max", 20.0);
  p.hbar = s.num("hbar", 1.0);
  p.m = s.num("m", 1.0);
  p.center = s.num("center", 0.0);
  p.p0 = s.num("p0", 0.0);
  p.sigma = s.num("sigma", 1.0);
  require(p.n >= 8 && p.x_max > p.x_min, "packet grid must have n >= 8 and x_max > x_min");
  require(p.hbar > 0 && p.m > 0 && p.sigma > 0, "packet hbar, m and sigma must be positive");
  const Expression V = detail::expression(s, "potential", "0", {"x"});
  p.V = [V](double x) { return V(&x); };
  s.finish();
  return p;
}

bool is_free(const PacketScenario& p) {
  for (double x : {p.x_min, 0.5 * (p.x_min + p.x_max), p.x_max, 0.123}) {
    if (p.V(x) != 0.0) return false;
  }
  return true;
}

Runner parse_bohm(const Section& top, const Context& ctx) {
  const PacketScenario pk = read_packet(top.require_sub("packet"));
  const double dt = top.num("dt", 1e-3);
  const auto steps = top.integer("steps", 1000);
  require(dt > 0 && steps >= 1, "dt and steps must be positive");
  const std::vector<double> starts = top.nums("starts", {});
  const double norm_tol = top.num("norm_tol", 1e-9);
  const double width_tol = top.num("width_tol", 1e-4);
  const double law_tol = top.num("law_tol", 1e-3);
  const double plane_tol = top.num("plane_wave_tol", 1e-10);
  const bool convergence = top.flag("convergence", false);
  const double conv_tol = top.num("convergence_tol", 0.2);
  const double conv_dt = top.num("convergence_dt", 0.1);
  const double conv_time = top.num("convergence_time", 0.5);
  const auto rows = static_cast<std::size_t>(top.integer("max_rows", 1000));
  require(rows >= 2, "max_rows must be at least 2");

  return [=]() {
    Output out;
    const WaveGrid g0 = gaussian_packet(pk);
    const WaveHistory hist = WaveHistory::record(g0, dt, static_cast<int>(steps), 1, 0.0);
    const auto& frames = hist.frames();
    out.check("norm_drift", frames.back().norm() - g0.norm(), norm_tol);

    const bool free = is_free(pk);
    const double v0 = pk.p0 / pk.m;
    auto sigma_t = [&](double t) {
      const double r = pk.hbar * t / (2 * pk.m * pk.sigma * pk.sigma);
      return pk.sigma * std::sqrt(1 + r * r);
    };
    if (free) {
      double worst = 0.0;
      for (const auto& f : frames) worst = std::max(worst, std::abs(f.position_spread()(0) - sigma_t(f.t)));
      out.check("width_law", worst, width_tol);
    }
    std::vector<Trajectory> trajs(starts.size());
    parallel_for(starts.size(), [&](std::size_t k) {
      trajs[k] = bohm_trajectory(hist, vec({starts[k]}), {0.0, frames.back().t}, dt);
    });
    if (free && !starts.empty()) {
      double worst = 0.0;
      for (std::size_t k = 0; k < starts.size(); ++k) {
        for (std::size_t j = 0; j < trajs[k].t.size(); ++j) {
          const double t = trajs[k].t[j];
          const double law = pk.center + v0 * t + (starts[k] - pk.center) * sigma_t(t) / pk.sigma;
          worst = std::max(worst, std::abs(trajs[k].q[j](0) - law));
        }
      }
      out.check("bohm_free_law", worst, law_tol);
    }

    // Exact plane wave on the same grid: both residuals vanish.
    {
      WaveGrid pw = WaveGrid::line(pk.n, pk.x_min, (pk.x_max - pk.x_min) / pk.n, pk.hbar, pk.m);
      const double k = 2 * kPi * 3 / (pk.x_max - pk.x_min);
      pw.fill([&](const Vec& q) { return std::exp(cplx(0, k * q(0))); });
      SplitStepPropagator prop(pw);
      WaveGrid a = pw;
      prop.step(a, dt);
      WaveGrid b = a;
      prop.step(b, dt);
      const PilotResiduals r = pilot_wave_residuals(pw, a, b);
      out.check("plane_wave_qhj", r.qhj.max_abs(), plane_tol);
      out.check("plane_wave_continuity", r.continuity.max_abs(), plane_tol);
    }

    if (convergence) {
      auto norms = [&](int n, double h) {
        PacketScenario s = pk;
        s.n = n;
        WaveGrid g = gaussian_packet(s);
        SplitStepPropagator prop(g);
        const auto pre = static_cast<int>(std::llround(conv_time / h));
        for (int i = 0; i < pre; ++i) prop.step(g, h);
        WaveGrid a = g;
        prop.step(a, h);
        WaveGrid b = a;
        prop.step(b, h);
        const PilotResiduals r = pilot_wave_residuals(g, a, b, 1e-8, 1e-2);
        return std::pair{weighted_norm(r.qhj, a), weighted_norm(r.continuity, a)};
      };
      const auto coarse = norms(pk.n, conv_dt);
      const auto fine = norms(2 * pk.n, conv_dt / 2);
      out.check_against("residual_convergence_qhj", coarse.first / fine.first, 4.0, 4.0 * conv_tol);
      out.check_against("residual_convergence_continuity", coarse.second / fine.second, 4.0, 4.0 * conv_tol);
    }

    Table t;
    t.meta = meta(ctx, "t time; q length; sigma length");
    t.columns = {"t", "norm", "mean", "sigma"};
    for (std::size_t k = 0; k < starts.size(); ++k) t.columns.push_back("q" + std::to_string(k + 1));
    Plot plot{ctx.name, "t", "q", {}};
    plot.lines.resize(starts.size());
    const std::size_t stride = std::max<std::size_t>(1, (frames.size() + rows - 2) / (rows - 1));
    for (std::size_t j = 0; j < frames.size(); ++j) {
      if (j % stride != 0 && j + 1 != frames.size()) continue;
      const auto& f = frames[j];
      std::vector<double> row{f.t, f.norm(), f.mean_position()(0), f.position_spread()(0)};
      for (std::size_t k = 0; k < starts.size(); ++k) {
        row.push_back(trajs[k].q[j](0));
        plot.lines[k].points.emplace_back(f.t, trajs[k].q[j](0));
      }
      t.rows.push_back(row);
    }
    out.tables.emplace_back("", std::move(t));
    out.plots.emplace_back("", std::move(plot));
    return out;
  };
}

Runner parse_classical_limit(const Section& top, const Context& ctx) {
  PacketScenario pk = read_packet(top.require_sub("packet"));
  pk.dt = top.num("dt", 1e-3);
  pk.horizon = top.num("horizon", 1.0);
  pk.ensemble = static_cast<int>(top.integer("ensemble", 41));
  require(pk.dt > 0 && pk.horizon > 0 && pk.ensemble >= 1, "dt, horizon and ensemble must be positive");
  const double tol = top.num("tol", 0.0);
  const std::vector<double> hbars = top.nums("hbars", {});
  for (double h : hbars) require(h > 0, "hbars must be positive");
  const auto rows = static_cast<std::size_t>(top.integer("max_rows", 1000));
  require(rows >= 2, "max_rows must be at least 2");

  return [=]() {
    Output out;
    const ClassicalLimitReport rep = classical_limit_check(pk);
    if (tol > 0) out.check("classical_deviation", rep.max_deviation, tol);
    Table t;
    t.meta = meta(ctx, "t time; positions length");
    t.columns = {"t", "bohm_mean", "grid_mean", "classical"};
    Plot plot{ctx.name, "t", "q", {Polyline{}, Polyline{}}};
    const std::size_t stride = std::max<std::size_t>(1, (rep.t.size() + rows - 2) / (rows - 1));
    for (std::size_t k = 0; k < rep.t.size(); ++k) {
      if (k % stride != 0 && k + 1 != rep.t.size()) continue;
      t.rows.push_back({rep.t[k], rep.bohm_mean[k], rep.grid_mean[k], rep.classical[k]});
      plot.lines[0].points.emplace_back(rep.t[k], rep.bohm_mean[k]);
      plot.lines[1].points.emplace_back(rep.t[k], rep.classical[k]);
    }
    out.tables.emplace_back("", std::move(t));
    out.plots.emplace_back("", std::move(plot));
    if (!hbars.empty()) {
      const LimitTrend tr = classical_limit_trend(pk, hbars);
      const double ratio = tr.deviation.back() / tr.deviation.front();
      out.records.push_back({"hbar_trend", ratio, 1.0, tr.monotone && ratio < 1.0});
      Table tt;
      tt.meta = meta(ctx, "hbar action; deviation length");
      tt.columns = {"hbar", "deviation"};
      for (std::size_t k = 0; k < tr.hbar.size(); ++k) tt.rows.push_back({tr.hbar[k], tr.deviation[k]});
      out.tables.emplace_back("_trend", std::move(tt));
    }
    return out;
  };
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

const std::map<std::string, Runner (*)(const Section&, const Context&)>& kinds() {
  static const std::map<std::string, Runner (*)(const Section&, const Context&)> k{
      {"extremal", parse_extremal},         {"hj_field_check", parse_field_check},
      {"hj_characteristics", parse_characteristics}, {"charfn", parse_charfn},
      {"optics_ray", parse_optics_ray},     {"optics_front", parse_optics_front},
      {"bohm", parse_bohm},                 {"classical_limit", parse_classical_limit}};
  return k;
}

std::string stem_of(const std::string& source) { return fs::path(source).stem().string(); }

class ThreadCap {
 public:
  explicit ThreadCap(unsigned n) : saved_(max_threads()) {
    if (n != 0) set_max_threads(n);
  }
  ~ThreadCap() { set_max_threads(saved_); }

 private:
  unsigned saved_;
};

}  // namespace

RunResult run_scenario_text(const std::string& text, const std::string& source, const RunOptions& opts) {
  RunResult res;
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    res.exit_code = kExitParse;
    res.message = os.str();
    return res;
  }

  Runner runner;
  Context ctx;
  fs::path out_dir;
  try {
    const Section top(&root, "");
    ctx.kind = top.str("kind");
    ctx.name = top.str("name", stem_of(source));
    top.ignore("description");
    const long long seed = top.integer("seed", 1);
    ctx.seed = opts.seed ? *opts.seed : static_cast<unsigned long long>(seed);
    const std::string output = top.str("output", "");
    const auto k = kinds().find(ctx.kind);
    if (k == kinds().end()) throw ValidationError("unknown kind '" + ctx.kind + "'");
    runner = k->second(top, ctx);
    top.finish();
    res.name = ctx.name;
    const char* env = std::getenv("HJKIT_OUT");
    if (!opts.out_dir.empty()) {
      out_dir = opts.out_dir;
    } else if (env && *env) {
      out_dir = env;
    } else if (!output.empty()) {
      out_dir = output;
    } else {
      out_dir = fs::path("hjkit_out") / ctx.name;
    }
  } catch (const ValidationError& e) {
    res.exit_code = kExitValidation;
    res.message = source + ": " + e.what();
    return res;
  } catch (const Error& e) {
    res.exit_code = kExitNumerical;
    res.message = source + ": " + e.what();
    return res;
  } catch (const std::invalid_argument& e) {
    res.exit_code = kExitValidation;
    res.message = source + ": " + e.what();
    return res;
  }

  Output out;
  try {
    const ThreadCap cap(opts.threads);
    out = runner();
  } catch (const Error& e) {
    res.exit_code = kExitNumerical;
    res.message = source + ": " + e.name() + ": " + e.what();
    return res;
  } catch (const std::invalid_argument& e) {
    res.exit_code = kExitValidation;
    res.message = source + ": " + e.what();
    return res;
  }

  fs::create_directories(out_dir);
  for (const auto& [suffix, table] : out.tables) {
    const std::string p = (out_dir / (ctx.name + suffix + ".csv")).string();
    detail::write_csv(p, table);
    res.files.push_back(p);
  }
  const std::string nd = (out_dir / (ctx.name + ".ndjson")).string();
  detail::write_ndjson(nd, out.records);
  res.files.push_back(nd);
  for (const auto& [suffix, plot] : out.plots) {
    const std::string p = (out_dir / (ctx.name + suffix + ".svg")).string();
    detail::write_svg(p, plot);
    res.files.push_back(p);
  }
  res.records = out.records;
  const bool all = std::all_of(out.records.begin(), out.records.end(), [](const CheckRecord& r) { return r.pass; });
  res.exit_code = all ? kExitOk : kExitCheckFailed;
  if (!all) {
    for (const auto& r : out.records) {
      if (!r.pass) res.message += "check " + r.check + " failed: " + format_number(r.value) + " vs " + format_number(r.tol) + "; ";
    }
  }
  return res;
}

RunResult run_scenario(const std::string& path, const RunOptions& opts) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    RunResult r;
    r.exit_code = kExitParse;
    r.message = path + ": cannot open file";
    return r;
  }
  std::stringstream ss;
  ss << f.rdbuf();
  return run_scenario_text(ss.str(), path, opts);
}

std::string bundled_scenario_dir() {
  if (const char* env = std::getenv("HJKIT_SCENARIOS"); env && *env) return env;
  return HJKIT_SCENARIO_DIR;
}

std::vector<std::string> bundled_scenarios() {
  std::vector<std::string> out;
  const fs::path dir(bundled_scenario_dir());
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".toml") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace hjkit
