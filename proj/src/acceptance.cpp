#include "hjkit/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "hjkit/hjfield.hpp"
#include "hjkit/optics.hpp"
#include "hjkit/scenario.hpp"
#include "hjkit/systems.hpp"

namespace hjkit {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

/// Collects named measurements and the verdict for one criterion.
class Verdict {
 public:
  void measure(const std::string& what, double value, double tol, bool ok) {
    detail_ << (detail_.tellp() > 0 ? "; " : "") << what << " " << num(value) << " (tol " << num(tol)
            << (ok ? ")" : ", FAIL)");
    pass_ = pass_ && ok;
  }
  void at_most(const std::string& what, double value, double tol) { measure(what, value, tol, value <= tol); }
  void note(const std::string& text) { detail_ << (detail_.tellp() > 0 ? "; " : "") << text; }
  void fail(const std::string& text) {
    note(text);
    pass_ = false;
  }
  bool pass() const { return pass_; }
  std::string detail() const { return detail_.str(); }

 private:
  std::ostringstream detail_;
  bool pass_ = true;
};

struct NamedSystem {
  std::string name;
  LagrangianSystem lag;
};

/// The mechanical systems that bundled scenarios use.
std::vector<NamedSystem> bundled_systems() {
  return {{"free_particle", free_particle(2)},
          {"harmonic_oscillator", harmonic_oscillator(2, 1.0)},
          {"anharmonic", anharmonic_oscillator(1.0)},
          {"magnetic", magnetic_particle(2.0, 0.1)},
          {"optical_axial", optical_lagrangian(Medium::linear(1.0, vec({0.0, 0.1})))}};
}

CriterionResult legendre_round_trip() {
  const auto start = Clock::now();
  Verdict v;
  double worst_l = 0.0;
  double worst_det = 0.0;
  for (const auto& [name, sys] : bundled_systems()) {
    const HamiltonianSystem ham = to_hamiltonian(sys);
    UniformSource rng(2024);
    const int n = sys.dim();
    for (int k = 0; k < 100; ++k) {
      VarState s{Vec(n), Vec(n), rng.uniform(-1, 1)};
      for (int i = 0; i < n; ++i) s.q(i) = rng.uniform(-1.5, 1.5);
      for (int i = 0; i < n; ++i) s.qdot(i) = rng.uniform(-1.5, 1.5);
      const Vec p = sys.d_qdot(s);
      const PhasePoint x{s.q, p, s.t};
      worst_l = std::max(worst_l, std::abs(sys.value(s) - (s.qdot.dot(p) - ham.value(x))));
      const double dl = sys.velocity_hessian(s).determinant();
      const double dh = ham.momentum_hessian(x).determinant();
      worst_det = std::max(worst_det, std::abs(dl * dh - 1.0));
    }
  }
  v.at_most("|L - (qdot.p - H)|", worst_l, 1e-8);
  v.at_most("|det L_vv det H_pp - 1|", worst_det, 1e-6);
  return {1, "Legendre round trip", v.pass(), v.detail(), since(start), 1.0};
}

CriterionResult hilbert_independence() {
  const auto start = Clock::now();
  Verdict v;
  const HamiltonianSystem ho = harmonic_hamiltonian(1, 1.0);
  HypersurfaceFamily fam(1, [](const Vec& q, double t) { return -0.5 * q(0) * q(0) * std::tan(t); },
                         Domain(Vec::Constant(1, -10), Vec::Constant(1, 10), {-1.4, 1.4}));
  fam.with_gradient([](const Vec& q, double t) -> Vec { return -q * std::tan(t); },
                    [](const Vec& q, double t) { return -0.5 * q(0) * q(0) / (std::cos(t) * std::cos(t)); });
  const SpacetimePoint a{vec({0.2}), -0.3};
  const SpacetimePoint b{vec({1.1}), 0.6};

  SpacetimePath bent;
  bent.q = [](double l) { return vec({0.2 + 0.9 * l + 0.4 * std::sin(kPi * l)}); };
  bent.t = [](double l) { return -0.3 + 0.9 * l * l; };
  SpacetimePath detour;
  detour.q = [](double l) { return vec({0.2 + 0.9 * l * l * l - 0.5 * std::sin(2 * kPi * l)}); };
  detour.t = [](double l) { return -0.3 + 0.9 * std::sqrt(l) + 0.2 * std::sin(kPi * l); };
  const double i1 = hilbert_integral(ho, fam, SpacetimePath::segment(a, b));
  const double i2 = hilbert_integral(ho, fam, bent);
  const double i3 = hilbert_integral(ho, fam, detour, 4000);
  const double spread = std::max({i1, i2, i3}) - std::min({i1, i2, i3});
  v.at_most("path spread", spread, 1e-7);

  SpacetimePath loop;
  loop.q = [](double l) { return vec({0.5 + 0.4 * std::cos(2 * kPi * l)}); };
  loop.t = [](double l) { return 0.1 + 0.5 * std::sin(2 * kPi * l); };
  v.at_most("closed loop", std::abs(hilbert_integral(ho, fam, loop)), 1e-7);
  return {3, "Hilbert integral path independence", v.pass(), v.detail(), since(start), 1.0};
}

CriterionResult degeneracy_guard() {
  const auto start = Clock::now();
  Verdict v;
  try {
    to_hamiltonian(fermat_time_lagrangian(Medium::homogeneous(1.0)));
    v.fail("Fermat integrand accepted");
  } catch (const DegenerateLagrangian&) {
    v.note("Fermat integrand rejected with DegenerateLagrangian");
  }
  for (const auto& [name, sys] : bundled_systems()) {
    const HamiltonianSystem ham = to_hamiltonian(sys);
    const int n = sys.dim();
    double biggest = 0.0;
    for (double a : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      for (double b : {-0.5, 0.0, 0.5}) {
        biggest = std::max(biggest, std::abs(ham.value({Vec::Constant(n, a), Vec::Constant(n, b), 0.0})));
      }
    }
    if (!(biggest > 0.0)) v.fail(name + ": H vanishes on the lattice");
  }
  return {8, "Degeneracy guard", v.pass(), v.detail(), since(start), 0.0};
}

struct ScenarioRun {
  RunResult result;
  double seconds = 0.0;
};

std::map<std::string, ScenarioRun> run_all(const fs::path& dir, unsigned threads) {
  std::map<std::string, ScenarioRun> out;
  for (const auto& path : bundled_scenarios()) {
    const std::string stem = fs::path(path).stem().string();
    RunOptions o;
    o.out_dir = (dir / stem).string();
    o.threads = threads;
    const auto start = Clock::now();
    ScenarioRun r{run_scenario(path, o), 0.0};
    r.seconds = since(start);
    out.emplace(stem, std::move(r));
  }
  return out;
}

/// Criterion built from the embedded checks of bundled scenarios.
CriterionResult from_scenarios(int id, const std::string& title, double budget,
                               const std::map<std::string, ScenarioRun>& runs,
                               const std::vector<std::string>& names) {
  Verdict v;
  double seconds = 0.0;
  for (const auto& name : names) {
    const auto it = runs.find(name);
    if (it == runs.end()) {
      v.fail("scenario " + name + " missing");
      continue;
    }
    seconds += it->second.seconds;
    const RunResult& r = it->second.result;
    if (r.exit_code != kExitOk && r.records.empty()) {
      v.fail(name + ": exit " + std::to_string(r.exit_code) + " " + r.message);
      continue;
    }
    for (const auto& rec : r.records) {
      v.measure(name + "." + rec.check, rec.value, rec.tol, rec.pass);
    }
  }
  if (budget > 0 && seconds >= budget) v.fail("over the runtime budget");
  return {id, title, v.pass(), v.detail(), seconds, budget};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

CriterionResult cli_round_trip(const std::map<std::string, ScenarioRun>& first, const fs::path& dir1,
                               const fs::path& dir2, unsigned threads) {
  const auto start = Clock::now();
  Verdict v;
  for (const auto& [name, run] : first) {
    if (run.result.exit_code != kExitOk) {
      v.fail(name + " exited " + std::to_string(run.result.exit_code));
    }
  }
  const auto second = run_all(dir2, threads);
  std::size_t compared = 0;
  for (const auto& [name, run] : first) {
    for (const auto& file : run.result.files) {
      const fs::path p(file);
      if (p.extension() == ".svg") continue;
      const fs::path other = dir2 / fs::relative(p, dir1);
      ++compared;
      if (slurp(p) != slurp(other)) v.fail(name + ": " + p.filename().string() + " differs between runs");
    }
  }
  v.note(std::to_string(first.size()) + " scenarios, " + std::to_string(compared) + " data files compared");
  return {9, "CLI scenarios exit 0 and repeat byte for byte", v.pass(), v.detail(), since(start), 0.0};
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts) {
  const fs::path base(opts.out_dir);
  const fs::path dir1 = base / "run1";
  const fs::path dir2 = base / "run2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);

  std::vector<CriterionResult> out;
  auto guarded = [&](int id, const std::string& title, auto&& fn) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back({id, title, false, std::string("unexpected error: ") + e.what(), 0.0, 0.0});
    }
  };
  guarded(1, "Legendre round trip", legendre_round_trip);
  const auto runs = run_all(dir1, opts.threads);
  out.push_back(from_scenarios(2, "Equidistance of the spreading family", 1.0, runs, {"spreading_family"}));
  guarded(3, "Hilbert integral path independence", hilbert_independence);
  out.push_back(from_scenarios(4, "Characteristics: eikonal from a line", 5.0, runs, {"eikonal_line"}));
  out.push_back(
      from_scenarios(5, "Characteristic function: free and harmonic", 10.0, runs, {"charfn_free", "charfn_harmonic"}));
  out.push_back(from_scenarios(6, "Optics: Snell, Bouguer, Huygens", 10.0, runs,
                               {"snell", "bouguer_slab", "huygens_circle", "huygens_graded"}));
  out.push_back(from_scenarios(7, "Wave mechanics: propagator, Bohm, residuals", 60.0, runs, {"free_packet", "residual_convergence"}));
  guarded(8, "Degeneracy guard", degeneracy_guard);
  out.push_back(cli_round_trip(runs, dir1, dir2, opts.threads));
  return out;
}

std::string format_criterion(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.pass ? "[PASS] " : "[FAIL] ") << r.id << " " << r.title << " (" << num(r.seconds) << " s";
  if (r.budget > 0) os << " / " << num(r.budget) << " s";
  os << "): " << r.detail;
  return os.str();
}

}  // namespace hjkit
