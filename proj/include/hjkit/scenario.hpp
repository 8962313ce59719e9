#pragma once

/// @file scenario.hpp
/// @brief Declarative TOML scenarios: validation, dispatch to the library and
/// deterministic CSV / NDJSON / SVG output.

#include <optional>
#include <string>
#include <vector>

namespace hjkit {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitParse = 2,
  kExitValidation = 3,
  kExitNumerical = 4,
};

/// One embedded check: NDJSON {"check", "value", "tol", "pass"}.
struct CheckRecord {
  std::string check;
  double value = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct RunOptions {
  /// Output directory; empty means HJKIT_OUT, then the scenario's `output`
  /// key, then ./hjkit_out/<name>.
  std::string out_dir;
  unsigned threads = 0;
  std::optional<unsigned long long> seed;
};

struct RunResult {
  int exit_code = kExitOk;
  std::string message;
  std::string name;
  std::vector<CheckRecord> records;
  /// Written files, in write order.
  std::vector<std::string> files;
};

RunResult run_scenario(const std::string& path, const RunOptions& opts = {});
/// `source` names the text in messages.
RunResult run_scenario_text(const std::string& text, const std::string& source, const RunOptions& opts = {});

/// Directory of the scenarios shipped with the sources.
std::string bundled_scenario_dir();
/// Bundled scenario files, sorted by name.
std::vector<std::string> bundled_scenarios();

/// %.17g, with NaN and infinities spelled nan / inf / -inf.
std::string format_number(double v);

}  // namespace hjkit
