#pragma once

/// @file acceptance.hpp
/// @brief The acceptance suite behind `hjkit check` and the acceptance test:
/// nine criteria, each with its tolerances and a runtime budget.

#include <string>
#include <vector>

namespace hjkit {

struct AcceptanceOptions {
  /// Scratch directory; scenario outputs go to <out_dir>/run1 and run2.
  std::string out_dir = "hjkit_check";
  unsigned threads = 0;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  /// Measured values and the first failure, if any.
  std::string detail;
  double seconds = 0.0;
  /// Runtime budget in seconds; 0 means none.
  double budget = 0.0;
};

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts = {});

/// "[PASS] 3 title (0.12 s / 1 s): detail".
std::string format_criterion(const CriterionResult& r);

}  // namespace hjkit
