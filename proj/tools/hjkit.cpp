#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hjkit/acceptance.hpp"
#include "hjkit/scenario.hpp"

namespace {

int report(const hjkit::RunResult& r) {
  for (const auto& rec : r.records) {
    std::printf("%-34s %-24s tol %-10s %s\n", rec.check.c_str(), hjkit::format_number(rec.value).c_str(),
                hjkit::format_number(rec.tol).c_str(), rec.pass ? "pass" : "FAIL");
  }
  for (const auto& f : r.files) std::printf("wrote %s\n", f.c_str());
  if (!r.message.empty()) std::fprintf(stderr, "%s\n", r.message.c_str());
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hamilton-Jacobi toolkit scenario runner"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario file");
  std::string path;
  hjkit::RunOptions opts;
  unsigned long long seed = 0;
  run->add_option("scenario", path, "Scenario TOML file")->required();
  run->add_option("--out", opts.out_dir, "Output directory");
  run->add_option("--threads", opts.threads, "Worker cap (0 = all cores)");
  auto* seed_opt = run->add_option("--seed", seed, "Override the scenario seed");

  app.add_subcommand("list", "List bundled scenarios");

  auto* check = app.add_subcommand("check", "Run the acceptance suite");
  std::string check_out = "hjkit_check";
  unsigned check_threads = 0;
  check->add_option("--out", check_out, "Scratch directory for scenario outputs");
  check->add_option("--threads", check_threads, "Worker cap (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : hjkit::kExitParse;
  }

  if (run->parsed()) {
    if (*seed_opt) opts.seed = seed;
    return report(hjkit::run_scenario(path, opts));
  }
  if (app.got_subcommand("list")) {
    for (const auto& s : hjkit::bundled_scenarios()) std::cout << s << "\n";
    return 0;
  }
  const auto results = hjkit::run_acceptance({check_out, check_threads});
  bool all = true;
  for (const auto& r : results) {
    std::cout << hjkit::format_criterion(r) << "\n";
    all = all && r.pass;
  }
  return all ? 0 : hjkit::kExitCheckFailed;
}
