// Command-line front end: run, sweep, verify, predict.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "sfspec/errors.hpp"
#include "sfspec/harness.hpp"
#include "sfspec/verify.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw sfspec::ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// --inputs accepts inline JSON or a path to a JSON file.
std::string inline_or_file(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\n");
  if (first != std::string::npos && arg[first] == '{') return arg;
  return slurp(arg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Schedule-free spectral optimizer experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, grid_path, suite = "all", calc, inputs;
  int jobs = 1;
  std::uint64_t verify_seed = 12345;

  auto* run_cmd = app.add_subcommand("run", "Run one configuration");
  run_cmd->add_option("--config", config_path, "Run config (JSON)")->required();
  run_cmd->add_option("--out", out_dir, "Output directory")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "Run the Cartesian product of a grid");
  sweep_cmd->add_option("--config", config_path, "Base run config (JSON)")->required();
  sweep_cmd->add_option("--grid", grid_path, "Grid of dotted config paths to value lists (JSON)")->required();
  sweep_cmd->add_option("--out", out_dir, "Output directory")->required();
  sweep_cmd->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);

  auto* verify_cmd = app.add_subcommand("verify", "Run invariant suites");
  verify_cmd->add_option("--suite", suite, "polar|averaging|lemma1|lemma2|eigen|bound|gradcheck|all");
  verify_cmd->add_option("--seed", verify_seed, "Seed for randomized checks");

  auto* predict_cmd = app.add_subcommand("predict", "Evaluate a theory calculator");
  predict_cmd->add_option("--calc", calc, "Calculator name")->required();
  predict_cmd->add_option("--inputs", inputs, "Inputs as inline JSON or a JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : sfspec::kExitConfig;
  }

  try {
    if (*run_cmd) {
      const sfspec::RunConfig cfg = sfspec::parse_run_config(slurp(config_path));
      const int rc = sfspec::run_to_dir(cfg, out_dir);
      if (rc == sfspec::kExitDivergence) {
        std::cerr << "run diverged; see " << (std::filesystem::path(out_dir) / "summary.json").string() << '\n';
      }
      return rc;
    }
    if (*sweep_cmd) {
      const auto result = sfspec::sweep(slurp(config_path), slurp(grid_path), out_dir, jobs);
      sfspec::write_sweep_csv(std::cout, result);
      for (const auto& row : result.rows)
        if (row.summary.diverged) return sfspec::kExitDivergence;
      return sfspec::kExitOk;
    }
    if (*verify_cmd) {
      sfspec::VerifyOptions opts;
      opts.seed = verify_seed;
      const auto report = sfspec::verify(suite, opts);
      std::cout << sfspec::report_json(report) << '\n';
      return report.passed() ? sfspec::kExitOk : sfspec::kExitVerify;
    }
    if (*predict_cmd) {
      std::cout << sfspec::predict(calc, inline_or_file(inputs)) << '\n';
      return sfspec::kExitOk;
    }
  } catch (const sfspec::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return sfspec::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return sfspec::kExitOk;
}
