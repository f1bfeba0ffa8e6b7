#include "experiment.hpp"

#include "drmpc/scenario_io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <iostream>

namespace {

using drmpc::experiment::Config;

// Flags win over the environment, which wins over the config file.
void apply_overrides(Config& cfg, const CLI::App& run, std::uint64_t seed, const std::string& out_dir,
                     int jobs, double gap_tol) {
  if (const char* env = std::getenv("DRMPC_OUT_DIR"); env && *env) cfg.output_dir = env;
  if (const char* env = std::getenv("DRMPC_JOBS"); env && *env) {
    try {
      cfg.jobs = std::stoi(env);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("DRMPC_JOBS is not an integer: ") + env);
    }
  }
  if (run.count("--seed")) cfg.seed = seed;
  if (run.count("--out-dir")) cfg.output_dir = out_dir;
  if (run.count("--jobs")) cfg.jobs = jobs;
  if (run.count("--gap-tol")) cfg.solver.gap_tol = gap_tol;
  cfg.solver.validate();
}

int run_command(const std::string& path, const CLI::App& run, std::uint64_t seed,
                const std::string& out_dir, int jobs, double gap_tol) {
  Config cfg = drmpc::experiment::load_config(path);
  apply_overrides(cfg, run, seed, out_dir, jobs, gap_tol);
  std::cout << "experiment " << drmpc::experiment::to_string(cfg.kind) << " -> "
            << cfg.output_dir.string() << std::endl;
  const auto result = drmpc::experiment::run_experiment(cfg);
  for (const auto& c : result.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
  }
  std::cout << result.files.size() << " files written, manifest "
            << (cfg.output_dir / "manifest.json").string() << '\n';
  return result.passed() ? 0 : 1;
}

int validate_command(const std::string& path) {
  const drmpc::ScenarioFile f = drmpc::load_scenario(path);
  const auto notes = drmpc::validate_scenario(f);
  const auto& s = f.spec;
  std::cout << "ok: " << (s.name.empty() ? path : s.name) << " n=" << s.n() << " m=" << s.m()
            << " q=" << s.q() << " N=" << s.N << " epsilon=" << s.d.epsilon
            << " terminal=" << drmpc::to_string(f.terminal) << '\n';
  for (const auto& n : notes) std::cout << "note: " << n << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributionally robust MPC experiments"};
  app.require_subcommand(1);

  std::string config_path, scenario_path, out_dir;
  std::uint64_t seed = 1;
  int jobs = 1;
  double gap_tol = 1e-6;

  auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run->add_option("config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Master seed for disturbance streams");
  run->add_option("--out-dir", out_dir, "Output directory (env DRMPC_OUT_DIR)");
  run->add_option("--jobs", jobs, "Worker threads, 0 for all cores (env DRMPC_JOBS)")
      ->check(CLI::NonNegativeNumber);
  run->add_option("--gap-tol", gap_tol, "Certificate gap tolerance")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Parse and check a scenario file");
  validate->add_option("scenario", scenario_path, "Scenario JSON")->required();

  CLI11_PARSE(app, argc, argv);

  // Errors go to stderr as one JSON object.
  nlohmann::ordered_json report{{"status", "error"}};
  try {
    if (*run) return run_command(config_path, *run, seed, out_dir, jobs, gap_tol);
    return validate_command(scenario_path);
  } catch (const drmpc::ScenarioFormatError& e) {
    report["kind"] = "format";
    report["field"] = e.field();
    if (e.line() > 0) report["line"] = e.line();
    report["message"] = e.what();
  } catch (const drmpc::ScenarioInvariantError& e) {
    report["kind"] = "invariant";
    report["message"] = e.what();
  } catch (const std::exception& e) {
    report["kind"] = "runtime";
    report["message"] = e.what();
  }
  std::cerr << report.dump() << '\n';
  return 2;
}
