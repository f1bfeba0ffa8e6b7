#pragma once

#include "drmpc/closedloop.hpp"
#include "drmpc/scenario_io.hpp"
#include "drmpc/solver.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace drmpc::experiment {

enum class Kind { kSolveOnce, kConvergenceCompare, kClosedLoop, kEpsilonSweep, kScalability };

std::string_view to_string(Kind k);
Kind parse_kind(std::string_view s);

struct Config {
  /// Scenario path; relative paths resolve against the config file's directory.
  std::filesystem::path scenario;
  Kind kind = Kind::kSolveOnce;
  std::vector<Controller> controllers{Controller::kDrmpc};
  /// Initial state; defaults to zero.
  std::optional<Eigen::VectorXd> x0;
  /// Overrides the scenario's radius.
  std::optional<double> epsilon;
  std::vector<double> epsilon_grid;
  int T = 100;
  int S = 1;
  std::uint64_t seed = 1;
  int jobs = 1;
  /// Frank-Wolfe iterations for convergence-compare.
  int fw_iterations = 1000;
  /// Per-step solve-time limit checked by the scalability experiment.
  double max_step_seconds = 60.0;
  SolverSettings solver;
  std::filesystem::path output_dir = "out";
};

/// Parses a JSON config. Throws ScenarioFormatError naming the offending field.
Config parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
Config load_config(const std::filesystem::path& path);
/// JSON echo of the effective configuration (after overrides), written into the manifest.
std::string config_json(const Config& cfg);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct OutputFile {
  /// Relative to the output directory.
  std::string path;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunResult {
  std::vector<CheckResult> checks;
  std::vector<OutputFile> files;
  bool passed() const;
};

/// Runs the experiment, writes CSVs plus manifest.json into cfg.output_dir, and on any failed
/// check also failure_report.json. Exceptions from the scenario or the solver propagate.
RunResult run_experiment(const Config& cfg);

/// Lower-case hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace drmpc::experiment
