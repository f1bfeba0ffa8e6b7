#pragma once

#include "drmpc/model.hpp"
#include "drmpc/terminal.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace drmpc {

/// Malformed document or missing/mistyped field. `field` is a dotted path such as
/// "constraints.U.h"; `line` is set for JSON syntax errors.
class ScenarioFormatError : public std::runtime_error {
 public:
  ScenarioFormatError(std::string field, const std::string& message, int line = 0);
  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  std::string field_;
  int line_ = 0;
};

/// A parsed scenario failed a model invariant (PSD cost, bounded sets, terminal conditions,
/// realizability of the ambiguity set).
class ScenarioInvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioFile {
  ScenarioSpec spec;
  TerminalKind terminal = TerminalKind::kUser;
  /// Covariance of the simulated disturbances, when the file provides one.
  std::optional<Eigen::MatrixXd> sigma_true;
};

/// Parses a scenario document without checking model invariants.
ScenarioFile parse_scenario(std::string_view json_text);
/// Reads, parses and validates. Throws ScenarioFormatError or ScenarioInvariantError.
ScenarioFile load_scenario(const std::filesystem::path& path);

/// Runs every invariant check; returns non-fatal notes (for example a conservative membership
/// certificate). Throws ScenarioInvariantError on the first violation.
std::vector<std::string> validate_scenario(const ScenarioFile& file);

/// Serializes with shortest round-trip numbers, so parse(dump(s)) reproduces s exactly.
std::string dump_scenario(const ScenarioFile& file);

}  // namespace drmpc
