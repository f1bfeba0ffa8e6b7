#include "drmpc/scenario_io.hpp"

#include "drmpc/ambiguity.hpp"
#include "drmpc/closedloop.hpp"
#include "drmpc/linalg.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace drmpc {

namespace {

using nlohmann::json;

std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw ScenarioFormatError(field, field + ": " + msg);
}

const json& member(const json& obj, const std::string& base, const std::string& key) {
  if (!obj.is_object()) fail(base, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(join(base, key), "missing field");
  return *it;
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& field) {
  if (!j.is_number_integer()) fail(field, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < 0 || v > 1000000) fail(field, "out of range");
  return static_cast<int>(v);
}

Eigen::VectorXd vector(const json& j, const std::string& field) {
  if (!j.is_array()) fail(field, "expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = number(j[i], field + "[" + std::to_string(i) + "]");
  }
  return v;
}

Eigen::MatrixXd matrix(const json& j, const std::string& field) {
  const int rows = integer(member(j, field, "rows"), join(field, "rows"));
  const int cols = integer(member(j, field, "cols"), join(field, "cols"));
  const Eigen::VectorXd data = vector(member(j, field, "data"), join(field, "data"));
  if (data.size() != static_cast<Eigen::Index>(rows) * cols) {
    fail(join(field, "data"), "has " + std::to_string(data.size()) + " entries, expected " +
                                  std::to_string(rows) + "x" + std::to_string(cols));
  }
  Eigen::MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < cols; ++c) M(i, c) = data(static_cast<Eigen::Index>(i) * cols + c);
  }
  return M;
}

Polytope polytope(const json& j, const std::string& field, Eigen::Index dim) {
  if (j.is_object() && j.contains("whole_space")) {
    if (!j["whole_space"].is_boolean() || !j["whole_space"].get<bool>()) {
      fail(join(field, "whole_space"), "must be true when present");
    }
    return Polytope::whole_space(dim);
  }
  Polytope P(matrix(member(j, field, "H"), join(field, "H")),
             vector(member(j, field, "h"), join(field, "h")));
  if (P.H.rows() != P.h.size()) {
    fail(join(field, "h"), "has " + std::to_string(P.h.size()) + " entries, H has " +
                               std::to_string(P.H.rows()) + " rows");
  }
  if (P.H.rows() > 0 && P.H.cols() != dim) {
    fail(join(field, "H"), "must have " + std::to_string(dim) + " columns");
  }
  if (P.H.rows() == 0) P.H.resize(0, dim);
  return P;
}

using ojson = nlohmann::ordered_json;

ojson to_json(const Eigen::MatrixXd& M) {
  ojson data = ojson::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) data.push_back(M(i, c));
  }
  return ojson{{"rows", M.rows()}, {"cols", M.cols()}, {"data", std::move(data)}};
}

ojson to_json(const Polytope& P) {
  if (P.is_whole_space()) return ojson{{"whole_space", true}};
  return ojson{{"H", to_json(P.H)},
               {"h", std::vector<double>(P.h.data(), P.h.data() + P.h.size())}};
}

// Puts arrays that hold only numbers on one line.
std::string collapse_numeric_arrays(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '[') {
      const size_t close = text.find_first_of("[]{}\"", i + 1);
      if (close != std::string::npos && text[close] == ']') {
        out += '[';
        bool pending_space = false;
        for (size_t j = i + 1; j < close; ++j) {
          const char c = text[j];
          if (c == ' ' || c == '\n') continue;
          if (pending_space) out += ' ';
          out += c;
          pending_space = c == ',';
        }
        out += ']';
        i = close;
        continue;
      }
    }
    out += text[i];
  }
  return out;
}

TerminalKind parse_kind(const json& j, const std::string& field) {
  if (!j.is_string()) fail(field, "expected a string");
  const auto s = j.get<std::string>();
  if (s == "lyapunov") return TerminalKind::kLyapunov;
  if (s == "dare") return TerminalKind::kDare;
  if (s == "user") return TerminalKind::kUser;
  fail(field, "unknown terminal kind '" + s + "' (expected lyapunov, dare or user)");
}

int line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

ScenarioFormatError::ScenarioFormatError(std::string field, const std::string& message, int line)
    : std::runtime_error(message), field_(std::move(field)), line_(line) {}

ScenarioFile parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const int line = line_of(text, e.byte);
    throw ScenarioFormatError("", "JSON syntax error at line " + std::to_string(line) + ": " + e.what(),
                              line);
  }

  ScenarioFile out;
  ScenarioSpec& s = out.spec;
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) fail("name", "expected a string");
    s.name = doc["name"].get<std::string>();
  }
  const json& dims = member(doc, "", "dimensions");
  const int n = integer(member(dims, "dimensions", "n"), "dimensions.n");
  const int m = integer(member(dims, "dimensions", "m"), "dimensions.m");
  const int q = integer(member(dims, "dimensions", "q"), "dimensions.q");
  s.N = integer(member(doc, "", "horizon"), "horizon");
  if (s.N < 1) fail("horizon", "must be at least 1");

  s.A = matrix(member(doc, "", "A"), "A");
  s.B = matrix(member(doc, "", "B"), "B");
  s.G = matrix(member(doc, "", "G"), "G");
  s.Q = matrix(member(doc, "", "Q"), "Q");
  s.R = matrix(member(doc, "", "R"), "R");
  auto expect = [](const Eigen::MatrixXd& M, const char* name, int r, int c) {
    if (M.rows() != r || M.cols() != c) {
      fail(name, "is " + std::to_string(M.rows()) + "x" + std::to_string(M.cols()) + ", expected " +
                     std::to_string(r) + "x" + std::to_string(c));
    }
  };
  expect(s.A, "A", n, n);
  expect(s.B, "B", n, m);
  expect(s.G, "G", n, q);
  expect(s.Q, "Q", n, n);
  expect(s.R, "R", m, m);

  const json& cons = member(doc, "", "constraints");
  s.Z = polytope(member(cons, "constraints", "Z"), "constraints.Z", n + m);
  s.U = polytope(member(cons, "constraints", "U"), "constraints.U", m);
  s.Xf = polytope(member(cons, "constraints", "Xf"), "constraints.Xf", n);
  s.W = polytope(member(cons, "constraints", "W"), "constraints.W", q);

  const json& amb = member(doc, "", "ambiguity");
  s.d.epsilon = number(member(amb, "ambiguity", "epsilon"), "ambiguity.epsilon");
  s.d.sigma_hat = matrix(member(amb, "ambiguity", "sigma_hat"), "ambiguity.sigma_hat");
  expect(s.d.sigma_hat, "ambiguity.sigma_hat", q, q);

  if (doc.contains("sigma_true")) {
    out.sigma_true = matrix(doc["sigma_true"], "sigma_true");
    expect(*out.sigma_true, "sigma_true", q, q);
  }

  const json& term = member(doc, "", "terminal");
  out.terminal = parse_kind(member(term, "terminal", "kind"), "terminal.kind");
  try {
    switch (out.terminal) {
      case TerminalKind::kLyapunov:
        s.P = solve_dlyap(s.A, s.Q);
        break;
      case TerminalKind::kDare: {
        const TerminalIngredients ti = solve_dare(s.A, s.B, s.Q, s.R);
        s.P = ti.P;
        s.terminal_gain = ti.K;
        break;
      }
      case TerminalKind::kUser:
        s.P = matrix(member(term, "terminal", "P"), "terminal.P");
        expect(s.P, "terminal.P", n, n);
        if (term.contains("K")) {
          s.terminal_gain = matrix(term["K"], "terminal.K");
          expect(*s.terminal_gain, "terminal.K", m, n);
        }
        break;
    }
  } catch (const ScenarioFormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw ScenarioInvariantError(std::string("terminal: ") + e.what());
  }
  return out;
}

std::vector<std::string> validate_scenario(const ScenarioFile& file) {
  const ScenarioSpec& s = file.spec;
  std::vector<std::string> notes;
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioInvariantError(e.what());
  }
  if (s.terminal_gain) {
    const TerminalReport r = verify_terminal(s, TerminalIngredients{s.P, *s.terminal_gain, file.terminal});
    for (const TerminalCheck* c : {&r.decrease, &r.invariance, &r.admissibility, &r.interior}) {
      if (!c->passed) {
        std::ostringstream os;
        os << "terminal ingredients rejected: " << c->detail << " (margin " << c->margin << ")";
        throw ScenarioInvariantError(os.str());
      }
    }
  }
  switch (check_membership_D(s.W, s.d)) {
    case Membership::kOk:
      break;
    case Membership::kConservativeOk:
      notes.push_back("ambiguity set realizability is certified only conservatively");
      break;
    case Membership::kReject:
      throw ScenarioInvariantError(
          "ambiguity set rejected: the nominal covariance is not realizable on W by the "
          "scaled-uniform sampler");
  }
  if (file.sigma_true) {
    try {
      DisturbanceModel check(*file.sigma_true, s.W);
    } catch (const std::invalid_argument& e) {
      throw ScenarioInvariantError(std::string("sigma_true: ") + e.what());
    }
  }
  return notes;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioFormatError("", "cannot open scenario file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  ScenarioFile f = parse_scenario(buf.str());
  validate_scenario(f);
  return f;
}

std::string dump_scenario(const ScenarioFile& file) {
  const ScenarioSpec& s = file.spec;
  ojson doc;
  doc["name"] = s.name;
  doc["dimensions"] = {{"n", s.n()}, {"m", s.m()}, {"q", s.q()}};
  doc["horizon"] = s.N;
  doc["A"] = to_json(s.A);
  doc["B"] = to_json(s.B);
  doc["G"] = to_json(s.G);
  doc["Q"] = to_json(s.Q);
  doc["R"] = to_json(s.R);
  doc["constraints"] = {{"Z", to_json(s.Z)}, {"U", to_json(s.U)}, {"Xf", to_json(s.Xf)},
                        {"W", to_json(s.W)}};
  doc["ambiguity"] = {{"epsilon", s.d.epsilon}, {"sigma_hat", to_json(s.d.sigma_hat)}};
  ojson term = {{"kind", to_string(file.terminal)}};
  if (file.terminal == TerminalKind::kUser) {
    term["P"] = to_json(s.P);
    if (s.terminal_gain) term["K"] = to_json(*s.terminal_gain);
  }
  doc["terminal"] = std::move(term);
  if (file.sigma_true) doc["sigma_true"] = to_json(*file.sigma_true);
  return collapse_numeric_arrays(doc.dump(2)) + "\n";
}

}  // namespace drmpc
