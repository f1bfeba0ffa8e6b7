#include "experiment.hpp"

#include "drmpc/ambiguity.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace drmpc::experiment {

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw ScenarioFormatError(field, "config " + field + ": " + msg);
}

template <typename T>
T get(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    fail(field, "has the wrong type");
  }
}

Method parse_method(const std::string& s) {
  if (s == "nt") return Method::kNewtonType;
  if (s == "fw") return Method::kFrankWolfe;
  fail("solver.method", "unknown method '" + s + "' (expected nt or fw)");
}

StepRule parse_step(const std::string& s) {
  if (s == "fully-adaptive") return StepRule::kFullyAdaptive;
  if (s == "adaptive") return StepRule::kAdaptive;
  fail("solver.step", "unknown step rule '" + s + "' (expected fully-adaptive or adaptive)");
}

SolverSettings parse_solver(const json& j) {
  SolverSettings s;
  if (!j.is_object()) fail("solver", "expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string field = "solver." + key;
    if (key == "method") s.method = parse_method(get<std::string>(value, field));
    else if (key == "step") s.step = parse_step(get<std::string>(value, field));
    else if (key == "beta") s.beta = get<double>(value, field);
    else if (key == "zeta") s.zeta = get<double>(value, field);
    else if (key == "tau") s.tau = get<double>(value, field);
    else if (key == "gap_tol") s.gap_tol = get<double>(value, field);
    else if (key == "max_iter") s.max_iter = get<int>(value, field);
    else if (key == "inner_tol") s.inner_tol = get<double>(value, field);
    else if (key == "record_time") s.record_time = get<bool>(value, field);
    else fail(field, "unknown key");
  }
  return s;
}

const char* method_name(Method m) { return m == Method::kNewtonType ? "nt" : "fw"; }
const char* step_name(StepRule r) {
  return r == StepRule::kFullyAdaptive ? "fully-adaptive" : "adaptive";
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

class Writer {
 public:
  explicit Writer(fs::path dir) : dir_(std::move(dir)) {}

  std::ofstream open(const std::string& rel) {
    const fs::path p = dir_ / rel;
    fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    written_.push_back(rel);
    return os;
  }

  std::vector<OutputFile> files() const {
    std::vector<OutputFile> out;
    for (const auto& rel : written_) {
      const fs::path p = dir_ / rel;
      out.push_back(OutputFile{rel, sha256_file(p), fs::file_size(p)});
    }
    std::sort(out.begin(), out.end(),
              [](const OutputFile& a, const OutputFile& b) { return a.path < b.path; });
    return out;
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> written_;
};

// Shortest round-trip representation, as in the library's CSV writers.
std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_policy(std::ostream& os, const PolicyParams& theta) {
  os << "block,row,col,value\n";
  auto num = [&](double v) { os << shortest(v); };
  for (Eigen::Index i = 0; i < theta.v.size(); ++i) {
    os << "v," << i << ",0,";
    num(theta.v(i));
    os << '\n';
  }
  for (Eigen::Index c = 0; c < theta.M.cols(); ++c) {
    for (Eigen::Index i = 0; i < theta.M.rows(); ++i) {
      if (theta.M(i, c) == 0.0) continue;
      os << "M," << i << ',' << c << ',';
      num(theta.M(i, c));
      os << '\n';
    }
  }
}

CheckResult check(std::string name, bool ok, std::string detail) {
  return CheckResult{std::move(name), ok, std::move(detail)};
}

std::string traj_name(Controller c, int s) {
  std::ostringstream os;
  os << to_string(c) << "/trajectory_" << std::setw(4) << std::setfill('0') << s << ".csv";
  return os.str();
}

struct Context {
  const Config& cfg;
  ScenarioFile scenario;
  Eigen::VectorXd x0;
  Writer writer;
  RunResult result;
  ojson timings = ojson::object();
  ojson summary = ojson::object();
};

void run_solve_once(Context& ctx, const SolverSettings& settings, const std::string& prefix) {
  DrmpcSolver solver(ctx.scenario.spec, settings);
  Stopwatch sw;
  const DrmpcSolution sol = solver.solve(ctx.x0);
  ctx.timings[prefix + "solve"] = sw.seconds();
  {
    auto os = ctx.writer.open(prefix + "trace.csv");
    sol.trace.write_csv(os);
  }
  {
    auto os = ctx.writer.open(prefix + "policy.csv");
    write_policy(os, sol.theta);
  }
  ctx.summary[prefix + "f"] = sol.f;
  ctx.summary[prefix + "gap"] = sol.gap;
  ctx.summary[prefix + "iterations"] = sol.iterations;
  ctx.result.checks.push_back(check(prefix + "converged", sol.gap <= settings.gap_tol,
                                    "gap " + format_double(sol.gap) + " after " +
                                        std::to_string(sol.iterations) + " iterations"));
}

void run_convergence_compare(Context& ctx) {
  struct Variant {
    const char* name;
    Method method;
    StepRule step;
  };
  const Variant variants[] = {{"fw_a", Method::kFrankWolfe, StepRule::kAdaptive},
                              {"fw_fa", Method::kFrankWolfe, StepRule::kFullyAdaptive},
                              {"nt_a", Method::kNewtonType, StepRule::kAdaptive},
                              {"nt_fa", Method::kNewtonType, StepRule::kFullyAdaptive}};
  std::optional<double> beta = ctx.cfg.solver.beta;
  if (!beta) {
    SolverSettings probe = ctx.cfg.solver;
    probe.step = StepRule::kFullyAdaptive;
    const DrmpcSolver solver(ctx.scenario.spec, probe);
    beta = estimate_smoothness_over_ball(solver.stacked(), ctx.scenario.spec.d, ctx.scenario.spec.N);
  }
  ctx.summary["beta_adaptive"] = *beta;
  for (const Variant& v : variants) {
    SolverSettings s = ctx.cfg.solver;
    s.method = v.method;
    s.step = v.step;
    if (v.step == StepRule::kAdaptive) s.beta = *beta;
    if (v.method == Method::kFrankWolfe) s.max_iter = ctx.cfg.fw_iterations;
    DrmpcSolver solver(ctx.scenario.spec, s);
    Stopwatch sw;
    const DrmpcSolution sol = solver.solve(ctx.x0);
    ctx.timings[v.name] = sw.seconds();
    auto os = ctx.writer.open(std::string("trace_") + v.name + ".csv");
    sol.trace.write_csv(os);
    ctx.summary[std::string(v.name) + "_gap"] = sol.gap;
    ctx.summary[std::string(v.name) + "_iterations"] = sol.iterations;
    if (v.method == Method::kNewtonType && v.step == StepRule::kFullyAdaptive) {
      ctx.result.checks.push_back(check("nt_fa_converged", sol.gap <= s.gap_tol,
                                        "gap " + format_double(sol.gap) + " after " +
                                            std::to_string(sol.iterations) + " iterations"));
    }
  }
}

DisturbanceModel disturbance(const ScenarioFile& f) {
  return DisturbanceModel(f.sigma_true ? *f.sigma_true : f.spec.d.sigma_hat, f.spec.W);
}

ClosedLoopSettings closed_loop_settings(const Config& cfg) {
  ClosedLoopSettings cl;
  cl.T = cfg.T;
  cl.S = cfg.S;
  cl.seed = cfg.seed;
  cl.jobs = cfg.jobs;
  cl.solver = cfg.solver;
  return cl;
}

void run_closed_loop(Context& ctx, const std::vector<Controller>& controllers,
                     const ClosedLoopSettings& cl) {
  const DisturbanceModel dist = disturbance(ctx.scenario);
  auto summary_os = ctx.writer.open("summary.csv");
  summary_os << "controller,realizations,failures,nonconverged_steps,final_mean_cost,final_std_cost\n";
  for (Controller c : controllers) {
    Stopwatch sw;
    const SimulationResult res = simulate(ctx.scenario.spec, ctx.x0, dist, cl, c);
    ctx.timings[std::string(to_string(c))] = sw.seconds();
    int nonconverged = 0;
    std::int64_t slowest = 0;
    for (const auto& r : res.realizations) {
      auto os = ctx.writer.open(traj_name(c, r.s));
      write_trajectory_csv(os, r);
      for (const auto& st : r.steps) {
        nonconverged += st.converged ? 0 : 1;
        slowest = std::max(slowest, st.solve_ns);
      }
    }
    const int failures = res.failures();
    std::ostringstream detail;
    detail << failures << " of " << res.realizations.size() << " realizations failed";
    for (const auto& r : res.realizations) {
      if (r.failed) {
        detail << "; s=" << r.s << " step " << r.failed_step << ": " << r.failure;
        break;
      }
    }
    ctx.result.checks.push_back(check(std::string(to_string(c)) + "_no_failures", failures == 0, detail.str()));
    ctx.summary[std::string(to_string(c)) + "_nonconverged_steps"] = nonconverged;
    ctx.summary[std::string(to_string(c)) + "_max_step_seconds"] = 1e-9 * static_cast<double>(slowest);

    summary_os << to_string(c) << ',' << res.realizations.size() - static_cast<size_t>(failures) << ','
               << failures << ',' << nonconverged << ',';
    if (failures < static_cast<int>(res.realizations.size())) {
      const AggregateStats st = aggregate(res);
      auto os = ctx.writer.open(std::string(to_string(c)) + "/aggregate.csv");
      write_aggregate_csv(os, st);
      if (!st.mean_cost.empty()) {
        summary_os << shortest(st.mean_cost.back()) << ',' << shortest(st.std_cost.back());
      } else {
        summary_os << ',';
      }
    } else {
      summary_os << ',';
    }
    summary_os << '\n';
    if (cl.solver.record_time) {
      const double limit = ctx.cfg.max_step_seconds;
      const double worst = 1e-9 * static_cast<double>(slowest);
      ctx.result.checks.push_back(check(std::string(to_string(c)) + "_step_time", worst <= limit,
                                        "slowest step " + format_double(worst) + " s (limit " +
                                            format_double(limit) + " s)"));
    }
  }
}

void run_sweep(Context& ctx) {
  if (ctx.cfg.epsilon_grid.empty()) fail("epsilon_grid", "must not be empty for epsilon-sweep");
  const DisturbanceModel dist = disturbance(ctx.scenario);
  Stopwatch sw;
  const auto rows = epsilon_sweep(ctx.scenario.spec, ctx.cfg.epsilon_grid, ctx.x0, dist,
                                  closed_loop_settings(ctx.cfg));
  ctx.timings["sweep"] = sw.seconds();
  auto os = ctx.writer.open("sweep.csv");
  write_sweep_csv(os, rows);
  int failures = 0;
  for (const auto& r : rows) failures += r.failures;
  ctx.result.checks.push_back(
      check("sweep_no_failures", failures == 0, std::to_string(failures) + " failed realizations"));
}

ojson checks_json(const std::vector<CheckResult>& checks, bool failed_only) {
  ojson arr = ojson::array();
  for (const auto& c : checks) {
    if (failed_only && c.passed) continue;
    arr.push_back(ojson{{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  return arr;
}

}  // namespace

std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::kSolveOnce: return "solve-once";
    case Kind::kConvergenceCompare: return "convergence-compare";
    case Kind::kClosedLoop: return "closed-loop";
    case Kind::kEpsilonSweep: return "epsilon-sweep";
    case Kind::kScalability: return "scalability";
  }
  return "unknown";
}

Kind parse_kind(std::string_view s) {
  for (Kind k : {Kind::kSolveOnce, Kind::kConvergenceCompare, Kind::kClosedLoop,
                 Kind::kEpsilonSweep, Kind::kScalability}) {
    if (to_string(k) == s) return k;
  }
  fail("kind", "unknown experiment kind '" + std::string(s) + "'");
}

bool RunResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

Config parse_config(std::string_view text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ScenarioFormatError("", std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("", "expected an object");
  Config cfg;
  bool have_scenario = false, have_kind = false;
  for (const auto& [key, value] : doc.items()) {
    if (key == "scenario") {
      const fs::path p = get<std::string>(value, key);
      cfg.scenario = (p.is_absolute() || base_dir.empty() ? p : base_dir / p).lexically_normal();
      have_scenario = true;
    } else if (key == "kind") {
      cfg.kind = parse_kind(get<std::string>(value, key));
      have_kind = true;
    } else if (key == "controllers") {
      cfg.controllers.clear();
      for (const auto& c : value) {
        try {
          cfg.controllers.push_back(parse_controller(get<std::string>(c, key)));
        } catch (const std::invalid_argument& e) {
          fail(key, e.what());
        }
      }
      if (cfg.controllers.empty()) fail(key, "must not be empty");
    } else if (key == "x0") {
      const auto v = get<std::vector<double>>(value, key);
      cfg.x0 = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    } else if (key == "epsilon") {
      cfg.epsilon = get<double>(value, key);
    } else if (key == "epsilon_grid") {
      cfg.epsilon_grid = get<std::vector<double>>(value, key);
    } else if (key == "T") {
      cfg.T = get<int>(value, key);
    } else if (key == "S") {
      cfg.S = get<int>(value, key);
    } else if (key == "seed") {
      cfg.seed = get<std::uint64_t>(value, key);
    } else if (key == "jobs") {
      cfg.jobs = get<int>(value, key);
    } else if (key == "fw_iterations") {
      cfg.fw_iterations = get<int>(value, key);
    } else if (key == "max_step_seconds") {
      cfg.max_step_seconds = get<double>(value, key);
    } else if (key == "solver") {
      cfg.solver = parse_solver(value);
    } else if (key == "output_dir") {
      const fs::path p = get<std::string>(value, key);
      cfg.output_dir = (p.is_absolute() || base_dir.empty() ? p : base_dir / p).lexically_normal();
    } else {
      fail(key, "unknown key");
    }
  }
  if (!have_scenario) fail("scenario", "missing field");
  if (!have_kind) fail("kind", "missing field");
  const bool loop = cfg.kind == Kind::kClosedLoop || cfg.kind == Kind::kEpsilonSweep ||
                    cfg.kind == Kind::kScalability;
  if (loop && (cfg.T < 1 || cfg.S < 1)) fail("T", "T and S must be at least 1");
  if (cfg.jobs < 0) fail("jobs", "must be non-negative");
  if (cfg.fw_iterations < 1) fail("fw_iterations", "must be positive");
  try {
    cfg.solver.validate();
  } catch (const std::invalid_argument& e) {
    fail("solver", e.what());
  }
  return cfg;
}

Config load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioFormatError("", "cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

std::string config_json(const Config& cfg) {
  ojson j;
  j["scenario"] = cfg.scenario.string();
  j["kind"] = std::string(to_string(cfg.kind));
  ojson ctrl = ojson::array();
  for (Controller c : cfg.controllers) ctrl.push_back(std::string(to_string(c)));
  j["controllers"] = ctrl;
  if (cfg.x0) j["x0"] = std::vector<double>(cfg.x0->data(), cfg.x0->data() + cfg.x0->size());
  if (cfg.epsilon) j["epsilon"] = *cfg.epsilon;
  if (!cfg.epsilon_grid.empty()) j["epsilon_grid"] = cfg.epsilon_grid;
  j["T"] = cfg.T;
  j["S"] = cfg.S;
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  j["fw_iterations"] = cfg.fw_iterations;
  j["max_step_seconds"] = cfg.max_step_seconds;
  ojson s;
  s["method"] = method_name(cfg.solver.method);
  s["step"] = step_name(cfg.solver.step);
  if (cfg.solver.beta) s["beta"] = *cfg.solver.beta;
  s["zeta"] = cfg.solver.zeta;
  s["tau"] = cfg.solver.tau;
  s["gap_tol"] = cfg.solver.gap_tol;
  s["max_iter"] = cfg.solver.max_iter;
  s["inner_tol"] = cfg.solver.inner_tol;
  s["record_time"] = cfg.solver.record_time;
  j["solver"] = s;
  j["output_dir"] = cfg.output_dir.string();
  return j.dump(2);
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 initialization failed");
  }
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return os.str();
}

RunResult run_experiment(const Config& cfg) {
  Stopwatch total;
  Context ctx{cfg, load_scenario(cfg.scenario), {}, Writer(cfg.output_dir), {}, {}, {}};
  ScenarioSpec& spec = ctx.scenario.spec;
  if (cfg.epsilon) {
    spec.d.epsilon = *cfg.epsilon;
    validate_scenario(ctx.scenario);
  }
  ctx.x0 = cfg.x0 ? *cfg.x0 : Eigen::VectorXd::Zero(spec.n());
  if (ctx.x0.size() != spec.n()) {
    fail("x0", "has length " + std::to_string(ctx.x0.size()) + ", the scenario has n = " +
                   std::to_string(spec.n()));
  }
  fs::create_directories(cfg.output_dir);

  switch (cfg.kind) {
    case Kind::kSolveOnce:
      run_solve_once(ctx, cfg.solver, "");
      break;
    case Kind::kConvergenceCompare:
      run_convergence_compare(ctx);
      break;
    case Kind::kClosedLoop:
      run_closed_loop(ctx, cfg.controllers, closed_loop_settings(cfg));
      break;
    case Kind::kEpsilonSweep:
      run_sweep(ctx);
      break;
    case Kind::kScalability: {
      SolverSettings timed = cfg.solver;
      timed.record_time = true;
      run_solve_once(ctx, timed, "single_");
      ClosedLoopSettings cl = closed_loop_settings(cfg);
      cl.solver = timed;
      run_closed_loop(ctx, {Controller::kDrmpc}, cl);
      break;
    }
  }

  ctx.result.files = ctx.writer.files();
  ctx.timings["total"] = total.seconds();

  ojson manifest;
  manifest["tool"] = "drmpc";
  manifest["version"] = DRMPC_VERSION;
  manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                      "." + std::to_string(EIGEN_MINOR_VERSION);
  manifest["compiler"] = __VERSION__;
  manifest["experiment"] = std::string(to_string(cfg.kind));
  manifest["seed"] = cfg.seed;
  manifest["config"] = ojson::parse(config_json(cfg));
  manifest["scenario"] = {{"path", cfg.scenario.string()}, {"sha256", sha256_file(cfg.scenario)}};
  manifest["summary"] = ctx.summary;
  manifest["wall_seconds"] = ctx.timings;
  manifest["checks"] = checks_json(ctx.result.checks, false);
  ojson files = ojson::array();
  for (const auto& f : ctx.result.files) {
    files.push_back(ojson{{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  }
  manifest["files"] = files;
  {
    std::ofstream os(cfg.output_dir / "manifest.json", std::ios::binary);
    os << manifest.dump(2) << '\n';
  }
  const fs::path report = cfg.output_dir / "failure_report.json";
  if (!ctx.result.passed()) {
    ojson r;
    r["status"] = "failed";
    r["experiment"] = std::string(to_string(cfg.kind));
    r["failed_checks"] = checks_json(ctx.result.checks, true);
    std::ofstream os(report, std::ios::binary);
    os << r.dump(2) << '\n';
  } else {
    fs::remove(report);
  }
  return ctx.result;
}

}  // namespace drmpc::experiment
