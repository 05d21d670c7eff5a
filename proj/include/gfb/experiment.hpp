#pragma once

// Batch experiments: a key = value config format, problem assembly, and the
// solve / verify / pcp commands used by the command-line tool.
//
// Exit codes: 0 success, 1 bound violations, 2 configuration or input errors,
// 3 numerical failure.

#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gfb/errors.hpp"
#include "gfb/matrix_io.hpp"
#include "gfb/operators.hpp"
#include "gfb/pcp.hpp"
#include "gfb/rates.hpp"
#include "gfb/solver.hpp"

namespace gfb {

enum ExitCode : int { kExitOk = 0, kExitViolations = 1, kExitConfig = 2, kExitNumerical = 3 };

enum class ProblemKind { builtin_1d, pcp_synthetic, matrix_file };

struct ExperimentConfig {
  ProblemKind problem = ProblemKind::pcp_synthetic;
  PcpParams pcp;
  std::filesystem::path matrix;           // matrix-file: the data matrix M
  std::string smooth = "envelope";        // matrix-file: envelope | quadratic
  std::vector<std::string> terms;         // matrix-file: nuclear:w, l1:w, nonneg, box:lo:hi
  std::optional<double> gamma;
  std::optional<std::vector<double>> weights;
  std::optional<RelaxationSchedule> relaxation;
  Regime regime = Regime::pointwise;
  std::size_t max_iters = 1000;
  double stop_tol = 0.0;
  StopCriterion stop = StopCriterion::certificate;
  ErrorSchedule errors;
  bool retain_history = false;
  bool rates = true;
  bool track_objective = true;
  double reference_tol = 1e-12;
  std::size_t reference_max_iters = 200000;
  std::filesystem::path output_dir = "out";
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto p = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, p == std::string_view::npos ? s.npos : p - start)));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

inline std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t> to_count(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses a config document. Relative paths resolve against `base_dir`.
/// Every problem is collected before throwing ConfigError.
inline ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  std::vector<std::string> errors;
  std::map<std::string, int> seen;
  std::istringstream lines{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(lines, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) {
      errors.push_back(where + "expected 'key = value'");
      continue;
    }
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (seen.count(key)) {
      errors.push_back(where + "duplicate key '" + key + "'");
      continue;
    }
    seen[key] = line_no;
    auto bad = [&](const std::string& what) { errors.push_back(where + key + ": " + what); };
    auto real = [&](auto& dst) {
      if (auto v = detail::to_double(value)) dst = *v;
      else bad("expected a number, got '" + value + "'");
    };
    auto count = [&](auto& dst) {
      if (auto v = detail::to_count(value)) dst = static_cast<std::remove_reference_t<decltype(dst)>>(*v);
      else bad("expected a non-negative integer, got '" + value + "'");
    };
    auto flag = [&](bool& dst) {
      if (value == "true") dst = true;
      else if (value == "false") dst = false;
      else bad("expected true or false, got '" + value + "'");
    };

    if (key == "problem") {
      if (value == "builtin-1d") cfg.problem = ProblemKind::builtin_1d;
      else if (value == "pcp-synthetic") cfg.problem = ProblemKind::pcp_synthetic;
      else if (value == "matrix-file") cfg.problem = ProblemKind::matrix_file;
      else bad("expected builtin-1d, pcp-synthetic or matrix-file");
    } else if (key == "seed") {
      count(cfg.pcp.seed);
    } else if (key == "rows") {
      count(cfg.pcp.rows);
    } else if (key == "cols") {
      count(cfg.pcp.cols);
    } else if (key == "rank") {
      count(cfg.pcp.rank);
    } else if (key == "rho") {
      real(cfg.pcp.rho);
    } else if (key == "sparse_min") {
      real(cfg.pcp.sparse_min);
    } else if (key == "sparse_max") {
      real(cfg.pcp.sparse_max);
    } else if (key == "noise_std") {
      real(cfg.pcp.noise_std);
    } else if (key == "mu1") {
      double v = 0.0;
      real(v);
      cfg.pcp.mu1 = v;
    } else if (key == "mu2") {
      double v = 0.0;
      real(v);
      cfg.pcp.mu2 = v;
    } else if (key == "matrix") {
      cfg.matrix = base_dir / value;
    } else if (key == "smooth") {
      if (value == "envelope" || value == "quadratic") cfg.smooth = value;
      else bad("expected envelope or quadratic");
    } else if (key == "terms") {
      cfg.terms = detail::split(value, ',');
    } else if (key == "gamma") {
      double v = 0.0;
      real(v);
      cfg.gamma = v;
    } else if (key == "weights") {
      std::vector<double> w;
      for (const auto& part : detail::split(value, ',')) {
        if (auto v = detail::to_double(part)) w.push_back(*v);
        else bad("invalid weight '" + part + "'");
      }
      cfg.weights = std::move(w);
    } else if (key == "lambda") {
      if (value.rfind("ramp:", 0) == 0) {
        auto parts = detail::split(std::string_view(value).substr(5), ':');
        std::optional<double> a, b;
        if (parts.size() == 2) {
          a = detail::to_double(parts[0]);
          b = detail::to_double(parts[1]);
        }
        if (a && b) cfg.relaxation = RelaxationSchedule::ramp(*a, *b);
        else bad("expected ramp:first:limit");
      } else if (auto v = detail::to_double(value)) {
        cfg.relaxation = RelaxationSchedule::constant(*v);
      } else {
        bad("expected a number or ramp:first:limit");
      }
    } else if (key == "regime") {
      if (value == "pointwise") cfg.regime = Regime::pointwise;
      else if (value == "pointwise-general") cfg.regime = Regime::pointwise_general;
      else if (value == "ergodic") cfg.regime = Regime::ergodic;
      else bad("expected pointwise, pointwise-general or ergodic");
    } else if (key == "max_iters") {
      count(cfg.max_iters);
    } else if (key == "stop_tol") {
      real(cfg.stop_tol);
    } else if (key == "stop_criterion") {
      if (value == "certificate") cfg.stop = StopCriterion::certificate;
      else if (value == "residual") cfg.stop = StopCriterion::residual;
      else bad("expected certificate or residual");
    } else if (key == "errors") {
      if (value == "none") {
        cfg.errors.kind = ErrorSchedule::Kind::none;
      } else if (value.rfind("power:", 0) == 0) {
        auto parts = detail::split(std::string_view(value).substr(6), ':');
        std::optional<double> c, p;
        if (parts.size() == 2) {
          c = detail::to_double(parts[0]);
          p = detail::to_double(parts[1]);
        }
        if (c && p) {
          cfg.errors.kind = ErrorSchedule::Kind::power_decay;
          cfg.errors.amplitude = *c;
          cfg.errors.exponent = *p;
        } else {
          bad("expected power:amplitude:exponent");
        }
      } else {
        bad("expected none or power:amplitude:exponent");
      }
    } else if (key == "error_target") {
      if (value == "post-prox") cfg.errors.target = ErrorTarget::post_prox;
      else if (value == "pre-prox") cfg.errors.target = ErrorTarget::pre_prox;
      else bad("expected post-prox or pre-prox");
    } else if (key == "error_seed") {
      count(cfg.errors.seed);
    } else if (key == "error_shared") {
      flag(cfg.errors.shared);
    } else if (key == "retain_history") {
      flag(cfg.retain_history);
    } else if (key == "rates") {
      flag(cfg.rates);
    } else if (key == "track_objective") {
      flag(cfg.track_objective);
    } else if (key == "reference_tol") {
      real(cfg.reference_tol);
    } else if (key == "reference_max_iters") {
      count(cfg.reference_max_iters);
    } else if (key == "output_dir") {
      cfg.output_dir = base_dir / value;
    } else {
      errors.push_back(where + "unknown key '" + key + "'");
    }
  }
  if (cfg.problem == ProblemKind::matrix_file && cfg.matrix.empty())
    errors.push_back("problem = matrix-file needs a 'matrix' path");
  if (!seen.count("output_dir")) cfg.output_dir = base_dir / cfg.output_dir;
  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError({e.what()});
  }
  return parse_config(text, path.parent_path());
}

struct Experiment {
  SplitProblem problem;
  GfbConfig config;
  std::optional<PcpInstance> instance;
  std::optional<Regularization> reg;
};

namespace detail {

inline ProxOracle parse_term(const std::string& spec) {
  auto parts = split(spec, ':');
  auto arg = [&](std::size_t i) {
    if (i >= parts.size()) throw ConfigError({"term '" + spec + "' is missing a parameter"});
    auto v = to_double(parts[i]);
    if (!v) throw ConfigError({"term '" + spec + "' has an invalid parameter"});
    return *v;
  };
  if (parts[0] == "nuclear" && parts.size() == 2) return nuclear_term(arg(1));
  if (parts[0] == "l1" && parts.size() == 2) return l1_term(arg(1));
  if (parts[0] == "nonneg" && parts.size() == 1) return nonneg_term();
  if (parts[0] == "box" && parts.size() == 3) return box_term(arg(1), arg(2));
  throw ConfigError({"unknown term '" + spec + "' (nuclear:w, l1:w, nonneg, box:lo:hi)"});
}

}  // namespace detail

/// f(x) = 1/2 (x - 4)^2 over x in [0, 1], one simple term, gamma = lambda = 1.
inline Experiment builtin_1d_experiment() {
  Experiment ex;
  ex.problem.shape = {1, 1};
  ex.problem.smooth = quadratic_smooth(Block::vector({4.0}));
  ex.problem.simple_terms = {box_term(0.0, 1.0)};
  ex.problem.objective = [](const Block& x) {
    const double v = x[0];
    if (v < 0.0 || v > 1.0) return std::numeric_limits<double>::infinity();
    return 0.5 * (v - 4.0) * (v - 4.0);
  };
  ex.config.gamma = 1.0;
  ex.config.weights = Weights::uniform(1);
  return ex;
}

/// Assembles the problem and solver settings. Throws ConfigError, ParameterError,
/// DimensionError or FormatError on bad input; does not validate the solver settings.
inline Experiment build_experiment(const ExperimentConfig& cfg) {
  Experiment ex;
  switch (cfg.problem) {
    case ProblemKind::builtin_1d:
      ex = builtin_1d_experiment();
      break;
    case ProblemKind::pcp_synthetic: {
      PcpInstance inst = synth_instance(cfg.pcp);
      PcpSetup s = build_problem(inst, cfg.pcp);
      ex.problem = std::move(s.problem);
      ex.config = std::move(s.config);
      ex.reg = s.reg;
      ex.instance = std::move(inst);
      break;
    }
    case ProblemKind::matrix_file: {
      PcpInstance inst = PcpInstance::observed(read_matrix(cfg.matrix));
      if (cfg.smooth == "envelope" && cfg.terms.empty()) {
        PcpSetup s = build_problem(inst, cfg.pcp);
        ex.problem = std::move(s.problem);
        ex.config = std::move(s.config);
        ex.reg = s.reg;
      } else {
        if (cfg.terms.empty()) throw ConfigError({"matrix-file with smooth = quadratic needs 'terms'"});
        ex.problem.shape = inst.m.shape();
        if (cfg.smooth == "quadratic") {
          ex.problem.smooth = quadratic_smooth(inst.m);
        } else {
          const double mu1 = regularization(inst, cfg.pcp).mu1;
          auto m = std::make_shared<const DenseMatrix>(inst.m);
          ex.problem.smooth = SmoothOracle{
              "pcp-envelope",
              [m, mu1](const Block& x) { return -moreau_env_value_grad(*m - x, mu1).grad; }, 1.0,
              [m, mu1](const Block& x) { return moreau_env_value_grad(*m - x, mu1).value; }};
        }
        for (const auto& t : cfg.terms) ex.problem.simple_terms.push_back(detail::parse_term(t));
        ex.config.weights = Weights::uniform(ex.problem.size());
      }
      ex.instance = std::move(inst);
      break;
    }
  }
  GfbConfig& c = ex.config;
  if (cfg.gamma) c.gamma = *cfg.gamma;
  if (cfg.weights) c.weights = Weights(*cfg.weights);
  c.regime = cfg.regime;
  if (cfg.relaxation) c.relaxation = *cfg.relaxation;
  else c.relaxation = RelaxationSchedule::constant(cfg.regime == Regime::ergodic ? 0.5 : 1.0);
  c.errors = cfg.errors;
  c.max_iters = cfg.max_iters;
  c.stop_tol = cfg.stop_tol;
  c.stop = cfg.stop;
  c.retain_history = false;  // per-step distances are tracked online instead
  c.track_objective = cfg.track_objective;
  return ex;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kIterationsHeader =
    "k,lambda,eps_norm,e_norm,ebar_norm,g_residual,gbar_residual,objective";
inline constexpr std::string_view kHistoryHeader = "k,e_jump,dist_ref,step_dist_ref";
inline constexpr std::string_view kBoundsHeader =
    "k,e_norm,bound_pointwise,ebar_norm,bound_ergodic,g_residual,bound_certificate_pw,"
    "gbar_residual,bound_certificate_erg";
inline constexpr std::string_view kViolationsHeader = "k,quantity,observed,bound";

inline std::string iterations_csv(const std::vector<IterationRecord>& recs) {
  std::string out(kIterationsHeader);
  out.push_back('\n');
  for (const auto& r : recs) {
    out += std::to_string(r.k);
    for (double v : {r.lambda, r.eps_norm, r.e_norm, r.ebar_norm, r.g_residual, r.gbar_residual,
                     r.objective}) {
      out.push_back(',');
      out += detail::format_double(v);
    }
    out.push_back('\n');
  }
  return out;
}

inline std::string history_csv(const std::vector<IterationRecord>& recs) {
  std::string out(kHistoryHeader);
  out.push_back('\n');
  for (const auto& r : recs) {
    out += std::to_string(r.k);
    for (double v : {r.e_jump, r.dist_ref, r.step_dist_ref}) {
      out.push_back(',');
      out += detail::format_double(v);
    }
    out.push_back('\n');
  }
  return out;
}

namespace detail {

/// Rows of a numeric CSV whose first line must equal `header`.
inline std::vector<std::vector<double>> parse_csv(std::string_view text, std::string_view header,
                                                  const std::string& name) {
  std::vector<std::vector<double>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || trim(line) != header)
    throw FormatError(0, name + ": unexpected header, want '" + std::string(header) + "'");
  const std::size_t width = split(header, ',').size();
  std::size_t offset = line.size() + 1;
  while (std::getline(in, line)) {
    if (trim(line).empty()) {
      offset += line.size() + 1;
      continue;
    }
    auto cells = split(line, ',');
    if (cells.size() != width)
      throw FormatError(offset, name + ": expected " + std::to_string(width) + " columns");
    std::vector<double> row;
    row.reserve(width);
    for (const auto& c : cells) {
      auto v = to_double(c);
      if (!v) throw FormatError(offset, name + ": invalid number '" + c + "'");
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
    offset += line.size() + 1;
  }
  return rows;
}

}  // namespace detail

/// Rebuilds trace records from iterations.csv and, when given, history.csv.
inline std::vector<IterationRecord> read_trace_records(const std::filesystem::path& iterations,
                                                       const std::optional<std::filesystem::path>& history) {
  auto rows = detail::parse_csv(read_file(iterations), kIterationsHeader, iterations.string());
  std::vector<IterationRecord> recs;
  recs.reserve(rows.size());
  for (const auto& row : rows) {
    IterationRecord r;
    r.k = static_cast<std::size_t>(row[0]);
    r.lambda = row[1];
    r.eps_norm = row[2];
    r.e_norm = row[3];
    r.ebar_norm = row[4];
    r.g_residual = row[5];
    r.gbar_residual = row[6];
    r.objective = row[7];
    if (r.k != recs.size()) throw FormatError(0, iterations.string() + ": k column is not 0, 1, 2, ...");
    recs.push_back(r);
  }
  if (history) {
    auto hist = detail::parse_csv(read_file(*history), kHistoryHeader, history->string());
    if (hist.size() != recs.size())
      throw FormatError(0, history->string() + ": row count differs from " + iterations.string());
    for (std::size_t i = 0; i < hist.size(); ++i) {
      recs[i].e_jump = hist[i][1];
      recs[i].dist_ref = hist[i][2];
      recs[i].step_dist_ref = hist[i][3];
    }
  }
  return recs;
}

// ---------------------------------------------------------------------------
// Commands

struct OutputFiles {
  static constexpr const char* iterations = "iterations.csv";
  static constexpr const char* history = "history.csv";
  static constexpr const char* summary = "summary.txt";
  static constexpr const char* zstar = "zstar.gfbm";
  static constexpr const char* bounds = "bounds.csv";
  static constexpr const char* violations = "violations.csv";
  static constexpr const char* plot = "plot_bounds.py";
};

namespace detail {

inline void print_config_error(std::ostream& err, const std::exception& e) {
  err << "error: " << e.what() << "\n";
}

inline GfbConfig reference_config(const GfbConfig& c) {
  GfbConfig r = c;
  r.errors = ErrorSchedule::none();
  r.relaxation = RelaxationSchedule::constant(1.0);  // 1 < 1/alpha for every admissible gamma
  r.regime = Regime::pointwise_general;
  r.z0.reset();
  r.reference.reset();
  return r;
}

inline std::string rate_summary(const RateReport& r) {
  std::ostringstream s;
  s << "alpha = " << format_double(r.alpha) << "\n"
    << "tau_inf = " << format_double(r.tau_inf) << "\n"
    << "tau_sup = " << format_double(r.tau_sup) << "\n"
    << "tau0 = " << format_double(r.tau0) << "\n"
    << "d0 = " << format_double(r.d0) << "\n"
    << "nu1 = " << format_double(r.nu1) << "\n"
    << "nu2 = " << format_double(r.nu2) << "\n"
    << "C1 = " << format_double(r.C1.value()) << " (truncated " << format_double(r.C1.truncated)
    << ", tail " << format_double(r.C1.tail) << ")\n"
    << "C2 = " << format_double(r.C2.value()) << " (truncated " << format_double(r.C2.truncated)
    << ", tail " << format_double(r.C2.tail) << ")\n"
    << "C3 = " << format_double(r.C3.value()) << " (truncated " << format_double(r.C3.truncated)
    << ", tail " << format_double(r.C3.tail) << ")\n"
    << "reference_quality = " << format_double(r.reference_quality) << "\n"
    << "reference_certified = " << (r.certified ? "true" : "false") << "\n"
    << "pointwise_case = "
    << (!r.pointwise_case ? "none"
        : *r.pointwise_case == PointwiseCase::non_decreasing ? "non-decreasing" : "general")
    << "\n"
    << "ergodic_applicable = " << (r.ergodic_applicable ? "true" : "false") << "\n";
  for (const auto& n : r.notes) s << "note = " << n << "\n";
  return s.str();
}

inline std::string plot_script() {
  return R"(# Plots observed residuals against their bound curves from bounds.csv.
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "bounds.csv"
with open(path) as f:
    rows = list(csv.DictReader(f))
k = [int(r["k"]) + 1 for r in rows]
fig, ax = plt.subplots(1, 2, figsize=(10, 4))
for observed, bound, axis in [("e_norm", "bound_pointwise", ax[0]), ("ebar_norm", "bound_ergodic", ax[0]),
                              ("g_residual", "bound_certificate_pw", ax[1]),
                              ("gbar_residual", "bound_certificate_erg", ax[1])]:
    axis.loglog(k, [float(r[observed]) for r in rows], label=observed)
    axis.loglog(k, [float(r[bound]) for r in rows], "--", label=bound)
for axis in ax:
    axis.set_xlabel("k + 1")
    axis.legend()
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
)";
}

}  // namespace detail

/// Runs the configured solve; writes iterations.csv, summary.txt and, with rates on,
/// zstar.gfbm (blocks stacked vertically) plus history.csv when retain_history is set.
inline int cmd_solve(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err,
                     const std::optional<std::filesystem::path>& output_dir = std::nullopt) {
  ExperimentConfig cfg;
  Experiment ex;
  ConfigReport report;
  try {
    cfg = load_config(config_path);
    if (output_dir) cfg.output_dir = *output_dir;
    ex = build_experiment(cfg);
    report = validate_config(ex.problem, ex.config);
  } catch (const std::exception& e) {
    detail::print_config_error(err, e);
    return kExitConfig;
  }
  if (!report.ok) {
    detail::print_config_error(err, ConfigError(report.violations));
    return kExitConfig;
  }

  std::optional<FixedPointEstimate> zstar;
  try {
    if (cfg.rates) {
      zstar = estimate_fixed_point(ex.problem, detail::reference_config(ex.config), cfg.reference_tol,
                                   cfg.reference_max_iters);
      ex.config.reference = zstar->z;
    }
  } catch (const NumericalError& e) {
    err << "error: reference run: " << e.what() << "\n";
    return kExitNumerical;
  }
  RunResult res = run(ex.problem, ex.config);

  try {
    std::filesystem::create_directories(cfg.output_dir);
    const auto& dir = cfg.output_dir;
    write_file_atomic(dir / OutputFiles::iterations, iterations_csv(res.trace.records));
    if (cfg.retain_history) write_file_atomic(dir / OutputFiles::history, history_csv(res.trace.records));
    if (zstar) write_matrix(dir / OutputFiles::zstar, stack_blocks(zstar->z));

    std::ostringstream s;
    s << "problem = " << config_path.string() << "\n"
      << "regime = " << to_string(ex.config.regime) << "\n"
      << "gamma = " << detail::format_double(ex.config.gamma) << "\n"
      << "iterations = " << res.trace.records.size() << "\n"
      << "stop = "
      << (res.reason == StopReason::tolerance   ? "tolerance"
          : res.reason == StopReason::max_iters ? "max_iters"
                                                : "numerical_failure")
      << "\n";
    if (res.failed_iteration) s << "failure = " << res.failure << "\n";
    if (!res.trace.records.empty()) {
      const auto& last = res.trace.records.back();
      s << "final_e_norm = " << detail::format_double(last.e_norm) << "\n"
        << "final_g_residual = " << detail::format_double(last.g_residual) << "\n"
        << "final_ebar_norm = " << detail::format_double(last.ebar_norm) << "\n"
        << "final_gbar_residual = " << detail::format_double(last.gbar_residual) << "\n"
        << "final_objective = " << detail::format_double(last.objective) << "\n";
    }
    if (zstar && !res.trace.records.empty()) {
      const RateReport rr = compute_constants(res.trace, zstar->z, ex.config, zstar->quality);
      s << detail::rate_summary(rr);
    } else {
      s << "alpha = " << detail::format_double(report.alpha) << "\n";
    }
    write_file_atomic(dir / OutputFiles::summary, s.str());
    out << s.str();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (res.reason == StopReason::numerical_failure) {
    err << "error: " << res.failure << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

/// Checks a solve's trace against the bound curves; writes bounds.csv, violations.csv
/// and plot_bounds.py next to the trace. Needs zstar.gfbm from the same directory.
inline int cmd_verify(const std::filesystem::path& trace_path, const std::filesystem::path& config_path,
                      std::ostream& out, std::ostream& err) {
  const auto dir = trace_path.parent_path();
  Experiment ex;
  ConfigReport report;
  IterationTrace trace;
  ProductPoint zstar;
  RateReport rates;
  try {
    ExperimentConfig cfg = load_config(config_path);
    ex = build_experiment(cfg);
    report = validate_config(ex.problem, ex.config);
    if (!report.ok) throw ConfigError(report.violations);
    const auto zpath = dir / OutputFiles::zstar;
    if (!std::filesystem::exists(zpath))
      throw ConfigError({"missing " + zpath.string() + ": run solve with rates = true first"});
    zstar = unstack_blocks(read_matrix(zpath), ex.problem.size());
    if (zstar.shape() != ex.problem.shape)
      throw ConfigError({zpath.string() + " does not match the configured problem shape"});
    const auto hpath = dir / OutputFiles::history;
    std::optional<std::filesystem::path> history;
    if (std::filesystem::exists(hpath)) history = hpath;
    trace.records = read_trace_records(trace_path, history);
    if (trace.records.empty()) throw ConfigError({trace_path.string() + " has no iterations"});
    trace.alpha = report.alpha;
    trace.gamma = ex.config.gamma;
    trace.z0 = ex.config.z0 ? *ex.config.z0 : ProductPoint::zeros(ex.problem.size(), ex.problem.shape);
    const double quality =
        weighted_norm(zstar - apply_T(zstar, ex.problem, ex.config), ex.config.weights);
    rates = compute_constants(trace, zstar, ex.config, quality);
    if (!rates.pointwise_case && !rates.ergodic_applicable)
      throw RegimeError(
          "no bound applies: pointwise bounds need 0 < lambda_k < 1/alpha with (k+1)|eps^k| "
          "summable, the ergodic bound needs lambda_k in ]0, 1[");
  } catch (const MissingHistoryError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    detail::print_config_error(err, e);
    return kExitConfig;
  }

  const auto violations = verify_bounds(trace, rates);
  try {
    std::string b(kBoundsHeader);
    b.push_back('\n');
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : trace.records) {
      const double pw = rates.pointwise_case ? pointwise_bound_curve(rates, r.k) : nan;
      const double erg = rates.ergodic_applicable ? ergodic_bound_curve(rates, r.k) : nan;
      b += std::to_string(r.k);
      for (double v : {r.e_norm, pw, r.ebar_norm, erg, r.g_residual, pw / rates.gamma,
                       r.gbar_residual, erg / rates.gamma}) {
        b.push_back(',');
        b += detail::format_double(v);
      }
      b.push_back('\n');
    }
    write_file_atomic(dir / OutputFiles::bounds, b);
    std::string v(kViolationsHeader);
    v.push_back('\n');
    for (const auto& x : violations)
      v += std::to_string(x.k) + "," + x.quantity + "," + detail::format_double(x.observed) + "," +
           detail::format_double(x.bound) + "\n";
    write_file_atomic(dir / OutputFiles::violations, v);
    write_file_atomic(dir / OutputFiles::plot, detail::plot_script());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  out << detail::rate_summary(rates) << "checked = " << trace.records.size() << "\n"
      << "violations = " << violations.size() << "\n";
  return violations.empty() ? kExitOk : kExitViolations;
}

struct PcpCommand {
  PcpParams params;
  std::size_t max_iters = 2000;
  double stop_tol = 1e-16;
  double lambda = 1.0;
  std::filesystem::path output_dir = "pcp_out";
};

/// Synthesizes an instance, solves it, and writes M, the ground truth, the recovered
/// components (.gfbm), iterations.csv and recovery.txt. Stops on |e^k|^2 <= stop_tol:
/// the certificate can vanish while the u_i still disagree.
inline int cmd_pcp(const PcpCommand& cmd, std::ostream& out, std::ostream& err) {
  PcpInstance inst;
  PcpSetup setup;
  try {
    inst = synth_instance(cmd.params);
    setup = build_problem(inst, cmd.params);
    setup.config.relaxation = RelaxationSchedule::constant(cmd.lambda);
    setup.config.max_iters = cmd.max_iters;
    setup.config.stop_tol = cmd.stop_tol;
    setup.config.stop = StopCriterion::residual;
    setup.config.regime = Regime::pointwise_general;
    require_valid(setup.problem, setup.config);
  } catch (const std::exception& e) {
    detail::print_config_error(err, e);
    return kExitConfig;
  }
  RunResult res = run(setup.problem, setup.config);
  const DenseMatrix low_rank = project_nonneg(res.state.x);
  const DenseMatrix sparse = recover_sparse(low_rank, inst.m, setup.reg.mu1);
  try {
    const auto& dir = cmd.output_dir;
    std::filesystem::create_directories(dir);
    write_matrix(dir / "M.gfbm", inst.m);
    write_matrix(dir / "L0.gfbm", inst.low_rank);
    write_matrix(dir / "S0.gfbm", inst.sparse);
    write_matrix(dir / "N.gfbm", inst.noise);
    write_matrix(dir / "XL.gfbm", low_rank);
    write_matrix(dir / "XS.gfbm", sparse);
    write_file_atomic(dir / OutputFiles::iterations, iterations_csv(res.trace.records));
    const auto sv = svd(low_rank);
    std::size_t rank = 0;
    for (double s : sv.sigma)
      if (s > 1e-8 * std::max(1.0, sv.sigma.front())) ++rank;
    std::ostringstream s;
    s << "mu1 = " << detail::format_double(setup.reg.mu1) << "\n"
      << "mu2 = " << detail::format_double(setup.reg.mu2) << "\n"
      << "iterations = " << res.trace.records.size() << "\n";
    if (!res.trace.records.empty()) {
      s << "objective_first = " << detail::format_double(res.trace.records.front().objective) << "\n"
        << "objective_last = " << detail::format_double(res.trace.records.back().objective) << "\n"
        << "final_e_norm = " << detail::format_double(res.trace.records.back().e_norm) << "\n"
        << "final_g_residual = " << detail::format_double(res.trace.records.back().g_residual) << "\n";
    }
    s << "objective_final = "
      << detail::format_double(evaluate_objective(low_rank, sparse, inst, setup.reg)) << "\n"
      << "rank_XL = " << rank << "\n"
      << "relative_error_L = " << detail::format_double(relative_error(low_rank, inst.low_rank)) << "\n"
      << "relative_error_S = " << detail::format_double(relative_error(sparse, inst.sparse)) << "\n";
    write_file_atomic(dir / "recovery.txt", s.str());
    out << s.str();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (res.reason == StopReason::numerical_failure) {
    err << "error: " << res.failure << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace gfb
