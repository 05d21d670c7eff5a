#pragma once

// Inexact, relaxed generalized forward-backward splitting for
//
//     min_x  f(x) + sum_i h_i(x),
//
// with f smooth (beta-cocoercive gradient) and each h_i known through its prox.
// One pass of the loop, for every i:
//
//     v_i = prox_{(gamma/w_i) h_i}(2 x - z_i - gamma grad f(x) + eps1_i) + eps2_i
//     z_i <- z_i + lambda_k (v_i - x)
//     x   <- sum_i w_i z_i
//
// The same step is the relaxed fixed-point iteration z <- z + lambda_k (T z + eps - z)
// of an alpha-averaged operator T on the product space, alpha = 2 beta / (4 beta - gamma).
// Besides the iterates, each step records the fixed-point residual e = (Id - T) z,
// the optimality certificate g, and their lambda-weighted (ergodic) averages.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gfb/errors.hpp"
#include "gfb/operators.hpp"
#include "gfb/random.hpp"
#include "gfb/space.hpp"

namespace gfb {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct SplitProblem {
  Shape shape;  // shape of x and of every block
  SmoothOracle smooth;
  std::vector<ProxOracle> simple_terms;
  std::function<double(const Block&)> objective;  // optional J = f + sum h_i

  std::size_t size() const noexcept { return simple_terms.size(); }
};

/// Relaxation parameters lambda_k.
class RelaxationSchedule {
 public:
  enum class Kind { constant, ramp };

  static RelaxationSchedule constant(double lambda) { return {Kind::constant, lambda, lambda}; }

  /// lambda_k = limit - (limit - first) / (k + 1): starts at `first`, tends to `limit`.
  static RelaxationSchedule ramp(double first, double limit) { return {Kind::ramp, first, limit}; }

  double at(std::size_t k) const {
    if (kind_ == Kind::constant) return first_;
    return limit_ - (limit_ - first_) / static_cast<double>(k + 1);
  }

  Kind kind() const noexcept { return kind_; }
  double first() const noexcept { return first_; }
  double limit() const noexcept { return limit_; }
  double infimum() const noexcept { return std::min(first_, limit_); }
  double supremum() const noexcept { return std::max(first_, limit_); }
  bool non_decreasing() const noexcept { return first_ <= limit_; }

 private:
  RelaxationSchedule(Kind kind, double first, double limit)
      : kind_(kind), first_(first), limit_(limit) {}

  Kind kind_;
  double first_;
  double limit_;
};

enum class ErrorTarget {
  post_prox,  // added to the prox output (the eps2 term)
  pre_prox,   // added to the prox argument (the eps1 term)
};

/// Deterministic error injection. Directions are unit vectors in the product norm,
/// drawn from a stream keyed by (seed, k) so any iteration can be replayed alone.
struct ErrorSchedule {
  enum class Kind { none, power_decay, custom };

  Kind kind = Kind::none;
  double amplitude = 0.0;  // c in c (k + 1)^(-p)
  double exponent = 0.0;   // p
  std::uint64_t seed = 0;
  ErrorTarget target = ErrorTarget::post_prox;
  bool shared = false;  // pre_prox only: one block added to every prox argument
  std::function<double(std::size_t)> custom;

  static ErrorSchedule none() { return {}; }

  static ErrorSchedule power_decay(double amplitude, double exponent, std::uint64_t seed,
                                   ErrorTarget target = ErrorTarget::post_prox) {
    ErrorSchedule s;
    s.kind = Kind::power_decay;
    s.amplitude = amplitude;
    s.exponent = exponent;
    s.seed = seed;
    s.target = target;
    return s;
  }

  double magnitude(std::size_t k) const {
    switch (kind) {
      case Kind::none:
        return 0.0;
      case Kind::power_decay:
        return amplitude * std::pow(static_cast<double>(k + 1), -exponent);
      case Kind::custom:
        return custom ? custom(k) : 0.0;
    }
    return 0.0;
  }

  bool active() const noexcept { return kind != Kind::none; }
};

enum class Regime {
  pointwise,          // lambda_k non-decreasing in [1/(2 alpha), 1/alpha[
  pointwise_general,  // 0 < inf lambda_k <= sup lambda_k < 1/alpha
  ergodic,            // lambda_k in ]0, 1[
};

enum class StopCriterion {
  certificate,  // |g + grad f(sum w_i u_i)|^2 <= stop_tol
  residual,     // |e|^2 <= stop_tol
};

struct GfbConfig {
  double gamma = 1.0;
  Weights weights;
  RelaxationSchedule relaxation = RelaxationSchedule::constant(1.0);
  ErrorSchedule errors;
  std::size_t max_iters = 1000;
  double stop_tol = 0.0;  // a non-finite value disables the tolerance test
  StopCriterion stop = StopCriterion::certificate;
  Regime regime = Regime::pointwise;
  std::optional<ProductPoint> z0;         // default: all zeros
  std::optional<ProductPoint> reference;  // a fixed point, for distance tracking
  bool retain_history = false;            // keep z^k, e^k, eps^k vectors in the trace
  bool track_objective = true;            // evaluate J(x^k) when the problem provides it
};

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::pointwise:
      return "pointwise";
    case Regime::pointwise_general:
      return "pointwise-general";
    case Regime::ergodic:
      return "ergodic";
  }
  return "?";
}

struct ConfigReport {
  bool ok = false;
  double alpha = kNaN;
  Regime regime = Regime::pointwise;
  std::vector<std::string> violations;
};

/// Checks the step size, relaxation schedule and error schedule against the
/// hypotheses of the requested regime. Every violated condition is listed.
inline ConfigReport validate_config(const SplitProblem& problem, const GfbConfig& config) {
  ConfigReport rep;
  rep.regime = config.regime;
  auto fail = [&](std::string msg) { rep.violations.push_back(std::move(msg)); };

  const double beta = problem.smooth.beta;
  if (problem.simple_terms.empty()) fail("problem needs at least one simple term (n >= 1)");
  if (!problem.smooth.gradient) fail("smooth term has no gradient");
  for (std::size_t i = 0; i < problem.simple_terms.size(); ++i)
    if (!problem.simple_terms[i].evaluate) fail("simple term " + std::to_string(i) + " has no prox");
  if (!(beta > 0.0) || !std::isfinite(beta)) fail("cocoercivity constant beta must be positive");
  if (problem.shape.size() == 0) fail("problem shape is empty");
  if (config.weights.size() != problem.simple_terms.size())
    fail("weights: got " + std::to_string(config.weights.size()) + " for " +
         std::to_string(problem.simple_terms.size()) + " simple terms");

  const double gamma = config.gamma;
  const bool gamma_ok = beta > 0.0 && gamma > 0.0 && gamma < 2.0 * beta;
  if (!gamma_ok)
    fail("step size gamma = " + std::to_string(gamma) + " must lie in ]0, 2 beta[ = ]0, " +
         std::to_string(2.0 * beta) + "[ (averagedness of the forward step)");
  if (gamma_ok) rep.alpha = 2.0 * beta / (4.0 * beta - gamma);

  const auto& lam = config.relaxation;
  const double inf = lam.infimum();
  const double sup = lam.supremum();
  if (!(inf > 0.0)) fail("relaxation: need inf lambda_k > 0");
  if (gamma_ok) {
    const double upper = 1.0 / rep.alpha;
    if (!(sup < upper))
      fail("relaxation: need sup lambda_k < 1/alpha = " + std::to_string(upper) +
           " (pointwise convergence condition)");
    if (config.regime == Regime::pointwise) {
      if (!(inf >= 0.5 * upper))
        fail("relaxation: pointwise regime needs lambda_k >= 1/(2 alpha) = " +
             std::to_string(0.5 * upper) + " (non-decreasing pointwise bound hypothesis)");
      if (!lam.non_decreasing())
        fail("relaxation: pointwise regime needs a non-decreasing schedule "
             "(non-decreasing pointwise bound hypothesis)");
    }
  }
  if (config.regime == Regime::ergodic && !(sup < 1.0))
    fail("relaxation: ergodic regime needs lambda_k in ]0, 1[ (ergodic bound hypothesis)");

  const auto& err = config.errors;
  if (err.kind == ErrorSchedule::Kind::power_decay) {
    if (!(err.amplitude >= 0.0)) fail("errors: amplitude must be >= 0");
    const bool pointwise = config.regime != Regime::ergodic;
    if (pointwise && !(err.exponent > 2.0))
      fail("errors: pointwise regimes need (k+1)|eps^k| summable, i.e. exponent p > 2");
    if (!pointwise && !(err.exponent > 1.0))
      fail("errors: ergodic regime needs sum lambda_k |eps^k| finite, i.e. exponent p > 1");
  }
  if (err.kind == ErrorSchedule::Kind::custom && !err.custom)
    fail("errors: custom schedule without a magnitude function");
  if (err.shared && err.target != ErrorTarget::pre_prox)
    fail("errors: shared injection only applies to pre-prox errors");

  if (config.max_iters == 0) fail("max_iters must be at least 1");
  if (config.stop_tol < 0.0 || std::isnan(config.stop_tol)) fail("stop_tol must be >= 0");
  const std::size_t n = problem.simple_terms.size();
  auto check_point = [&](const std::optional<ProductPoint>& p, const char* what) {
    if (p && (p->size() != n || p->shape() != problem.shape))
      fail(std::string(what) + ": expected " + std::to_string(n) + " blocks of shape " +
           to_string(problem.shape));
  };
  check_point(config.z0, "z0");
  check_point(config.reference, "reference");

  rep.ok = rep.violations.empty();
  return rep;
}

/// validate_config, throwing ConfigError on failure; returns alpha.
inline double require_valid(const SplitProblem& problem, const GfbConfig& config) {
  auto rep = validate_config(problem, config);
  if (!rep.ok) throw ConfigError(rep.violations);
  return rep.alpha;
}

// ---------------------------------------------------------------------------
// State

/// Quantities of the most recent pass from z^k to z^{k+1}.
struct StepData {
  std::size_t k = 0;
  double lambda = 0.0;
  ProductPoint z;     // z^k
  Block x;            // x^k
  Block grad;         // grad f(x^k)
  ProductPoint args;  // a_i = 2 x^k - z_i^k - gamma grad f(x^k)
  ProductPoint u;     // exact prox outputs u_i^{k+1}
  ProductPoint v;     // inexact outputs v_i^{k+1}
  ProductPoint eps;   // v - u
  ProductPoint e;     // C x^k - u
};

struct SolverState {
  std::size_t k = 0;
  ProductPoint z;
  Block x;
  std::optional<StepData> last;

  double lambda_sum = 0.0;  // Lambda_k
  ProductPoint sum_lambda_e;
  ProductPoint sum_lambda_u;
  Block sum_lambda_x;
};

struct IterationRecord {
  std::size_t k = 0;
  double lambda = 0.0;
  double eps_norm = 0.0;       // |eps^k| (product norm)
  double e_norm = 0.0;         // |e^k|
  double ebar_norm = 0.0;      // |ebar^k|
  double g_residual = 0.0;     // |g^k + grad f(sum w_i u_i^{k+1})|
  double gbar_residual = 0.0;  // ergodic analogue
  double objective = kNaN;     // J(x^k)
  double e_formula_gap = 0.0;  // |(Id - T) z^k - ((z^k - z^{k+1}) / lambda_k + eps^k)|
  double certificate_gap = 0.0;  // |sum_i (w_i / gamma)(a_i - u_i) - g^k|
  double e_jump = kNaN;         // |e^{k-1} - e^k|
  double jump_margin = kNaN;  // <<e^{k-1} - eps^{k-1}, e^{k-1} - e^k>> - |e^{k-1} - e^k|^2 / (2 alpha lambda_{k-1})
  double dist_ref = kNaN;       // |z^k - z_ref|
  double step_dist_ref = kNaN;  // |T_k z^k - z_ref|, T_k = Id + lambda_k (T - Id)
};

struct IterationTrace {
  double alpha = kNaN;
  double gamma = kNaN;
  std::vector<double> weights;
  ProductPoint z0;
  std::vector<IterationRecord> records;
  ProductPoint final_z;
  // retain_history only: entry k holds z^k, e^k, eps^k.
  std::vector<ProductPoint> z_history;
  std::vector<ProductPoint> e_history;
  std::vector<ProductPoint> eps_history;

  bool has_history() const noexcept { return !z_history.empty(); }
};

inline SolverState initial_state(const SplitProblem& problem, const GfbConfig& config) {
  SolverState s;
  const std::size_t n = problem.size();
  s.z = config.z0 ? *config.z0 : ProductPoint::zeros(n, problem.shape);
  s.x = weighted_average(s.z, config.weights);
  s.sum_lambda_e = ProductPoint::zeros(n, problem.shape);
  s.sum_lambda_u = ProductPoint::zeros(n, problem.shape);
  s.sum_lambda_x = Block(problem.shape);
  return s;
}

namespace detail {

inline ProductPoint unit_direction(const ErrorSchedule& err, std::size_t k, std::size_t n,
                                   Shape shape, const Weights& w) {
  Sampler rng(err.seed, k);
  if (err.shared) {
    Block d = rng.normal_block(shape.rows, shape.cols);
    const double nd = norm(d);
    if (nd > 0.0) d *= 1.0 / nd;
    return lift(d, n);
  }
  ProductPoint d = rng.normal_point(n, shape);
  const double nd = weighted_norm(d, w);
  if (nd > 0.0) d *= 1.0 / nd;
  return d;
}

struct ExactPass {
  Block grad;
  ProductPoint args;
  ProductPoint u;
};

inline ExactPass exact_pass(const ProductPoint& z, const Block& x, const SplitProblem& problem,
                            const GfbConfig& config) {
  ExactPass p;
  p.grad = problem.smooth.gradient(x);
  const std::size_t n = z.size();
  std::vector<Block> args;
  std::vector<Block> u;
  args.reserve(n);
  u.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Block a = 2.0 * x;
    a -= z[i];
    a.add_scaled(-config.gamma, p.grad);
    u.push_back(problem.simple_terms[i](a, config.gamma / config.weights[i]));
    args.push_back(std::move(a));
  }
  p.args = ProductPoint(std::move(args));
  p.u = ProductPoint(std::move(u));
  return p;
}

inline double certificate_residual(const Block& x, const Block& grad_x, const Block& u_avg,
                                   const SplitProblem& problem, double gamma) {
  // g = x/gamma - grad f(x) - u_avg/gamma, residual |g + grad f(u_avg)|
  Block r = (1.0 / gamma) * (x - u_avg);
  r -= grad_x;
  r += problem.smooth.gradient(u_avg);
  return norm(r);
}

}  // namespace detail

/// T z, computed exactly (no injected error).
inline ProductPoint apply_T(const ProductPoint& z, const SplitProblem& problem,
                            const GfbConfig& config) {
  const Block x = weighted_average(z, config.weights);
  auto pass = detail::exact_pass(z, x, problem, config);
  ProductPoint tz = z;
  tz += pass.u;
  tz -= lift(x, z.size());
  return tz;
}

/// Adds lambda * (e, u, x) to the running sums behind the ergodic averages.
inline void ergodic_update(SolverState& state, double lambda, const ProductPoint& e,
                           const ProductPoint& u, const Block& x) {
  state.lambda_sum += lambda;
  state.sum_lambda_e.add_scaled(lambda, e);
  state.sum_lambda_u.add_scaled(lambda, u);
  state.sum_lambda_x.add_scaled(lambda, x);
}

struct ErgodicSnapshot {
  double lambda_sum = 0.0;
  ProductPoint ebar;
  ProductPoint ubar;
  Block xbar;
  Block gbar;
  double ebar_norm = 0.0;
  double residual = 0.0;  // |gbar + grad f(sum w_i ubar_i)|
};

inline ErgodicSnapshot ergodic_read(const SolverState& state, const SplitProblem& problem,
                                    const GfbConfig& config) {
  if (!(state.lambda_sum > 0.0))
    throw std::logic_error("ergodic_read: no completed iteration yet");
  ErgodicSnapshot s;
  const double inv = 1.0 / state.lambda_sum;
  s.lambda_sum = state.lambda_sum;
  s.ebar = inv * state.sum_lambda_e;
  s.ubar = inv * state.sum_lambda_u;
  s.xbar = inv * state.sum_lambda_x;
  s.ebar_norm = weighted_norm(s.ebar, config.weights);
  const Block ubar_avg = weighted_average(s.ubar, config.weights);
  const Block grad_xbar = problem.smooth.gradient(s.xbar);
  s.gbar = (1.0 / config.gamma) * (s.xbar - ubar_avg);
  s.gbar -= grad_xbar;
  Block r = s.gbar + problem.smooth.gradient(ubar_avg);
  s.residual = norm(r);
  return s;
}

/// One pass of the loop body: advances `state` from k to k + 1 and returns the record for k.
/// Throws NumericalError (leaving `state` untouched) if any iterate becomes non-finite.
inline IterationRecord gfb_iterate(SolverState& state, const SplitProblem& problem,
                                   const GfbConfig& config, double alpha) {
  const std::size_t k = state.k;
  const std::size_t n = problem.size();
  const Weights& w = config.weights;
  const double gamma = config.gamma;
  const double lambda = config.relaxation.at(k);

  StepData step;
  step.k = k;
  step.lambda = lambda;
  step.z = state.z;
  step.x = state.x;
  {
    auto pass = detail::exact_pass(state.z, state.x, problem, config);
    step.grad = std::move(pass.grad);
    step.args = std::move(pass.args);
    step.u = std::move(pass.u);
  }
  if (!step.grad.all_finite()) throw NumericalError(k, "gradient is not finite");
  if (!step.u.all_finite()) throw NumericalError(k, "prox output is not finite");

  const double mag = config.errors.magnitude(k);
  if (config.errors.active() && mag != 0.0) {
    ProductPoint d = detail::unit_direction(config.errors, k, n, problem.shape, w);
    d *= mag;
    if (config.errors.target == ErrorTarget::post_prox) {
      step.v = step.u + d;
    } else {
      std::vector<Block> v;
      v.reserve(n);
      for (std::size_t i = 0; i < n; ++i)
        v.push_back(problem.simple_terms[i](step.args[i] + d[i], gamma / w[i]));
      step.v = ProductPoint(std::move(v));
    }
  } else {
    step.v = step.u;
  }
  step.eps = step.v - step.u;

  const ProductPoint cx = lift(step.x, n);
  step.e = cx - step.u;

  ProductPoint z_next = step.z;
  z_next.add_scaled(lambda, step.v - cx);
  if (!z_next.all_finite()) throw NumericalError(k, "iterate z is not finite");
  Block x_next = weighted_average(z_next, w);

  IterationRecord rec;
  rec.k = k;
  rec.lambda = lambda;
  rec.eps_norm = weighted_norm(step.eps, w);
  rec.e_norm = weighted_norm(step.e, w);
  {
    ProductPoint e_upd = (1.0 / lambda) * (step.z - z_next);
    e_upd += step.eps;
    rec.e_formula_gap = weighted_norm(e_upd - step.e, w);
  }

  const Block u_avg = weighted_average(step.u, w);
  rec.g_residual = detail::certificate_residual(step.x, step.grad, u_avg, problem, gamma);
  {
    Block g = (1.0 / gamma) * (step.x - u_avg);
    g -= step.grad;
    Block decomposed(problem.shape);
    for (std::size_t i = 0; i < n; ++i) decomposed.add_scaled(w[i] / gamma, step.args[i] - step.u[i]);
    rec.certificate_gap = norm(decomposed - g);
  }

  if (state.last) {
    const StepData& prev = *state.last;
    const ProductPoint jump = prev.e - step.e;
    rec.e_jump = weighted_norm(jump, w);
    rec.jump_margin = weighted_inner(prev.e - prev.eps, jump, w) -
                        rec.e_jump * rec.e_jump / (2.0 * alpha * prev.lambda);
  }

  if (config.reference) {
    rec.dist_ref = weighted_norm(step.z - *config.reference, w);
    ProductPoint tkz = z_next;
    tkz.add_scaled(-lambda, step.eps);
    rec.step_dist_ref = weighted_norm(tkz - *config.reference, w);
  }

  if (config.track_objective && problem.objective) rec.objective = problem.objective(step.x);

  ergodic_update(state, lambda, step.e, step.u, step.x);
  state.z = std::move(z_next);
  state.x = std::move(x_next);
  state.k = k + 1;
  state.last = std::move(step);

  const auto erg = ergodic_read(state, problem, config);
  rec.ebar_norm = erg.ebar_norm;
  rec.gbar_residual = erg.residual;
  return rec;
}

inline IterationRecord gfb_iterate(SolverState& state, const SplitProblem& problem,
                                   const GfbConfig& config) {
  return gfb_iterate(state, problem, config, require_valid(problem, config));
}

struct ResidualCheck {
  ProductPoint e;
  double norm = 0.0;
  double formula_gap = 0.0;  // definition vs update-difference formula
};

/// e^k = C x^k - u^{k+1} = (Id - T) z^k for the most recent step, cross-checked
/// against (z^k - z^{k+1}) / lambda_k + eps^k.
inline ResidualCheck residual_e(const SolverState& state, const Weights& w) {
  if (!state.last) throw std::logic_error("residual_e: no completed iteration yet");
  const StepData& s = *state.last;
  ResidualCheck r;
  r.e = s.e;
  r.norm = weighted_norm(s.e, w);
  ProductPoint e_upd = (1.0 / s.lambda) * (s.z - state.z);
  e_upd += s.eps;
  r.formula_gap = weighted_norm(e_upd - s.e, w);
  return r;
}

struct Certificate {
  Block g;
  double residual = 0.0;           // |g + grad f(sum w_i u_i)|
  double decomposition_gap = 0.0;  // |sum_i s_i - g|, s_i = (w_i / gamma)(a_i - u_i)
  double membership_gap = 0.0;     // max_i |u_i - prox_{(gamma/w_i) h_i}(u_i + (gamma/w_i) s_i)|
};

/// g^k = x^k / gamma - grad f(x^k) - (sum_i w_i u_i^{k+1}) / gamma for the most recent
/// step. Each s_i lies in the subdifferential of h_i at u_i; the membership gap
/// checks this through the prox characterization.
inline Certificate certificate_g(const SolverState& state, const SplitProblem& problem,
                                 const GfbConfig& config) {
  if (!state.last) throw std::logic_error("certificate_g: no completed iteration yet");
  const StepData& s = *state.last;
  const Weights& w = config.weights;
  const double gamma = config.gamma;
  Certificate c;
  const Block u_avg = weighted_average(s.u, w);
  c.g = (1.0 / gamma) * (s.x - u_avg);
  c.g -= s.grad;
  c.residual = norm(c.g + problem.smooth.gradient(u_avg));
  Block decomposed(problem.shape);
  for (std::size_t i = 0; i < problem.size(); ++i) {
    const double theta = gamma / w[i];
    Block si = (w[i] / gamma) * (s.args[i] - s.u[i]);
    decomposed += si;
    Block probe = s.u[i];
    probe.add_scaled(theta, si);
    const Block back = problem.simple_terms[i](probe, theta);
    c.membership_gap = std::max(c.membership_gap, norm(back - s.u[i]));
  }
  c.decomposition_gap = norm(decomposed - c.g);
  return c;
}

enum class StopReason { tolerance, max_iters, numerical_failure };

struct RunResult {
  IterationTrace trace;
  SolverState state;  // last finite state
  StopReason reason = StopReason::max_iters;
  std::optional<std::size_t> failed_iteration;
  std::string failure;
};

/// Iterates until the stopping test holds or max_iters passes were made.
/// Throws ConfigError on an invalid configuration.
inline RunResult run(const SplitProblem& problem, const GfbConfig& config) {
  const double alpha = require_valid(problem, config);
  RunResult out;
  out.state = initial_state(problem, config);
  auto& tr = out.trace;
  tr.alpha = alpha;
  tr.gamma = config.gamma;
  tr.weights.assign(config.weights.values().begin(), config.weights.values().end());
  tr.z0 = out.state.z;
  tr.records.reserve(config.max_iters);
  const bool tol_active = std::isfinite(config.stop_tol);

  for (std::size_t it = 0; it < config.max_iters; ++it) {
    IterationRecord rec;
    try {
      rec = gfb_iterate(out.state, problem, config, alpha);
    } catch (const NumericalError& err) {
      out.reason = StopReason::numerical_failure;
      out.failed_iteration = err.iteration();
      out.failure = err.what();
      break;
    }
    if (config.retain_history) {
      const StepData& s = *out.state.last;
      tr.z_history.push_back(s.z);
      tr.e_history.push_back(s.e);
      tr.eps_history.push_back(s.eps);
    }
    tr.records.push_back(rec);
    const double measure =
        config.stop == StopCriterion::certificate ? rec.g_residual : rec.e_norm;
    if (tol_active && measure * measure <= config.stop_tol) {
      out.reason = StopReason::tolerance;
      break;
    }
  }
  tr.final_z = out.state.z;
  return out;
}

}  // namespace gfb
