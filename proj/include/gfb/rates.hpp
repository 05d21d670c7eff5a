#pragma once

// Iteration-complexity constants and bound curves for the relaxed fixed-point
// iteration, and a checker that compares a recorded trace against them.
//
// With tau_k = lambda_k (1/alpha - lambda_k), d0 = |z^0 - z*| and Lambda_k = sum_{j<=k} lambda_j:
//   pointwise, non-decreasing lambda in [1/(2 alpha), 1/alpha[:
//       |e^k| <= sqrt((d0^2 + C2) / (tau_k (k + 1)))
//   pointwise, 0 < inf lambda <= sup lambda < 1/alpha:
//       |e^k| <= sqrt((d0^2 + C1) / (inf tau (k + 1)))
//   ergodic, lambda in ]0, 1[:
//       |ebar^k| <= 2 (d0 + C3) / Lambda_k
// and the certificate residuals obey the same curves divided by gamma.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gfb/errors.hpp"
#include "gfb/solver.hpp"
#include "gfb/space.hpp"

namespace gfb {

inline double alpha_of(double gamma, double beta) {
  if (!(beta > 0.0) || !(gamma > 0.0) || !(gamma < 2.0 * beta))
    throw ParameterError("alpha_of: need beta > 0 and gamma in ]0, 2 beta[");
  return 2.0 * beta / (4.0 * beta - gamma);
}

inline double tau_of(double lambda, double alpha) {
  if (!(alpha > 0.0) || !(lambda > 0.0) || !(lambda < 1.0 / alpha))
    throw ParameterError("tau_of: need lambda in ]0, 1/alpha[");
  return lambda * (1.0 / alpha - lambda);
}

struct FixedPointEstimate {
  ProductPoint z;
  double quality = kNaN;  // |z - T z| at the returned point
  std::size_t iterations = 0;
  bool certified = false;  // quality <= kCertifiedQuality
};

inline constexpr double kCertifiedQuality = 1e-9;

/// Runs the exact iteration z <- z - lambda_k (z - T z) from config.z0 (or zero)
/// until |z - T z| <= tol or max_iters steps.
inline FixedPointEstimate estimate_fixed_point(const SplitProblem& problem, const GfbConfig& config,
                                               double tol = 1e-12,
                                               std::size_t max_iters = 200000) {
  require_valid(problem, config);
  FixedPointEstimate out;
  out.z = config.z0 ? *config.z0 : ProductPoint::zeros(problem.size(), problem.shape);
  for (std::size_t k = 0;; ++k) {
    ProductPoint e = out.z - apply_T(out.z, problem, config);
    out.quality = weighted_norm(e, config.weights);
    out.iterations = k;
    if (!std::isfinite(out.quality)) throw NumericalError(k, "fixed-point residual is not finite");
    if (out.quality <= tol || k == max_iters) break;
    out.z.add_scaled(-config.relaxation.at(k), e);
  }
  out.certified = out.quality <= kCertifiedQuality;
  return out;
}

enum class PointwiseCase {
  general,         // 0 < inf lambda <= sup lambda < 1/alpha, constant C1 and inf tau
  non_decreasing,  // lambda non-decreasing in [1/(2 alpha), 1/alpha[, constant C2 and tau_k
};

/// An infinite series truncated at the trace horizon plus an upper bound on the rest.
struct SeriesConstant {
  double truncated = 0.0;
  double tail = 0.0;  // +inf when no tail bound is available
  double value() const { return truncated + tail; }
};

struct RateReport {
  double alpha = kNaN;
  double gamma = kNaN;
  Regime regime = Regime::pointwise;
  RelaxationSchedule schedule = RelaxationSchedule::constant(1.0);
  std::vector<double> tau;  // per recorded k
  double tau_inf = kNaN;
  double tau_sup = kNaN;
  double tau0 = kNaN;
  double d0 = kNaN;
  double nu1 = 0.0;
  double nu2 = 0.0;
  SeriesConstant sum_lambda_eps;  // sum_j lambda_j |eps^j|
  SeriesConstant sum_k_eps;       // sum_l (l + 1) |eps^l|
  SeriesConstant C1;
  SeriesConstant C2;
  SeriesConstant C3;
  std::vector<double> Lambda;  // per recorded k
  std::optional<PointwiseCase> pointwise_case;
  bool ergodic_applicable = false;
  double reference_quality = kNaN;
  bool certified = false;
  std::vector<std::string> notes;
};

namespace detail {

inline bool pointwise_hypotheses(const RelaxationSchedule& s, double alpha) {
  return s.infimum() > 0.0 && s.supremum() < 1.0 / alpha;
}

inline bool non_decreasing_hypotheses(const RelaxationSchedule& s, double alpha) {
  return pointwise_hypotheses(s, alpha) && s.non_decreasing() && s.infimum() >= 0.5 / alpha;
}

}  // namespace detail

/// Constants for `trace` measured against the fixed point `zstar`.
/// nu1 needs |T_k z^k - z*| per step: taken from the z-history when the trace kept it,
/// otherwise from the per-record distances when the run tracked `zstar` as its reference.
inline RateReport compute_constants(const IterationTrace& trace, const ProductPoint& zstar,
                                    const GfbConfig& config, double reference_quality = kNaN) {
  const auto& recs = trace.records;
  if (recs.empty()) throw std::invalid_argument("compute_constants: empty trace");
  const Weights& w = config.weights;

  RateReport r;
  r.alpha = trace.alpha;
  r.gamma = trace.gamma;
  r.regime = config.regime;
  r.schedule = config.relaxation;
  r.reference_quality = reference_quality;
  r.certified = reference_quality <= kCertifiedQuality;
  if (!r.certified) r.notes.push_back("reference fixed point not certified; bounds are approximate");

  r.tau.reserve(recs.size());
  r.Lambda.reserve(recs.size());
  double lambda_sum = 0.0;
  double lambda_sup = 0.0;
  double sup_lambda_eps = 0.0;
  bool exact = true;
  for (const auto& rec : recs) {
    r.tau.push_back(tau_of(rec.lambda, r.alpha));
    lambda_sum += rec.lambda;
    r.Lambda.push_back(lambda_sum);
    lambda_sup = std::max(lambda_sup, rec.lambda);
    sup_lambda_eps = std::max(sup_lambda_eps, rec.lambda * rec.eps_norm);
    r.sum_lambda_eps.truncated += rec.lambda * rec.eps_norm;
    r.sum_k_eps.truncated += static_cast<double>(rec.k + 1) * rec.eps_norm;
    if (rec.eps_norm != 0.0) exact = false;
  }
  r.tau0 = r.tau.front();
  r.tau_inf = *std::min_element(r.tau.begin(), r.tau.end());
  r.tau_sup = *std::max_element(r.tau.begin(), r.tau.end());
  r.d0 = weighted_norm(trace.z0 - zstar, w);

  // Tail of the error series beyond the horizon K = number of records:
  // sum_{j>=K} (j+1)^-q <= K^(1-q) / (q-1).
  const auto& err = config.errors;
  const double horizon = static_cast<double>(recs.size());
  if (err.kind == ErrorSchedule::Kind::power_decay) {
    const double c = err.amplitude;
    const double p = err.exponent;
    const double lam_bound = std::max(lambda_sup, config.relaxation.supremum());
    r.sum_lambda_eps.tail = p > 1.0 ? lam_bound * c * std::pow(horizon, 1.0 - p) / (p - 1.0)
                                    : std::numeric_limits<double>::infinity();
    r.sum_k_eps.tail = p > 2.0 ? c * std::pow(horizon, 2.0 - p) / (p - 2.0)
                               : std::numeric_limits<double>::infinity();
    if (c == 0.0) r.sum_lambda_eps.tail = r.sum_k_eps.tail = 0.0;
  } else if (err.kind == ErrorSchedule::Kind::custom) {
    r.sum_lambda_eps.tail = r.sum_k_eps.tail = std::numeric_limits<double>::infinity();
    r.notes.push_back("custom error schedule: no tail bound, series constants are unbounded");
  }

  // nu2 = 2 sup_k |e^k - e^{k+1}|
  for (const auto& rec : recs)
    if (std::isfinite(rec.e_jump)) r.nu2 = std::max(r.nu2, 2.0 * rec.e_jump);

  // nu1 = 2 sup_k |T_k z^k - z*| + sup_k lambda_k |eps^k|, with T_k z^k = z^{k+1} - lambda_k eps^k.
  double sup_step = 0.0;
  if (trace.has_history()) {
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const ProductPoint& next = i + 1 < trace.z_history.size() ? trace.z_history[i + 1] : trace.final_z;
      ProductPoint tkz = next;
      tkz.add_scaled(-recs[i].lambda, trace.eps_history[i]);
      sup_step = std::max(sup_step, weighted_norm(tkz - zstar, w));
    }
    r.nu1 = 2.0 * sup_step + sup_lambda_eps;
  } else if (std::all_of(recs.begin(), recs.end(),
                         [](const IterationRecord& x) { return std::isfinite(x.step_dist_ref); })) {
    for (const auto& rec : recs) sup_step = std::max(sup_step, rec.step_dist_ref);
    r.nu1 = 2.0 * sup_step + sup_lambda_eps;
  } else if (exact) {
    r.notes.push_back("nu1 not computed (exact run, it multiplies a zero series)");
  } else {
    throw MissingHistoryError(
        "nu1 needs |T_k z^k - z*| for every step: rerun with retain_history = true, "
        "or with the reference fixed point set so distances are tracked online");
  }

  auto combine = [&](double tau_factor) {
    SeriesConstant c;
    c.truncated = r.nu1 * r.sum_lambda_eps.truncated + r.nu2 * tau_factor * r.sum_k_eps.truncated;
    const double t1 = r.sum_lambda_eps.tail == 0.0 ? 0.0 : r.nu1 * r.sum_lambda_eps.tail;
    const double t2 = r.sum_k_eps.tail == 0.0 ? 0.0 : r.nu2 * tau_factor * r.sum_k_eps.tail;
    c.tail = t1 + t2;
    return c;
  };
  r.C1 = combine(r.tau_sup);
  r.C2 = combine(r.tau0);
  r.C3 = r.sum_lambda_eps;

  const auto& s = config.relaxation;
  if (config.regime == Regime::pointwise && detail::non_decreasing_hypotheses(s, r.alpha) &&
      std::isfinite(r.C2.value()))
    r.pointwise_case = PointwiseCase::non_decreasing;
  else if (detail::pointwise_hypotheses(s, r.alpha) && std::isfinite(r.C1.value()))
    r.pointwise_case = PointwiseCase::general;
  r.ergodic_applicable = s.infimum() > 0.0 && s.supremum() < 1.0 && std::isfinite(r.C3.value());
  return r;
}

inline double pointwise_bound_curve(const RateReport& r, std::size_t k) {
  if (!r.pointwise_case)
    throw RegimeError(
        "pointwise bound needs 0 < inf lambda_k <= sup lambda_k < 1/alpha and (k+1)|eps^k| summable");
  const double kp1 = static_cast<double>(k + 1);
  if (*r.pointwise_case == PointwiseCase::non_decreasing) {
    const double tau_k = tau_of(r.schedule.at(k), r.alpha);
    return std::sqrt((r.d0 * r.d0 + r.C2.value()) / (tau_k * kp1));
  }
  return std::sqrt((r.d0 * r.d0 + r.C1.value()) / (r.tau_inf * kp1));
}

inline double ergodic_bound_curve(const RateReport& r, std::size_t k) {
  if (!r.ergodic_applicable)
    throw RegimeError("ergodic bound needs lambda_k in ]0, 1[ and sum lambda_k |eps^k| finite");
  double lambda_k;
  if (k < r.Lambda.size()) {
    lambda_k = r.Lambda[k];
  } else {
    lambda_k = r.Lambda.empty() ? 0.0 : r.Lambda.back();
    for (std::size_t j = r.Lambda.size(); j <= k; ++j) lambda_k += r.schedule.at(j);
  }
  return 2.0 * (r.d0 + r.C3.value()) / lambda_k;
}

inline double certificate_pointwise_curve(const RateReport& r, std::size_t k) {
  return pointwise_bound_curve(r, k) / r.gamma;
}

inline double certificate_ergodic_curve(const RateReport& r, std::size_t k) {
  return ergodic_bound_curve(r, k) / r.gamma;
}

struct BoundViolation {
  std::size_t k = 0;
  std::string quantity;  // e_norm, ebar_norm, g_residual or gbar_residual
  double observed = 0.0;
  double bound = 0.0;
};

inline constexpr double kBoundSlack = 1e-6;

/// Every recorded k is checked against each applicable curve: observed <= bound (1 + slack).
inline std::vector<BoundViolation> verify_bounds(const IterationTrace& trace, const RateReport& r,
                                                 double slack = kBoundSlack) {
  std::vector<BoundViolation> out;
  auto check = [&](std::size_t k, const char* what, double observed, double bound) {
    if (!(observed <= bound * (1.0 + slack))) out.push_back({k, what, observed, bound});
  };
  for (const auto& rec : trace.records) {
    if (r.pointwise_case) {
      const double b = pointwise_bound_curve(r, rec.k);
      check(rec.k, "e_norm", rec.e_norm, b);
      check(rec.k, "g_residual", rec.g_residual, b / r.gamma);
    }
    if (r.ergodic_applicable) {
      const double b = ergodic_bound_curve(r, rec.k);
      check(rec.k, "ebar_norm", rec.ebar_norm, b);
      check(rec.k, "gbar_residual", rec.gbar_residual, b / r.gamma);
    }
  }
  return out;
}

/// Least-squares slope of log curve(k) against log(k + 1) over the integers in [k_lo, k_hi].
template <class Curve>
double loglog_slope(Curve&& curve, std::size_t k_lo, std::size_t k_hi) {
  if (k_hi <= k_lo) throw std::invalid_argument("loglog_slope: need k_lo < k_hi");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(k_hi - k_lo + 1);
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    const double x = std::log(static_cast<double>(k + 1));
    const double y = std::log(curve(k));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace gfb
