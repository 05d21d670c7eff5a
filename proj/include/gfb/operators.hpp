#pragma once

// Proximal and smooth building blocks.
//
// Every prox map here follows prox_{theta h}(v) = argmin_x 1/2 |x - v|^2 + theta h(x).
// The solver only sees them through ProxOracle / SmoothOracle so that new terms can
// be plugged in without touching the iteration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gfb/errors.hpp"
#include "gfb/random.hpp"
#include "gfb/space.hpp"

namespace gfb {

using DenseMatrix = Block;

/// prox of a simple term: evaluate(v, theta) = prox_{theta h}(v).
struct ProxOracle {
  std::string label;
  std::function<Block(const Block&, double)> evaluate;

  Block operator()(const Block& v, double theta) const { return evaluate(v, theta); }
};

/// Smooth term with beta-cocoercive gradient (gradient is 1/beta-Lipschitz).
struct SmoothOracle {
  std::string label;
  std::function<Block(const Block&)> gradient;
  double beta = 1.0;
  std::function<double(const Block&)> value;  // optional
};

namespace detail {

inline void require_positive_scale(double theta, const char* who) {
  if (!(theta > 0.0) || !std::isfinite(theta))
    throw ParameterError(std::string(who) + ": scale must be a positive finite number, got " +
                         std::to_string(theta));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Closed-form prox maps

/// Entrywise soft-threshold sign(v) max(|v| - theta, 0).
inline Block prox_scaled_l1(const Block& v, double theta) {
  detail::require_positive_scale(theta, "prox_scaled_l1");
  Block out(v.shape());
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double a = std::abs(v[j]) - theta;
    out[j] = a > 0.0 ? std::copysign(a, v[j]) : 0.0;
  }
  return out;
}

/// Projection onto the nonnegative orthant; the indicator's prox for every scale.
inline Block project_nonneg(const Block& m) {
  Block out(m.shape());
  for (std::size_t j = 0; j < m.size(); ++j) out[j] = std::max(m[j], 0.0);
  return out;
}

/// Projection onto the box [lo, hi]^d.
inline Block project_box(const Block& m, double lo, double hi) {
  if (!(lo <= hi)) throw ParameterError("project_box: need lo <= hi");
  Block out(m.shape());
  for (std::size_t j = 0; j < m.size(); ++j) out[j] = std::clamp(m[j], lo, hi);
  return out;
}

// ---------------------------------------------------------------------------
// SVD

struct SvdResult {
  DenseMatrix u;              // rows x k, orthonormal columns
  std::vector<double> sigma;  // k = min(rows, cols), descending, >= 0
  DenseMatrix v;              // cols x k, orthonormal columns
  std::size_t sweeps = 0;
  bool converged = true;
};

struct SvdOptions {
  double tolerance = 1e-14;  // max |cos| between column pairs at convergence
  std::size_t max_sweeps = 60;
};

namespace detail {

// Columns are stored contiguously (column-major) so the pair rotations stream.
struct ColumnStore {
  std::size_t len = 0;
  std::size_t count = 0;
  std::vector<double> data;

  double* col(std::size_t j) { return data.data() + j * len; }
  const double* col(std::size_t j) const { return data.data() + j * len; }
};

inline double col_dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline void rotate(double* p, double* q, std::size_t n, double c, double s) {
  for (std::size_t i = 0; i < n; ++i) {
    const double a = p[i];
    const double b = q[i];
    p[i] = c * a - s * b;
    q[i] = s * a + c * b;
  }
}

// Fill the columns flagged in `missing` with unit vectors orthogonal to all others.
inline void complete_orthonormal(ColumnStore& u, const std::vector<bool>& missing) {
  const std::size_t m = u.len;
  std::size_t candidate = 0;
  for (std::size_t j = 0; j < u.count; ++j) {
    if (!missing[j]) continue;
    double* cj = u.col(j);
    bool placed = false;
    while (!placed && candidate < m) {
      std::fill(cj, cj + m, 0.0);
      cj[candidate++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t p = 0; p < u.count; ++p) {
          if (p == j || (missing[p] && p > j)) continue;
          const double* cp = u.col(p);
          const double d = col_dot(cj, cp, m);
          for (std::size_t i = 0; i < m; ++i) cj[i] -= d * cp[i];
        }
      }
      const double nrm = std::sqrt(col_dot(cj, cj, m));
      if (nrm > 1e-6) {
        for (std::size_t i = 0; i < m; ++i) cj[i] /= nrm;
        placed = true;
      }
    }
  }
}

// One-sided (Hestenes) Jacobi on a tall matrix: rows >= cols.
inline SvdResult svd_tall(const DenseMatrix& a, const SvdOptions& opt) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  ColumnStore w{m, n, std::vector<double>(m * n)};
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) w.col(c)[r] = a(r, c);
  ColumnStore v{n, n, std::vector<double>(n * n, 0.0)};
  for (std::size_t c = 0; c < n; ++c) v.col(c)[c] = 1.0;

  SvdResult res;
  res.converged = false;
  for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* cp = w.col(p);
        double* cq = w.col(q);
        const double alpha = col_dot(cp, cp, m);
        const double beta = col_dot(cq, cq, m);
        const double gamma = col_dot(cp, cq, m);
        if (alpha == 0.0 || beta == 0.0 || gamma == 0.0) continue;
        const double cosine = std::abs(gamma) / std::sqrt(alpha * beta);
        off = std::max(off, cosine);
        if (cosine <= opt.tolerance) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(cp, cq, m, c, s);
        rotate(v.col(p), v.col(q), n, c, s);
      }
    }
    res.sweeps = sweep + 1;
    if (off <= opt.tolerance) {
      res.converged = true;
      break;
    }
  }

  std::vector<double> sig(n);
  for (std::size_t j = 0; j < n; ++j) sig[j] = std::sqrt(col_dot(w.col(j), w.col(j), m));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return sig[i] > sig[j]; });

  ColumnStore u{m, n, std::vector<double>(m * n, 0.0)};
  ColumnStore vs{n, n, std::vector<double>(n * n, 0.0)};
  std::vector<bool> missing(n, false);
  res.sigma.resize(n);
  constexpr double kTiny = std::numeric_limits<double>::min() * 1e10;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    res.sigma[j] = sig[src];
    std::copy(v.col(src), v.col(src) + n, vs.col(j));
    if (sig[src] > kTiny) {
      for (std::size_t i = 0; i < m; ++i) u.col(j)[i] = w.col(src)[i] / sig[src];
    } else {
      res.sigma[j] = 0.0;
      missing[j] = true;
    }
  }
  complete_orthonormal(u, missing);

  // Sign convention: first entry of each U column above 1e-12 in magnitude is positive.
  for (std::size_t j = 0; j < n; ++j) {
    double* uj = u.col(j);
    for (std::size_t i = 0; i < m; ++i) {
      if (std::abs(uj[i]) > 1e-12) {
        if (uj[i] < 0.0) {
          for (std::size_t r = 0; r < m; ++r) uj[r] = -uj[r];
          double* vj = vs.col(j);
          for (std::size_t r = 0; r < n; ++r) vj[r] = -vj[r];
        }
        break;
      }
    }
  }

  res.u = DenseMatrix(m, n);
  res.v = DenseMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) res.u(i, j) = u.col(j)[i];
    for (std::size_t i = 0; i < n; ++i) res.v(i, j) = vs.col(j)[i];
  }
  return res;
}

}  // namespace detail

/// Thin SVD M = U diag(sigma) V^T by one-sided Jacobi.
inline SvdResult svd(const DenseMatrix& m, const SvdOptions& opt = {}) {
  if (m.rows() == 0 || m.cols() == 0) throw DimensionError("svd: empty matrix");
  if (!m.all_finite()) throw ParameterError("svd: matrix has non-finite entries");
  if (m.rows() >= m.cols()) return detail::svd_tall(m, opt);
  SvdResult t = detail::svd_tall(transpose(m), opt);
  std::swap(t.u, t.v);
  // Re-apply the sign convention to the new U.
  for (std::size_t j = 0; j < t.u.cols(); ++j) {
    for (std::size_t i = 0; i < t.u.rows(); ++i) {
      if (std::abs(t.u(i, j)) > 1e-12) {
        if (t.u(i, j) < 0.0) {
          for (std::size_t r = 0; r < t.u.rows(); ++r) t.u(r, j) = -t.u(r, j);
          for (std::size_t r = 0; r < t.v.rows(); ++r) t.v(r, j) = -t.v(r, j);
        }
        break;
      }
    }
  }
  return t;
}

/// U diag(s) V^T restricted to the first `rank` columns.
inline DenseMatrix compose_svd(const DenseMatrix& u, std::span<const double> s, const DenseMatrix& v,
                               std::size_t rank) {
  DenseMatrix out(u.rows(), v.rows());
  for (std::size_t k = 0; k < rank; ++k) {
    if (s[k] == 0.0) continue;
    for (std::size_t i = 0; i < u.rows(); ++i) {
      const double a = u(i, k) * s[k];
      if (a == 0.0) continue;
      for (std::size_t j = 0; j < v.rows(); ++j) out(i, j) += a * v(j, k);
    }
  }
  return out;
}

inline double nuclear_norm(const DenseMatrix& m) {
  const auto s = svd(m).sigma;
  return pairwise_sum(s);
}

/// Largest singular value.
inline double spectral_norm(const DenseMatrix& m) { return svd(m).sigma.front(); }

/// Singular-value soft-thresholding, the prox of theta |.|_*.
inline DenseMatrix prox_nuclear(const DenseMatrix& m, double theta) {
  detail::require_positive_scale(theta, "prox_nuclear");
  const SvdResult d = svd(m);
  std::vector<double> s(d.sigma.size());
  std::size_t rank = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    s[k] = std::max(d.sigma[k] - theta, 0.0);
    if (s[k] > 0.0) rank = k + 1;
  }
  return compose_svd(d.u, s, d.v, rank);
}

// ---------------------------------------------------------------------------
// Moreau envelope of mu |.|_1 (index 1)

struct EnvelopeValueGrad {
  double value = 0.0;
  Block grad;
};

/// value = 1/2 |v - p|^2 + mu |p|_1 and grad = v - p, with p = prox_{mu |.|_1}(v).
inline EnvelopeValueGrad moreau_env_value_grad(const Block& v, double mu) {
  detail::require_positive_scale(mu, "moreau_env_value_grad");
  Block p = prox_scaled_l1(v, mu);
  Block g = v - p;
  const double value = 0.5 * dot(g, g) + mu * norm_l1(p);
  return {value, std::move(g)};
}

// ---------------------------------------------------------------------------
// Oracle factories

inline ProxOracle l1_term(double weight) {
  detail::require_positive_scale(weight, "l1_term");
  return {"l1", [weight](const Block& v, double theta) { return prox_scaled_l1(v, theta * weight); }};
}

inline ProxOracle nuclear_term(double weight) {
  detail::require_positive_scale(weight, "nuclear_term");
  return {"nuclear",
          [weight](const Block& v, double theta) { return prox_nuclear(v, theta * weight); }};
}

inline ProxOracle nonneg_term() {
  return {"nonneg", [](const Block& v, double) { return project_nonneg(v); }};
}

inline ProxOracle box_term(double lo, double hi) {
  if (!(lo <= hi)) throw ParameterError("box_term: need lo <= hi");
  return {"box", [lo, hi](const Block& v, double) { return project_box(v, lo, hi); }};
}

/// f(x) = 1/2 |x - target|^2, beta = 1.
inline SmoothOracle quadratic_smooth(Block target) {
  auto b = std::make_shared<const Block>(std::move(target));
  return {"quadratic", [b](const Block& x) { return x - *b; }, 1.0,
          [b](const Block& x) {
            const Block r = x - *b;
            return 0.5 * dot(r, r);
          }};
}

/// f(x) = 1/2 |A x - b|^2 for column-vector x; beta = 1 / sigma_max(A)^2.
inline SmoothOracle least_squares_smooth(DenseMatrix a, Block b) {
  if (b.rows() != a.rows() || b.cols() != 1)
    throw DimensionError("least_squares_smooth: b must be a column with A.rows() entries");
  const double smax = spectral_norm(a);
  if (!(smax > 0.0)) throw ParameterError("least_squares_smooth: A must be nonzero");
  auto am = std::make_shared<const DenseMatrix>(std::move(a));
  auto at = std::make_shared<const DenseMatrix>(transpose(*am));
  auto bv = std::make_shared<const Block>(std::move(b));
  return {"least-squares",
          [am, at, bv](const Block& x) { return matmul(*at, matmul(*am, x) - *bv); },
          1.0 / (smax * smax),
          [am, bv](const Block& x) {
            const Block r = matmul(*am, x) - *bv;
            return 0.5 * dot(r, r);
          }};
}

/// f = 0. Any beta is admissible; it only fixes the allowed range of gamma.
inline SmoothOracle zero_smooth(double beta) {
  detail::require_positive_scale(beta, "zero_smooth");
  return {"zero", [](const Block& x) { return Block(x.shape()); }, beta,
          [](const Block&) { return 0.0; }};
}

// ---------------------------------------------------------------------------
// Brute-force prox check

enum class OracleMethod {
  // h is a gauge (support function of C = dh(0)): conditional gradient on the
  // Moreau dual min_{g in C} 1/2 |v - theta g|^2, with x = v - theta g.
  // `subgradient(x)` must return a maximizer of <s, x> over C.
  conditional_gradient,
  // h is separable across entries: per-entry grid search plus golden-section
  // refinement of 1/2 (t - v_j)^2 + theta h, using only values of h.
  separable_search,
};

/// What the brute-force check knows about h, independent of any closed-form prox.
struct ConvexFunction {
  std::function<double(const Block&)> value;
  std::function<Block(const Block&)> subgradient;  // conditional_gradient only
  OracleMethod method = OracleMethod::separable_search;
};

struct OracleReport {
  double max_error = 0.0;           // max |prox(v) - oracle(v)|
  std::size_t worst_sample = 0;
  double max_objective_excess = 0.0;  // max phi(prox(v)) - phi(oracle(v)), phi = 1/2|x-v|^2 + theta h
  std::optional<std::size_t> failed_sample;  // first sample where the oracle did not converge
  bool converged() const { return !failed_sample.has_value(); }
};

namespace detail {

struct OracleSolution {
  Block x;
  bool converged = false;
};

inline OracleSolution conditional_gradient_prox(const ConvexFunction& h, const Block& v,
                                                double theta) {
  constexpr std::size_t kMaxIter = 100000;
  // |x - prox(v)|^2 <= 2 theta gap. The gap bottoms out near |x| eps, so iterate until
  // the step stalls and then require a certified distance of 1e-7 (1 + |v|).
  const double scale = 1.0 + norm(v);
  auto certified = [&](const Block& x, const Block& g) {
    return std::sqrt(2.0 * theta * std::max(dot(x, h.subgradient(x) - g), 0.0));
  };
  Block g(v.shape());
  Block x = v;
  for (std::size_t t = 0; t < kMaxIter; ++t) {
    const Block s = h.subgradient(x);
    Block d = s - g;
    const double gap = dot(x, d);
    if (std::sqrt(2.0 * theta * std::max(gap, 0.0)) <= 1e-13 * scale) return {x, true};
    const double dd = dot(d, d);
    if (dd == 0.0) return {x, true};
    const double eta = std::clamp(gap / (theta * dd), 0.0, 1.0);
    if (theta * eta * std::sqrt(dd) <= 1e-16 * scale) break;
    g.add_scaled(eta, d);
    x = v;
    x.add_scaled(-theta, g);
  }
  return {x, certified(x, g) <= 1e-7 * scale};
}

inline OracleSolution separable_search_prox(const ConvexFunction& h, const Block& v, double theta) {
  constexpr int kGrid = 400;
  constexpr double kInvPhi = 0.6180339887498949;
  // Coordinate j is searched with the others held fixed, so start inside dom h.
  Block x = std::isfinite(h.value(v)) ? v : Block(v.shape());
  if (!std::isfinite(h.value(x))) return {x, false};
  bool ok = true;
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      auto phi = [&](double t) {
        const double saved = x[j];
        x[j] = t;
        const double val = 0.5 * (t - v[j]) * (t - v[j]) + theta * h.value(x);
        x[j] = saved;
        return std::isnan(val) ? std::numeric_limits<double>::infinity() : val;
      };
      const double radius = std::abs(v[j]) + theta + 1.0;
      const double lo = v[j] - radius;
      const double step = 2.0 * radius / kGrid;
      int best = 0;
      double best_val = std::numeric_limits<double>::infinity();
      for (int i = 0; i <= kGrid; ++i) {
        const double val = phi(lo + step * i);
        if (val < best_val) {
          best_val = val;
          best = i;
        }
      }
      if (!std::isfinite(best_val)) {
        ok = false;
        continue;
      }
      double a = lo + step * std::max(best - 1, 0);
      double b = lo + step * std::min(best + 1, kGrid);
      double c = b - kInvPhi * (b - a);
      double d = a + kInvPhi * (b - a);
      double fc = phi(c);
      double fd = phi(d);
      for (int it = 0; it < 200 && b - a > 1e-14 * (1.0 + std::abs(a)); ++it) {
        if (fc <= fd) {
          b = d;
          d = c;
          fd = fc;
          c = b - kInvPhi * (b - a);
          fc = phi(c);
        } else {
          a = c;
          c = d;
          fc = fd;
          d = a + kInvPhi * (b - a);
          fd = phi(d);
        }
      }
      // Endpoints matter when the minimizer sits on the boundary of dom h.
      double t = 0.5 * (a + b);
      double ft = phi(t);
      for (double cand : {a, b, lo + step * best}) {
        const double fv = phi(cand);
        if (fv < ft) {
          ft = fv;
          t = cand;
        }
      }
      x[j] = t;
    }
  }
  return {x, ok};
}

}  // namespace detail

/// Compares `prox` against an independent minimization of 1/2|x - v|^2 + theta h(x)
/// on each of `samples`.
inline OracleReport check_prox_oracle(const ProxOracle& prox, const ConvexFunction& h,
                                      std::span<const Block> samples, double theta) {
  detail::require_positive_scale(theta, "check_prox_oracle");
  if (!h.value) throw ParameterError("check_prox_oracle: h value is required");
  if (h.method == OracleMethod::conditional_gradient && !h.subgradient)
    throw ParameterError("check_prox_oracle: conditional gradient needs a subgradient map");
  OracleReport report;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Block& v = samples[i];
    const auto sol = h.method == OracleMethod::conditional_gradient
                         ? detail::conditional_gradient_prox(h, v, theta)
                         : detail::separable_search_prox(h, v, theta);
    if (!sol.converged && !report.failed_sample) report.failed_sample = i;
    const Block p = prox(v, theta);
    const double err = norm(p - sol.x);
    if (err > report.max_error || i == 0) {
      report.max_error = err;
      report.worst_sample = i;
    }
    auto phi = [&](const Block& x) {
      const Block r = x - v;
      return 0.5 * dot(r, r) + theta * h.value(x);
    };
    report.max_objective_excess = std::max(report.max_objective_excess, phi(p) - phi(sol.x));
  }
  return report;
}

/// Draws `count` samples with N(0, scale^2) entries of the given shape.
inline OracleReport check_prox_oracle(const ProxOracle& prox, const ConvexFunction& h, Shape shape,
                                      std::size_t count, double theta, std::uint64_t seed = 0,
                                      double scale = 2.0) {
  Sampler rng(seed);
  std::vector<Block> samples;
  samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    samples.push_back(rng.normal_block(shape.rows, shape.cols, scale));
  return check_prox_oracle(prox, h, samples, theta);
}

}  // namespace gfb
