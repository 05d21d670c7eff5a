#pragma once

// Principal component pursuit with a nonnegative low-rank part:
//
//     min_{X_L, X_S}  1/2 |M - X_L - X_S|_F^2 + mu1 |X_S|_1 + mu2 |X_L|_* + indicator(X_L >= 0)
//
// Minimizing out X_S = prox_{mu1 |.|_1}(M - X_L) leaves
//
//     min_{X_L}  env(M - X_L) + mu2 |X_L|_* + indicator(X_L >= 0),
//
// where env is the Moreau envelope of mu1 |.|_1 (gradient 1-Lipschitz, so beta = 1).
// That is a smooth term plus two simple terms, solved with n = 2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <vector>

#include "gfb/errors.hpp"
#include "gfb/operators.hpp"
#include "gfb/random.hpp"
#include "gfb/solver.hpp"
#include "gfb/space.hpp"

namespace gfb {

struct PcpParams {
  std::size_t rows = 60;
  std::size_t cols = 40;
  std::size_t rank = 2;
  double rho = 0.05;         // fraction of entries in the sparse part
  double sparse_min = 0.5;   // magnitude range of sparse entries (random sign)
  double sparse_max = 1.0;
  double noise_std = 0.01;
  std::optional<double> mu1;  // default 0.1 max|M|
  std::optional<double> mu2;  // default 0.5 |clip(M, -mu1, mu1)|_2
  std::uint64_t seed = 0;
};

inline void validate(const PcpParams& p) {
  if (p.rows == 0 || p.cols == 0) throw ParameterError("pcp: rows and cols must be positive");
  if (p.rank > std::min(p.rows, p.cols)) throw ParameterError("pcp: rank exceeds min(rows, cols)");
  if (!(p.rho >= 0.0 && p.rho <= 1.0)) throw ParameterError("pcp: rho must lie in [0, 1]");
  if (!(p.sparse_min >= 0.0 && p.sparse_min <= p.sparse_max && std::isfinite(p.sparse_max)))
    throw ParameterError("pcp: need 0 <= sparse_min <= sparse_max");
  if (!(p.noise_std >= 0.0) || !std::isfinite(p.noise_std))
    throw ParameterError("pcp: noise_std must be >= 0");
  if (p.mu1 && !(*p.mu1 > 0.0)) throw ParameterError("pcp: mu1 must be positive");
  if (p.mu2 && !(*p.mu2 > 0.0)) throw ParameterError("pcp: mu2 must be positive");
}

struct PcpInstance {
  DenseMatrix m;
  DenseMatrix low_rank;  // X_{L,0}
  DenseMatrix sparse;    // X_{S,0}
  DenseMatrix noise;
  bool has_ground_truth = true;

  /// An instance with no known decomposition (e.g. read from a file).
  static PcpInstance observed(DenseMatrix m) {
    PcpInstance inst;
    inst.low_rank = DenseMatrix(m.shape());
    inst.sparse = DenseMatrix(m.shape());
    inst.noise = DenseMatrix(m.shape());
    inst.m = std::move(m);
    inst.has_ground_truth = false;
    return inst;
  }
};

/// Draw order from Sampler(seed): G1 (rows x r), G2 (cols x r), sparse positions
/// (partial Fisher-Yates over row-major indices), then for each position a magnitude
/// and a sign, then the noise entries. Factors are half-normal |N(0, 1)|, so
/// G1 G2^T is already nonnegative and the clamp leaves its rank intact.
inline PcpInstance synth_instance(const PcpParams& p) {
  validate(p);
  Sampler rng(p.seed);
  const std::size_t rows = p.rows;
  const std::size_t cols = p.cols;
  PcpInstance inst;

  inst.low_rank = DenseMatrix(rows, cols);
  if (p.rank > 0) {
    DenseMatrix g1(rows, p.rank);
    DenseMatrix g2(cols, p.rank);
    for (auto& v : g1.data()) v = std::abs(rng.normal());
    for (auto& v : g2.data()) v = std::abs(rng.normal());
    inst.low_rank = matmul(g1, transpose(g2));
    for (auto& v : inst.low_rank.data()) v = std::max(v, 0.0);
    const double s = spectral_norm(inst.low_rank);
    if (s > 0.0) inst.low_rank *= 1.0 / s;
  }

  inst.sparse = DenseMatrix(rows, cols);
  const std::size_t total = rows * cols;
  const auto count = static_cast<std::size_t>(std::llround(p.rho * static_cast<double>(total)));
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.index(total - i)]);
  for (std::size_t i = 0; i < count; ++i) {
    const double mag = rng.uniform(p.sparse_min, p.sparse_max);
    const bool negative = rng.uniform01() < 0.5;
    inst.sparse.data()[idx[i]] = negative ? -mag : mag;
  }

  inst.noise = DenseMatrix(rows, cols);
  if (p.noise_std > 0.0)
    for (auto& v : inst.noise.data()) v = p.noise_std * rng.normal();

  inst.m = inst.low_rank + inst.sparse;
  inst.m += inst.noise;
  return inst;
}

struct Regularization {
  double mu1 = 0.0;
  double mu2 = 0.0;
};

/// mu1 and mu2, filling unset values with the data-dependent defaults.
/// X_L = 0 is optimal once mu2 >= |clip(M, -mu1, mu1)|_2, so the default takes half of that.
inline Regularization regularization(const PcpInstance& inst, const PcpParams& p) {
  Regularization r;
  r.mu1 = p.mu1 ? *p.mu1 : 0.1 * max_abs(inst.m);
  if (!(r.mu1 > 0.0)) throw ParameterError("pcp: M is zero, set mu1 explicitly");
  if (p.mu2) {
    r.mu2 = *p.mu2;
  } else {
    DenseMatrix clipped = project_box(inst.m, -r.mu1, r.mu1);
    r.mu2 = 0.5 * spectral_norm(clipped);
    if (!(r.mu2 > 0.0)) throw ParameterError("pcp: degenerate M, set mu2 explicitly");
  }
  return r;
}

inline DenseMatrix recover_sparse(const DenseMatrix& low_rank, const DenseMatrix& m, double mu1) {
  if (low_rank.shape() != m.shape())
    throw DimensionError("recover_sparse: shapes " + to_string(low_rank.shape()) + " and " +
                         to_string(m.shape()));
  return prox_scaled_l1(m - low_rank, mu1);
}

inline constexpr double kNonnegTolerance = 1e-12;

/// Objective of the joint problem; +inf if X_L has an entry below -1e-12.
inline double evaluate_objective(const DenseMatrix& low_rank, const DenseMatrix& sparse,
                                 const PcpInstance& inst, const Regularization& reg) {
  if (low_rank.shape() != inst.m.shape() || sparse.shape() != inst.m.shape())
    throw DimensionError("evaluate_objective: shape mismatch");
  for (double v : low_rank.data())
    if (v < -kNonnegTolerance) return std::numeric_limits<double>::infinity();
  DenseMatrix r = inst.m - low_rank;
  r -= sparse;
  return 0.5 * dot(r, r) + reg.mu1 * norm_l1(sparse) + reg.mu2 * nuclear_norm(low_rank);
}

inline double evaluate_objective(const DenseMatrix& low_rank, const DenseMatrix& sparse,
                                 const PcpInstance& inst, const PcpParams& p) {
  return evaluate_objective(low_rank, sparse, inst, regularization(inst, p));
}

/// Reduced objective env(M - X_L) + mu2 |X_L|_* (+inf if X_L is infeasible).
inline double reduced_objective(const DenseMatrix& low_rank, const PcpInstance& inst,
                                const Regularization& reg) {
  for (double v : low_rank.data())
    if (v < -kNonnegTolerance) return std::numeric_limits<double>::infinity();
  return moreau_env_value_grad(inst.m - low_rank, reg.mu1).value +
         reg.mu2 * nuclear_norm(low_rank);
}

struct PcpSetup {
  SplitProblem problem;
  GfbConfig config;
  Regularization reg;
};

/// Smooth term X_L -> env(M - X_L), gradient -(R - prox_{mu1 |.|_1}(R)) with R = M - X_L;
/// simple terms mu2 |.|_* and the nonnegativity indicator; weights (1/2, 1/2), gamma = 1.
/// The objective callback reports the reduced objective at the nonnegative projection
/// of its argument: the averaged iterate x^k is feasible only in the limit.
inline PcpSetup build_problem(const PcpInstance& inst, const PcpParams& p) {
  PcpSetup s;
  s.reg = regularization(inst, p);
  auto m = std::make_shared<const DenseMatrix>(inst.m);
  const double mu1 = s.reg.mu1;
  const double mu2 = s.reg.mu2;

  s.problem.shape = inst.m.shape();
  s.problem.smooth = SmoothOracle{
      "pcp-envelope",
      [m, mu1](const Block& x) { return -moreau_env_value_grad(*m - x, mu1).grad; },
      1.0,
      [m, mu1](const Block& x) { return moreau_env_value_grad(*m - x, mu1).value; }};
  s.problem.simple_terms = {nuclear_term(mu2), nonneg_term()};
  auto inst_ptr = std::make_shared<const PcpInstance>(inst);
  const Regularization reg = s.reg;
  s.problem.objective = [inst_ptr, reg](const Block& x) {
    return reduced_objective(project_nonneg(x), *inst_ptr, reg);
  };

  s.config.gamma = 1.0;
  s.config.weights = Weights({0.5, 0.5});
  s.config.relaxation = RelaxationSchedule::constant(1.0);
  s.config.regime = Regime::pointwise;
  return s;
}

inline double relative_error(const DenseMatrix& estimate, const DenseMatrix& truth) {
  const double t = norm(truth);
  if (!(t > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return norm(estimate - truth) / t;
}

}  // namespace gfb
