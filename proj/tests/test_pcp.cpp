#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "gfb/pcp.hpp"
#include "gfb/rates.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace gfb;

namespace {

std::size_t numerical_rank(const DenseMatrix& m) {
  const auto ev = oracle::symmetric_eigenvalues(oracle::gram(testutil::to_rows(m)));
  std::size_t r = 0;
  for (double v : ev)
    if (v > 1e-12 * ev.front()) ++r;  // sigma > 1e-6 sigma_1
  return r;
}

PcpParams small_params(std::uint64_t seed = 3) {
  PcpParams p;
  p.rows = 20;
  p.cols = 15;
  p.rank = 2;
  p.rho = 0.08;
  p.seed = seed;
  return p;
}

}  // namespace

TEST(SynthInstance, NoSparseNoNoiseIsLowRank) {
  PcpParams p;
  p.rows = 12;
  p.cols = 9;
  p.rank = 3;
  p.rho = 0.0;
  p.noise_std = 0.0;
  const auto inst = synth_instance(p);
  EXPECT_EQ(inst.m, inst.low_rank);
  EXPECT_LE(numerical_rank(inst.m), 3u);
  for (double v : inst.m.data()) EXPECT_GE(v, 0.0);
  const auto ev = oracle::symmetric_eigenvalues(oracle::gram(testutil::to_rows(inst.low_rank)));
  EXPECT_NEAR(std::sqrt(ev.front()), 1.0, 1e-10);
}

TEST(SynthInstance, RankZeroGivesSparseOnly) {
  PcpParams p;
  p.rows = 10;
  p.cols = 10;
  p.rank = 0;
  p.rho = 0.137;
  p.noise_std = 0.0;
  const auto inst = synth_instance(p);
  std::size_t nonzero = 0;
  for (double v : inst.m.data()) {
    if (v == 0.0) continue;
    ++nonzero;
    EXPECT_GE(std::abs(v), p.sparse_min);
    EXPECT_LE(std::abs(v), p.sparse_max);
  }
  EXPECT_EQ(nonzero, 14u);  // round(0.137 * 100)
  EXPECT_EQ(inst.m, inst.sparse);
}

TEST(SynthInstance, DeterministicPerSeed) {
  const auto a = synth_instance(small_params(5));
  const auto b = synth_instance(small_params(5));
  const auto c = synth_instance(small_params(6));
  EXPECT_EQ(a.m, b.m);
  EXPECT_EQ(a.sparse, b.sparse);
  EXPECT_NE(a.m, c.m);
}

TEST(SynthInstance, RejectsBadParameters) {
  auto p = small_params();
  p.rank = 16;
  EXPECT_THROW(synth_instance(p), ParameterError);
  p = small_params();
  p.rho = 1.5;
  EXPECT_THROW(synth_instance(p), ParameterError);
  p = small_params();
  p.sparse_min = 2.0;
  EXPECT_THROW(synth_instance(p), ParameterError);
  p = small_params();
  p.mu1 = -1.0;
  EXPECT_THROW(synth_instance(p), ParameterError);
}

TEST(Regularization, Defaults) {
  const auto inst = PcpInstance::observed(Block::matrix(2, 2, {10.0, 0.0, 0.0, -4.0}));
  const auto reg = regularization(inst, PcpParams{});
  EXPECT_DOUBLE_EQ(reg.mu1, 1.0);
  EXPECT_NEAR(reg.mu2, 0.5, 1e-12);  // clip gives diag(1, -1), spectral norm 1
  PcpParams p;
  p.mu1 = 0.3;
  p.mu2 = 0.7;
  const auto fixed = regularization(inst, p);
  EXPECT_EQ(fixed.mu1, 0.3);
  EXPECT_EQ(fixed.mu2, 0.7);
}

TEST(PcpSmooth, GradientZeroWhereLowRankMatchesM) {
  const auto inst = synth_instance(small_params());
  const auto s = build_problem(inst, small_params());
  EXPECT_EQ(max_abs(s.problem.smooth.gradient(inst.m)), 0.0);
}

TEST(PcpSmooth, GradientMatchesFiniteDifferences) {
  const auto inst = synth_instance(small_params());
  const auto s = build_problem(inst, small_params());
  Sampler rng(9);
  DenseMatrix x(inst.m.shape());
  for (auto& v : x.data()) v = 0.3 * rng.normal();
  const auto f = [&](const oracle::Vec& v) {
    DenseMatrix b(inst.m.shape());
    std::copy(v.begin(), v.end(), b.data().begin());
    return s.problem.smooth.value(b);
  };
  const auto fd = oracle::fd_gradient(f, testutil::to_vec(x));
  const auto g = testutil::to_vec(s.problem.smooth.gradient(x));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(fd[i], g[i], 1e-5);
}

TEST(PcpSmooth, Cocoercive) {
  const auto inst = synth_instance(small_params());
  const auto s = build_problem(inst, small_params());
  Sampler rng(10);
  for (int t = 0; t < 50; ++t) {
    DenseMatrix x(inst.m.shape()), y(inst.m.shape());
    for (auto& v : x.data()) v = rng.normal();
    for (auto& v : y.data()) v = rng.normal();
    const DenseMatrix dg = s.problem.smooth.gradient(x) - s.problem.smooth.gradient(y);
    EXPECT_GE(dot(dg, x - y), dot(dg, dg) - 1e-12);
  }
}

TEST(RecoverSparse, Example) {
  const auto m = Block::vector({2.0, -0.5, 0.05});
  const auto l = Block::vector({0.0, 0.0, 0.0});
  const auto s = recover_sparse(l, m, 0.1);
  EXPECT_NEAR(s[0], 1.9, 1e-15);
  EXPECT_NEAR(s[1], -0.4, 1e-15);
  EXPECT_EQ(s[2], 0.0);
  EXPECT_THROW(recover_sparse(Block(2, 2), m, 0.1), DimensionError);
}

TEST(RecoverSparse, MinimizesOverSparsePart) {
  const auto p = small_params();
  const auto inst = synth_instance(p);
  const auto reg = regularization(inst, p);
  const DenseMatrix l = inst.low_rank;
  const DenseMatrix s = recover_sparse(l, inst.m, reg.mu1);
  const double best = evaluate_objective(l, s, inst, reg);
  Sampler rng(11);
  for (int t = 0; t < 100; ++t) {
    DenseMatrix d(inst.m.shape());
    for (auto& v : d.data()) v = 0.05 * rng.normal();
    EXPECT_GE(evaluate_objective(l, s + d, inst, reg), best - 1e-12);
  }
}

TEST(EvaluateObjective, Examples) {
  const auto inst = PcpInstance::observed(Block::matrix(2, 2, {1.0, 2.0, 3.0, 4.0}));
  const Regularization reg{0.5, 0.25};
  const DenseMatrix zero(2, 2);
  EXPECT_DOUBLE_EQ(evaluate_objective(zero, zero, inst, reg), 15.0);
  // X_S = M: only mu1 |M|_1 = 0.5 * 10
  EXPECT_DOUBLE_EQ(evaluate_objective(zero, inst.m, inst, reg), 5.0);
  // X_L = I: residual [0 2; 3 3], nuclear norm 2
  EXPECT_DOUBLE_EQ(evaluate_objective(Block::identity(2), zero, inst, reg), 11.0 + 0.5);
  auto bad = Block::identity(2);
  bad(0, 1) = -1e-6;
  EXPECT_TRUE(std::isinf(evaluate_objective(bad, zero, inst, reg)));
  bad(0, 1) = -1e-13;
  EXPECT_TRUE(std::isfinite(evaluate_objective(bad, zero, inst, reg)));
  EXPECT_THROW(evaluate_objective(Block(3, 2), zero, inst, reg), DimensionError);
}

TEST(ReducedObjective, EqualsJointAtRecoveredSparse) {
  const auto p = small_params();
  const auto inst = synth_instance(p);
  const auto reg = regularization(inst, p);
  Sampler rng(12);
  for (int t = 0; t < 10; ++t) {
    DenseMatrix l(inst.m.shape());
    for (auto& v : l.data()) v = std::abs(0.2 * rng.normal());
    const double joint = evaluate_objective(l, recover_sparse(l, inst.m, reg.mu1), inst, reg);
    EXPECT_NEAR(reduced_objective(l, inst, reg), joint, 1e-8 * std::max(1.0, joint));
  }
}

TEST(PcpSolve, ObjectiveDecreasesOverall) {
  const auto p = small_params();
  const auto s = build_problem(synth_instance(p), p);
  auto c = s.config;
  c.max_iters = 300;
  c.track_objective = true;
  const auto r = run(s.problem, c);
  const auto& rec = r.trace.records;
  ASSERT_EQ(rec.size(), 300u);
  for (std::size_t k = 1; k < rec.size(); ++k) EXPECT_TRUE(std::isfinite(rec[k].objective));
  EXPECT_LT(rec.back().objective, rec[1].objective);
  EXPECT_LE(rec.back().objective, rec[rec.size() / 2].objective + 1e-9);
}

TEST(PcpSolve, CertificateReachesTolerance) {
  const auto p = small_params();
  const auto s = build_problem(synth_instance(p), p);
  auto c = s.config;
  c.max_iters = 20000;
  c.stop_tol = 1e-16;
  const auto r = run(s.problem, c);
  ASSERT_EQ(r.reason, StopReason::tolerance);
  EXPECT_LE(r.trace.records.back().g_residual, 1e-8);
  const Block x = weighted_average(r.state.z, c.weights);
  for (double v : x.data()) EXPECT_GE(v, -1e-6);
}
