// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "brute_force.hpp"
#include "gfb/gfb.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace gfb;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

constexpr double kSlack = 1e-6;
constexpr std::size_t kHorizon = 2001;  // records k = 0..2000

// The 60x40 instance shared by criteria 1-4 and 8, with its reference fixed point.
struct Shared {
  PcpParams params;
  PcpSetup setup;
  FixedPointEstimate zstar;
  RunResult pointwise;
  RateReport pointwise_report;
  RunResult ergodic;
  RateReport ergodic_report;
};

Shared make_shared_runs() {
  Shared s;
  s.setup = build_problem(synth_instance(s.params), s.params);
  s.zstar = estimate_fixed_point(s.setup.problem, s.setup.config, 1e-12);

  GfbConfig c = s.setup.config;
  c.max_iters = kHorizon;
  c.track_objective = false;
  c.reference = s.zstar.z;
  s.pointwise = run(s.setup.problem, c);
  s.pointwise_report = compute_constants(s.pointwise.trace, s.zstar.z, c, s.zstar.quality);

  c.relaxation = RelaxationSchedule::constant(0.5);
  c.regime = Regime::ergodic;
  s.ergodic = run(s.setup.problem, c);
  s.ergodic_report = compute_constants(s.ergodic.trace, s.zstar.z, c, s.zstar.quality);
  return s;
}

std::size_t count_quantity(const std::vector<BoundViolation>& v, std::string_view q) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](const auto& x) { return x.quantity == q; }));
}

void reference_notes(Outcome& o, const Shared& s) {
  o.require(s.zstar.quality <= 1e-12, "reference |e| = " + fmt(s.zstar.quality) + " > 1e-12");
}

Outcome criterion_pointwise(const Shared& s) {
  Outcome o;
  reference_notes(o, s);
  const auto& r = s.pointwise_report;
  const auto& recs = s.pointwise.trace.records;
  o.require(recs.size() == kHorizon, "run stopped early at " + std::to_string(recs.size()));
  o.require(r.pointwise_case == PointwiseCase::non_decreasing, "non-decreasing lambda case not selected");
  o.require(r.C2.value() == 0.0, "C2 = " + fmt(r.C2.value()));
  if (!o.pass) return o;
  std::size_t bad = 0;
  double worst = 0.0;
  for (std::size_t k = 1; k < recs.size(); ++k) {
    const double tau_k = tau_of(recs[k].lambda, r.alpha);
    const double bound = std::sqrt(r.d0 * r.d0 / (tau_k * static_cast<double>(k + 1)));
    worst = std::max(worst, recs[k].e_norm / bound);
    if (!(recs[k].e_norm <= bound * (1 + kSlack))) ++bad;
  }
  o.require(bad == 0, std::to_string(bad) + " iterations above the curve");
  o.note("d0 = " + fmt(r.d0) + ", max |e^k| / bound = " + fmt(worst));
  return o;
}

Outcome criterion_ergodic(const Shared& s) {
  Outcome o;
  reference_notes(o, s);
  const auto& r = s.ergodic_report;
  const auto& recs = s.ergodic.trace.records;
  o.require(recs.size() == kHorizon, "run stopped early");
  o.require(r.ergodic_applicable, "ergodic bound not applicable");
  if (!o.pass) return o;
  std::size_t bad = 0;
  double worst = 0.0;
  for (std::size_t k = 1; k < recs.size(); ++k) {
    const double bound = 2.0 * r.d0 / r.Lambda[k];
    worst = std::max(worst, recs[k].ebar_norm / bound);
    if (!(recs[k].ebar_norm <= bound * (1 + kSlack))) ++bad;
  }
  o.require(bad == 0, std::to_string(bad) + " iterations above the curve");
  o.note("Lambda_2000 = " + fmt(r.Lambda.back()) + ", max |ebar^k| / bound = " + fmt(worst));
  return o;
}

Outcome criterion_certificate(const Shared& s) {
  Outcome o;
  const auto pv = verify_bounds(s.pointwise.trace, s.pointwise_report, kSlack);
  const auto ev = verify_bounds(s.ergodic.trace, s.ergodic_report, kSlack);
  o.require(count_quantity(pv, "g_residual") == 0, "pointwise certificate above its curve");
  o.require(count_quantity(ev, "gbar_residual") == 0, "ergodic certificate above its curve");
  double gap = 0.0;
  for (const auto* run : {&s.pointwise, &s.ergodic})
    for (const auto& rec : run->trace.records) gap = std::max(gap, rec.certificate_gap);
  o.require(gap <= 1e-10, "membership identity gap " + fmt(gap));

  // Membership itself: u_i = prox(u_i + theta s_i) at the last pointwise step.
  GfbConfig c = s.setup.config;
  auto state = initial_state(s.setup.problem, c);
  state.z = s.pointwise.state.z;
  gfb_iterate(state, s.setup.problem, c);
  const auto cert = certificate_g(state, s.setup.problem, c);
  o.require(cert.membership_gap <= 1e-10, "subdifferential membership gap " + fmt(cert.membership_gap));
  o.note("identity gap " + fmt(gap) + ", membership gap " + fmt(cert.membership_gap));
  return o;
}

Outcome criterion_inexact(const Shared& s) {
  Outcome o;
  GfbConfig c = s.setup.config;
  c.errors = ErrorSchedule::power_decay(1e-2, 2.5, 7, ErrorTarget::post_prox);
  c.max_iters = 5000;
  c.stop = StopCriterion::residual;
  c.stop_tol = 1e-12;  // |e^k|^2 <= 1e-12
  c.track_objective = false;
  c.reference = s.zstar.z;
  const auto r = run(s.setup.problem, c);
  const auto& recs = r.trace.records;
  o.require(r.reason == StopReason::tolerance && recs.back().e_norm <= 1e-6,
            "|e| = " + fmt(recs.back().e_norm) + " after " + std::to_string(recs.size()) + " iterations");
  const auto rep = compute_constants(r.trace, s.zstar.z, c, s.zstar.quality);
  o.require(rep.pointwise_case.has_value(), "no pointwise bound applies");
  o.require(std::isfinite(rep.C2.value()) && rep.C2.value() > 0.0, "C2 = " + fmt(rep.C2.value()));
  if (rep.pointwise_case) {
    const auto v = verify_bounds(r.trace, rep, kSlack);
    o.require(v.empty(), std::to_string(v.size()) + " bound violations");
  }
  o.note(std::to_string(recs.size()) + " iterations, C2 = " + fmt(rep.C2.value()) + " (tail " +
         fmt(rep.C2.tail) + "), nu1 = " + fmt(rep.nu1) + ", nu2 = " + fmt(rep.nu2));
  return o;
}

Outcome criterion_special_cases() {
  Outcome o;
  // (a) one simple term: forward-backward on least squares + box
  {
    Sampler rng(501);
    const Block a = rng.normal_block(30, 50);
    const Block b = rng.normal_block(30, 1);
    SplitProblem p;
    p.shape = {50, 1};
    p.smooth = least_squares_smooth(a, b);
    p.simple_terms = {box_term(-0.2, 0.3)};
    GfbConfig c;
    c.gamma = 1.2 * p.smooth.beta;
    c.relaxation = RelaxationSchedule::constant(0.9);
    c.regime = Regime::pointwise_general;
    c.max_iters = 300;
    c.retain_history = true;
    const auto r = run(p, c);
    const auto fb = oracle::forward_backward_box(testutil::to_rows(a), testutil::to_vec(b), -0.2, 0.3,
                                                 c.gamma, 0.9, oracle::Vec(50, 0.0), 300);
    double diff = 0.0;
    for (std::size_t k = 0; k < r.trace.z_history.size(); ++k)
      for (std::size_t j = 0; j < 50; ++j) diff = std::max(diff, std::abs(r.trace.z_history[k][0][j] - fb[k][j]));
    for (std::size_t j = 0; j < 50; ++j) diff = std::max(diff, std::abs(r.trace.final_z[0][j] - fb.back()[j]));
    o.require(diff <= 1e-12, "forward-backward gap " + fmt(diff));
    o.note("FB gap " + fmt(diff));
  }
  // (b) zero gradient: Douglas-Rachford on the product space, three terms
  {
    Sampler rng(502);
    const std::size_t d = 20;
    SplitProblem p;
    p.shape = {d, 1};
    p.smooth = zero_smooth(1.0);
    p.simple_terms = {l1_term(0.4), box_term(-0.5, 0.8), nonneg_term()};
    GfbConfig c;
    c.gamma = 0.7;
    c.weights = Weights({0.2, 0.3, 0.5});
    c.relaxation = RelaxationSchedule::constant(1.3);
    c.regime = Regime::pointwise_general;
    c.max_iters = 300;
    c.retain_history = true;
    c.z0 = rng.normal_point(3, p.shape, 2.0);
    const auto r = run(p, c);
    const std::vector<std::function<oracle::Vec(const oracle::Vec&, double)>> prox = {
        [](const oracle::Vec& v, double t) {
          oracle::Vec out(v.size());
          for (std::size_t j = 0; j < v.size(); ++j)
            out[j] = std::copysign(std::max(std::abs(v[j]) - 0.4 * t, 0.0), v[j]);
          return out;
        },
        [](const oracle::Vec& v, double) {
          oracle::Vec out(v.size());
          for (std::size_t j = 0; j < v.size(); ++j) out[j] = std::min(std::max(v[j], -0.5), 0.8);
          return out;
        },
        [](const oracle::Vec& v, double) {
          oracle::Vec out(v.size());
          for (std::size_t j = 0; j < v.size(); ++j) out[j] = std::max(v[j], 0.0);
          return out;
        }};
    const auto dr = oracle::product_douglas_rachford(prox, {0.2, 0.3, 0.5}, 0.7, 1.3,
                                                     testutil::to_mat(*c.z0), 300);
    double diff = 0.0;
    for (std::size_t k = 0; k < r.trace.z_history.size(); ++k)
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < d; ++j) diff = std::max(diff, std::abs(r.trace.z_history[k][i][j] - dr[k][i][j]));
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < d; ++j) diff = std::max(diff, std::abs(r.trace.final_z[i][j] - dr.back()[i][j]));
    o.require(diff <= 1e-12, "Douglas-Rachford gap " + fmt(diff));
    o.note("DR gap " + fmt(diff));
  }
  return o;
}

// A random small problem: least squares (or the PCP envelope every fifth draw) plus two or
// three simple terms with random weights and step size.
struct Draw {
  SplitProblem problem;
  GfbConfig config;
  double alpha = 0.0;
};

Draw random_draw(Sampler& rng, std::size_t index) {
  Draw d;
  if (index % 5 == 4) {
    PcpParams p;
    p.rows = 8;
    p.cols = 6;
    p.rank = 1;
    p.rho = 0.1;
    p.seed = 1000 + index;
    auto s = build_problem(synth_instance(p), p);
    d.problem = std::move(s.problem);
    d.config = std::move(s.config);
  } else {
    const std::size_t dim = 3 + rng.index(6);
    d.problem.shape = {dim, 1};
    d.problem.smooth = least_squares_smooth(rng.normal_block(dim + 2, dim), rng.normal_block(dim + 2, 1, 2.0));
    d.problem.simple_terms = {l1_term(rng.uniform(0.05, 1.0)), box_term(-1.0, 1.0)};
    if (rng.uniform01() < 0.5) d.problem.simple_terms.push_back(nonneg_term());
    d.config.weights = testutil::random_weights(rng, d.problem.size());
  }
  d.config.gamma = rng.uniform(0.1, 1.9) * d.problem.smooth.beta;
  d.config.regime = Regime::pointwise_general;
  d.alpha = require_valid(d.problem, d.config);
  return d;
}

constexpr std::size_t kDraws = 200;
constexpr double kInequalitySlack = 1e-8;

Outcome criterion_inequalities() {
  Outcome o;
  Sampler rng(600);
  std::size_t firm_bad = 0, avg_bad = 0, margin_bad = 0, descent_bad = 0, monotone_bad = 0;
  for (std::size_t t = 0; t < kDraws; ++t) {
    const Draw d = random_draw(rng, t);
    const auto& w = d.config.weights;
    const double a = d.alpha;

    // (Id - T) / (2 alpha) firmly nonexpansive; T alpha-averaged
    const auto z = rng.normal_point(d.problem.size(), d.problem.shape, 2.0);
    const auto y = rng.normal_point(d.problem.size(), d.problem.shape, 2.0);
    const auto tz = apply_T(z, d.problem, d.config);
    const auto ty = apply_T(y, d.problem, d.config);
    const auto diff_e = (1.0 / (2 * a)) * ((z - tz) - (y - ty));
    if (std::pow(weighted_norm(diff_e, w), 2) > weighted_inner(z - y, diff_e, w) + kInequalitySlack) ++firm_bad;
    const double lhs = std::pow(weighted_norm(tz - ty, w), 2);
    const double rhs = std::pow(weighted_norm(z - y, w), 2) -
                       (1 - a) / a * std::pow(weighted_norm((z - tz) - (y - ty), w), 2);
    if (lhs > rhs + kInequalitySlack) ++avg_bad;

    // Traces: exact with a random non-decreasing schedule, and inexact with pre-prox errors.
    GfbConfig c = d.config;
    const double lo = rng.uniform(0.1, 0.9) / a;
    c.relaxation = RelaxationSchedule::ramp(lo, rng.uniform(lo, 0.99 / a));
    c.z0 = rng.normal_point(d.problem.size(), d.problem.shape, 2.0);
    c.max_iters = 40;
    const auto fp = estimate_fixed_point(d.problem, d.config, 1e-12);
    c.reference = fp.z;
    const auto exact = run(d.problem, c);
    const auto& recs = exact.trace.records;
    for (std::size_t k = 0; k + 1 < recs.size(); ++k) {
      const double tau = tau_of(recs[k].lambda, a);
      const double before = recs[k].dist_ref * recs[k].dist_ref;
      if (recs[k + 1].dist_ref * recs[k + 1].dist_ref > before - tau * recs[k].e_norm * recs[k].e_norm + kInequalitySlack)
        ++descent_bad;
      if (recs[k + 1].e_norm > recs[k].e_norm + kInequalitySlack) ++monotone_bad;
      if (recs[k + 1].jump_margin < -kInequalitySlack) ++margin_bad;
    }
    c.errors = ErrorSchedule::power_decay(0.1, 2.5, 700 + t, ErrorTarget::pre_prox);
    const auto inexact = run(d.problem, c);
    for (std::size_t k = 1; k < inexact.trace.records.size(); ++k)
      if (inexact.trace.records[k].jump_margin < -kInequalitySlack) ++margin_bad;
  }
  o.require(firm_bad == 0, std::to_string(firm_bad) + " firm-nonexpansiveness failures");
  o.require(avg_bad == 0, std::to_string(avg_bad) + " averagedness failures");
  o.require(margin_bad == 0, std::to_string(margin_bad) + " residual-difference inequality failures");
  o.require(descent_bad == 0, std::to_string(descent_bad) + " per-step descent failures");
  o.require(monotone_bad == 0, std::to_string(monotone_bad) + " residual monotonicity failures");
  o.note(std::to_string(kDraws) + " draws per property");
  return o;
}

Outcome criterion_operators() {
  Outcome o;
  const auto l1 = check_prox_oracle(l1_term(1.0), brute::l1_function(), {1, 1}, 100, 0.7, 1);
  o.require(l1.converged() && l1.max_error <= 1e-6, "l1 oracle error " + fmt(l1.max_error));
  auto l1_sep = brute::l1_function();
  l1_sep.method = OracleMethod::separable_search;
  const auto l1m = check_prox_oracle(l1_term(1.0), l1_sep, {4, 3}, 20, 0.4, 2);
  o.require(l1m.converged() && l1m.max_error <= 1e-5, "l1 matrix oracle error " + fmt(l1m.max_error));
  const auto nuc = check_prox_oracle(nuclear_term(1.0), brute::nuclear_function(), {6, 4}, 20, 1.0, 3);
  o.require(nuc.converged() && nuc.max_error <= 1e-5, "nuclear oracle error " + fmt(nuc.max_error));
  double nonneg = 0.0;
  for (double theta : {0.01, 1.0, 50.0}) {
    const auto r = check_prox_oracle(nonneg_term(), brute::nonneg_indicator(), {3, 3}, 20, theta, 4);
    o.require(r.converged(), "nonneg oracle did not converge");
    nonneg = std::max(nonneg, r.max_error);
  }
  o.require(nonneg <= 1e-10, "nonneg oracle error " + fmt(nonneg));
  const auto box = check_prox_oracle(box_term(-0.5, 0.8), brute::box_indicator(-0.5, 0.8), {5, 2}, 20, 1.0, 5);
  o.require(box.converged() && box.max_error <= 1e-5, "box oracle error " + fmt(box.max_error));

  Sampler rng(700);
  double recon = 0.0, ortho = 0.0;
  for (auto [r, c] : std::vector<std::pair<std::size_t, std::size_t>>{{6, 4}, {4, 6}, {60, 40}, {17, 17}, {1, 9}}) {
    const Block m = rng.normal_block(r, c);
    const auto d = svd(m);
    recon = std::max(recon, max_abs(compose_svd(d.u, d.sigma, d.v, d.sigma.size()) - m));
    for (const Block* q : {&d.u, &d.v})
      ortho = std::max(ortho, max_abs(matmul(transpose(*q), *q) - Block::identity(q->cols())));
  }
  o.require(recon <= 1e-10, "SVD reconstruction " + fmt(recon));
  o.require(ortho <= 1e-10, "SVD orthogonality " + fmt(ortho));

  double fd_gap = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Block v = rng.normal_block(4, 3, 2.0);
    const double mu = rng.uniform(0.1, 1.5);
    const auto g = moreau_env_value_grad(v, mu).grad;
    const auto fd = oracle::fd_gradient(
        [&](const oracle::Vec& x) {
          Block b(v.shape());
          std::copy(x.begin(), x.end(), b.data().begin());
          return moreau_env_value_grad(b, mu).value;
        },
        testutil::to_vec(v));
    for (std::size_t i = 0; i < fd.size(); ++i) fd_gap = std::max(fd_gap, std::abs(fd[i] - g[i]));
  }
  o.require(fd_gap <= 1e-5, "envelope gradient vs finite differences " + fmt(fd_gap));
  o.note("max oracle error " + fmt(std::max({l1.max_error, l1m.max_error, nuc.max_error, nonneg, box.max_error})) +
         ", SVD " + fmt(std::max(recon, ortho)) + ", FD " + fmt(fd_gap));
  return o;
}

Outcome criterion_slopes(const Shared& s) {
  Outcome o;
  const double pw = loglog_slope([&](std::size_t k) { return pointwise_bound_curve(s.pointwise_report, k); }, 10, 1000);
  const double erg = loglog_slope([&](std::size_t k) { return ergodic_bound_curve(s.ergodic_report, k); }, 10, 1000);
  o.require(std::abs(pw + 0.5) <= 0.01, "pointwise slope " + fmt(pw));
  o.require(std::abs(erg + 1.0) <= 0.01, "ergodic slope " + fmt(erg));
  o.note("slopes " + fmt(pw) + " and " + fmt(erg));
  return o;
}

Outcome criterion_determinism() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "gfb_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg =
      "problem = pcp-synthetic\nseed = 0\nlambda = 1\nerrors = power:1e-2:2.5\nerror_seed = 7\n"
      "max_iters = 300\nrates = false\n";
  std::string files[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path c = dir / ("run" + std::to_string(i) + ".cfg");
    write_file_atomic(c, cfg + "output_dir = run" + std::to_string(i) + "\n");
    std::ostringstream out, err;
    const int code = cmd_solve(c, out, err);
    o.require(code == kExitOk, "solve exited " + std::to_string(code) + ": " + err.str());
    if (code == kExitOk) files[i] = read_file(dir / ("run" + std::to_string(i)) / OutputFiles::iterations);
  }
  o.require(!files[0].empty() && files[0] == files[1], "iterations.csv differs between runs");
  o.note(std::to_string(files[0].size()) + " bytes");
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  int failures = 0;
  auto report = [&](int n, const char* name, const std::function<Outcome()>& check) {
    const auto t0 = clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    std::printf("[%s] %d %s (%s) [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };

  Shared shared;
  bool shared_ok = true;
  std::string shared_error;
  try {
    shared = make_shared_runs();
  } catch (const std::exception& e) {
    shared_ok = false;
    shared_error = e.what();
  }
  auto with_shared = [&](Outcome (*f)(const Shared&)) {
    return [&, f]() {
      if (!shared_ok) throw std::runtime_error("shared runs failed: " + shared_error);
      return f(shared);
    };
  };

  report(1, "pointwise bound, exact regime", with_shared(criterion_pointwise));
  report(2, "ergodic bound", with_shared(criterion_ergodic));
  report(3, "certificate bounds and membership identity", with_shared(criterion_certificate));
  report(4, "inexact regime", with_shared(criterion_inexact));
  report(5, "forward-backward and Douglas-Rachford special cases", criterion_special_cases);
  report(6, "averagedness and trace inequalities", criterion_inequalities);
  report(7, "operator oracles", criterion_operators);
  report(8, "rate-order slopes", with_shared(criterion_slopes));
  report(9, "determinism", criterion_determinism);

  std::printf("%d of 9 criteria failed [%.1f s total]\n", failures,
              std::chrono::duration<double>(clock::now() - start).count());
  return failures == 0 ? 0 : 1;
}
