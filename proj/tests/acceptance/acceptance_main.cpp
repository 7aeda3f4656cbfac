// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "c2dfb/config.hpp"
#include "c2dfb/outer_solver.hpp"

namespace c2dfb {
namespace {

// Pinned tolerances.
constexpr double kInvariantTol = 1e-9;
constexpr double kStochasticTol = 1e-12;
constexpr int kTopKTrials = 1000;
constexpr double kRescaledSlack = 0.05;
constexpr double kInvariantSeconds = 30.0;
constexpr int kOraclePoints = 20;
constexpr double kFiniteDifferenceStep = 1e-5;
constexpr double kFiniteDifferenceTol = 1e-6;
constexpr double kPenalizedGradientTol = 1e-8;
constexpr double kBiasRatioLow = 0.3;
constexpr double kBiasRatioHigh = 0.7;
constexpr double kBiasSeconds = 60.0;
constexpr double kInnerSlopeMax = -0.01;
constexpr int kInnerBurnIn = 5;
constexpr double kTargetGradNorm = 1e-3;
constexpr int kMaxOuterRounds = 500;
constexpr double kConvergenceSeconds = 60.0;
constexpr double kPayloadRatioMax = 0.5;
constexpr double kAccuracyMin = 0.70;
constexpr int kTaskRounds = 40;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MixingMatrix topology(TopologyKind kind, int m, std::uint64_t seed = 1) {
  TopologySpec spec;
  spec.kind = kind;
  spec.node_count = m;
  spec.seed = seed;
  spec.edge_probability = 0.4;
  return build_mixing_matrix(spec);
}

// Schedule used for the quadratic end-to-end checks.
RunConfig tuned_quadratic(std::uint64_t seed) {
  RunConfig c;
  c.lambda = 400.0;
  c.K = 15;
  c.T = kMaxOuterRounds;
  c.eta_in = 0.1;
  c.gamma_in = 0.5;
  c.eta_out = 0.05;
  c.gamma_out = 0.8;
  c.compressor = Compressor::top_k(0.2);
  c.target_grad_norm = kTargetGradNorm;
  c.seed = seed;
  return c;
}

Stack random_stack(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Stack s(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) s(i, j) = normal(rng);
  return s;
}

Outcome invariants() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_mean = 0.0, worst_track = 0.0, worst_agg = 0.0, worst_stoch = 0.0;
  // Mixing matrices.
  for (auto kind : {TopologyKind::ring, TopologyKind::two_hop, TopologyKind::erdos_renyi, TopologyKind::complete})
    for (int m : {2, 5, 10, 17}) {
      const auto c = check_mixing_matrix(topology(kind, m, 3));
      worst_stoch = std::max({worst_stoch, c.max_asymmetry, c.max_row_sum_error, c.max_col_sum_error});
    }
  // Inner and outer identities under every compressor.
  auto p = make_quadratic_problem(10, 10, 20, 1);
  const auto w = topology(TopologyKind::ring, 10);
  const std::vector<Compressor> comps = {Compressor::identity(), Compressor::top_k(0.2),
                                         rescale_biased(Compressor::rand_k(0.3))};
  for (const auto& c : comps) {
    for (auto scheme : {InnerScheme::reference_point, InnerScheme::naive}) {
      RunConfig cfg = tuned_quadratic(7);
      cfg.T = 15;
      cfg.target_grad_norm.reset();
      cfg.compressor = c;
      if (c.base_kind() == CompressorKind::rand_k) cfg.eta_out = 0.002;
      cfg.variant = scheme == InnerScheme::naive ? Variant::naive : Variant::c2dfb;
      cfg.audit = true;
      const auto res = run(cfg, *p, w);
      const auto& a = res.worst_audit;
      worst_mean = std::max({worst_mean, a.mean_update, a.inner.mean_update});
      worst_track = std::max({worst_track, a.tracking, a.inner.tracking});
      worst_agg = std::max(worst_agg, a.inner.aggregate);
    }
  }
  // Compressor contraction.
  int violations = 0;
  for (int d : {4, 64, 1024}) violations += check_contraction(Compressor::top_k(0.2), d, kTopKTrials, d).violations;
  double rescaled_excess = -1.0;
  for (double r : {0.1, 0.2, 0.5}) {
    const auto base = Compressor::rand_k(r);
    const auto rep = check_contraction(rescale_biased(base), 200, 2000, 5);
    const double bound = 1.0 - rescaled_delta(base.delta_c()) + kRescaledSlack;
    rescaled_excess = std::max(rescaled_excess, rep.mean_ratio - bound);
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst_mean <= kInvariantTol && worst_track <= kInvariantTol && worst_agg <= kInvariantTol &&
           worst_stoch <= kStochasticTol && violations == 0 && rescaled_excess <= 0.0 && secs < kInvariantSeconds;
  o.detail = "mean " + fmt("%.2e", worst_mean) + ", tracking " + fmt("%.2e", worst_track) + ", aggregate " +
             fmt("%.2e", worst_agg) + ", stochastic " + fmt("%.2e", worst_stoch) + ", top_k violations " +
             std::to_string(violations) + ", rescaled margin " + fmt("%.3f", -rescaled_excess) + ", " +
             fmt("%.1f s", secs);
  return o;
}

Outcome oracle_equivalence() {
  auto p = make_quadratic_problem(10, 10, 20, 1);
  Rng rng(2024);
  std::normal_distribution<double> normal;
  double worst_fd = 0.0, worst_pen = 0.0;
  for (int k = 0; k < kOraclePoints; ++k) {
    Vec x(10);
    for (int i = 0; i < 10; ++i) x(i) = normal(rng);
    Vec fd(10);
    for (int i = 0; i < 10; ++i) {
      Vec hi = x, lo = x;
      hi(i) += kFiniteDifferenceStep;
      lo(i) -= kFiniteDifferenceStep;
      fd(i) = (p->psi(hi) - p->psi(lo)) / (2.0 * kFiniteDifferenceStep);
    }
    const Vec g = p->grad_psi(x);
    worst_fd = std::max(worst_fd, (g - fd).norm() / std::max(g.norm(), 1.0));
    const double lambda = 10.0 * (1 << (k % 4));
    const Vec yl = p->y_lambda_star(x, lambda);
    const Vec ys = p->y_star(x);
    Vec u = Vec::Zero(10);
    for (int i = 0; i < 10; ++i) u += hypergradient_estimate(*p, i, x, yl, ys, lambda);
    worst_pen = std::max(worst_pen, (u / 10.0 - p->grad_psi_lambda(x, lambda)).norm());
  }
  return {worst_fd <= kFiniteDifferenceTol && worst_pen <= kPenalizedGradientTol,
          "finite differences " + fmt("%.2e", worst_fd) + " relative, penalized gradient " + fmt("%.2e", worst_pen)};
}

Outcome bias_decay() {
  const auto t0 = std::chrono::steady_clock::now();
  auto p = make_quadratic_problem(10, 10, 20, 1);
  Rng rng(77);
  std::normal_distribution<double> normal;
  double lo = 1e300, hi = 0.0;
  bool monotone = true;
  for (int k = 0; k < 5; ++k) {
    Vec x(10);
    for (int i = 0; i < 10; ++i) x(i) = normal(rng);
    double prev = -1.0;
    for (double lambda : {10.0, 20.0, 40.0, 80.0}) {
      const double err = (p->grad_psi_lambda(x, lambda) - p->grad_psi(x)).norm();
      if (prev >= 0.0) {
        if (err > prev) monotone = false;
        lo = std::min(lo, err / prev);
        hi = std::max(hi, err / prev);
      }
      prev = err;
    }
  }
  const double secs = seconds_since(t0);
  return {monotone && lo >= kBiasRatioLow && hi <= kBiasRatioHigh && secs < kBiasSeconds,
          "ratios in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "], monotone " + (monotone ? "yes" : "no")};
}

// Least-squares slope of log(gap) against the step index.
double log_slope(const std::vector<double>& gaps, int from) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = from; k < static_cast<int>(gaps.size()); ++k) {
    const double y = std::log(gaps[k]);
    n += 1;
    sx += k;
    sy += y;
    sxx += double(k) * k;
    sxy += k * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Outcome inner_convergence() {
  auto p = make_quadratic_problem(10, 10, 20, 1);
  const auto w = topology(TopologyKind::ring, 10);
  const Stack x = random_stack(10, 10, 11);
  const Stack d0 = random_stack(10, 20, 12);
  const double lambda = 10.0;
  const InnerObjectiveFn r(*p, InnerObjective::penalized, lambda, x);
  auto solve = [&](int K) {
    InnerParams ip;
    ip.eta = 0.05 / (1.0 + lambda);
    ip.gamma = 0.5;
    ip.iterations = K;
    ip.compressor = Compressor::top_k(0.2);
    InnerState st = inner_init(r, d0, w, nullptr, {}, nullptr);
    return inner_run(st, r, w, ip, nullptr);
  };
  const auto rep = solve(45);
  std::vector<double> gaps;
  for (const auto& s : rep.steps) gaps.push_back(*s.optimality_gap);
  bool contracting = true;
  for (std::size_t k = kInnerBurnIn + 1; k < gaps.size(); ++k)
    if (!(gaps[k] < gaps[k - 1])) contracting = false;
  const double slope = log_slope(gaps, kInnerBurnIn);
  std::vector<double> finals;
  for (int K : {5, 15, 45}) finals.push_back(*solve(K).steps.back().optimality_gap);
  const bool decreasing = finals[0] > finals[1] && finals[1] > finals[2];
  return {slope <= kInnerSlopeMax && contracting && decreasing,
          "log-gap slope " + fmt("%.4f", slope) + ", contracting " + (contracting ? "yes" : "no") +
              ", final gaps K=5/15/45: " + fmt("%.3e", finals[0]) + "/" + fmt("%.3e", finals[1]) + "/" +
              fmt("%.3e", finals[2])};
}

struct Convergence {
  bool reached = false;
  int rounds = 0;
  double grad_norm = 0.0;
  Words inner_payload = 0;
  bool deterministic = true;
  double seconds = 0.0;
};

Convergence converge(TopologyKind kind, std::uint64_t seed, const Compressor& c, bool check_rerun) {
  auto p = make_quadratic_problem(10, 10, 20, seed);
  const auto w = topology(kind, 10, seed);
  RunConfig cfg = tuned_quadratic(seed);
  cfg.compressor = c;
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = run(cfg, *p, w);
  Convergence out;
  out.seconds = seconds_since(t0);
  const auto& last = res.log.back();
  out.grad_norm = *last.diag.grad_norm_oracle;
  out.reached = out.grad_norm <= kTargetGradNorm;
  out.rounds = last.t;
  out.inner_payload = last.payload_inner_y + last.payload_inner_z;
  if (check_rerun) {
    const auto again = run(cfg, *p, w);
    out.deterministic = again.final_state.x == res.final_state.x && again.log.size() == res.log.size();
  }
  return out;
}

Outcome end_to_end(TopologyKind kind) {
  const auto c = converge(kind, 1, Compressor::top_k(0.2), true);
  return {c.reached && c.rounds <= kMaxOuterRounds && c.seconds < kConvergenceSeconds && c.deterministic,
          to_string(kind) + ": grad norm " + fmt("%.3e", c.grad_norm) + " at round " + std::to_string(c.rounds) +
              ", " + fmt("%.2f s", c.seconds) + ", deterministic " + (c.deterministic ? "yes" : "no")};
}

Outcome communication_saving() {
  double worst = 0.0;
  bool all_reached = true;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto ours = converge(TopologyKind::ring, seed, Compressor::top_k(0.2), false);
    const auto full = converge(TopologyKind::ring, seed, Compressor::identity(), false);
    all_reached = all_reached && ours.reached && full.reached;
    worst = std::max(worst, static_cast<double>(ours.inner_payload) / static_cast<double>(full.inner_payload));
  }
  return {all_reached && worst <= kPayloadRatioMax,
          "worst inner payload ratio " + fmt("%.3f", worst) + " over 3 seeds, all reached " +
              (all_reached ? "yes" : "no")};
}

Outcome heterogeneous_task() {
  double min_acc = 1.0;
  double worst_margin = -1e300;
  bool ok = true;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto cfg = parse_config({{"seeds", {{"master", seed}}}, {"schedule", {{"T", kTaskRounds}}},
                                   {"problem", {{"heterogeneity", 0.8}}}, {"topology", {{"kind", "ring"}}}});
    const auto w = build_topology(cfg);
    const auto p = build_problem(cfg);
    const auto ours = run(cfg.run, *p, w);
    RunConfig longer = cfg.run;
    longer.T = cfg.run.T + 1;
    const auto naive = run_naive_variant(longer, *p, w);
    const Words budget = ours.log.back().payload_total();
    const RoundLog* match = nullptr;
    for (const auto& row : naive.log)
      if (row.payload_total() >= budget) {
        match = &row;
        break;
      }
    if (match == nullptr || !ours.log.back().task || !match->task) {
      ok = false;
      continue;
    }
    min_acc = std::min(min_acc, ours.log.back().task->val_accuracy.value_or(0.0));
    worst_margin = std::max(worst_margin, ours.log.back().task->val_loss - match->task->val_loss);
  }
  return {ok && min_acc >= kAccuracyMin && worst_margin <= 0.0,
          "min val accuracy " + fmt("%.3f", min_acc) + ", worst val-loss margin vs naive " + fmt("%+.4f", worst_margin)};
}

Outcome topology_robustness() {
  bool pass = true;
  std::string detail;
  for (auto kind : {TopologyKind::ring, TopologyKind::two_hop, TopologyKind::erdos_renyi}) {
    const auto o = end_to_end(kind);
    pass = pass && o.pass;
    if (!detail.empty()) detail += "; ";
    detail += o.detail;
  }
  return {pass, detail};
}

}  // namespace
}  // namespace c2dfb

int main() {
  using namespace c2dfb;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"invariant suite", invariants},
      {"oracle equivalence", oracle_equivalence},
      {"bias decay", bias_decay},
      {"inner linear convergence", inner_convergence},
      {"end-to-end convergence", [] { return end_to_end(TopologyKind::ring); }},
      {"communication saving", communication_saving},
      {"heterogeneous task", heterogeneous_task},
      {"topology robustness", topology_robustness},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
