// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "c2dfb/outer_solver.hpp"

namespace c2dfb {
namespace {

MixingMatrix topology(TopologyKind kind, int m, std::uint64_t seed = 1) {
  TopologySpec spec;
  spec.kind = kind;
  spec.node_count = m;
  spec.seed = seed;
  spec.edge_probability = 0.4;
  return build_mixing_matrix(spec);
}

RunConfig tuned(int T = 30) {
  RunConfig c;
  c.lambda = 400.0;
  c.K = 15;
  c.T = T;
  c.eta_in = 0.1;
  c.gamma_in = 0.5;
  c.eta_out = 0.05;
  c.gamma_out = 0.8;
  c.compressor = Compressor::top_k(0.2);
  c.seed = 3;
  return c;
}

TEST(Variant, Names) {
  for (auto v : {Variant::c2dfb, Variant::naive, Variant::uncompressed}) EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("fast"), InvalidConfigError);
}

TEST(RunConfig, ListsEveryViolation) {
  RunConfig c;
  c.eta_in = -1.0;
  c.gamma_out = 2.0;
  c.K = 0;
  const auto errs = c.validation_errors();
  EXPECT_EQ(errs.size(), 3u);
  EXPECT_THROW(c.validate(), InvalidConfigError);
  EXPECT_DOUBLE_EQ(RunConfig{}.effective_eta_in_y(), 1.0 / 11.0);
}

TEST(Outer, SingleNodeIsPlainPenaltyDescent) {
  auto p = make_quadratic_problem(1, 4, 6, 2);
  const auto w = topology(TopologyKind::ring, 1);
  RunConfig cfg = tuned();
  PayloadLedger ledger;
  OuterState st = initialize(cfg, *p, w, ledger);
  for (int t = 0; t < 5; ++t) {
    const Vec x_old = row_of(st.x, 0);
    const Vec s_old = row_of(st.s, 0);
    outer_step(st, *p, w, cfg, ledger);
    EXPECT_LE((row_of(st.x, 0) - (x_old - cfg.eta_out * s_old)).norm(), 1e-14);
    EXPECT_LE((st.s - st.u).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Outer, ZeroStepFreezesXAndKeepsTracking) {
  auto p = make_quadratic_problem(6, 4, 6, 2);
  const auto w = topology(TopologyKind::ring, 6);
  RunConfig cfg = tuned();
  cfg.eta_out = 0.0;
  cfg.audit = true;
  PayloadLedger ledger;
  OuterState st = initialize(cfg, *p, w, ledger);
  const Eigen::RowVectorXd x_bar = st.x.colwise().mean();
  for (int t = 0; t < 5; ++t) {
    const auto rep = outer_step(st, *p, w, cfg, ledger);
    EXPECT_LE(rep.audit.tracking, 1e-9);
  }
  EXPECT_LE((st.x.colwise().mean() - x_bar).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Outer, InvariantsHoldUnderCompression) {
  auto p = make_quadratic_problem(10, 10, 20, 1);
  const auto w = topology(TopologyKind::ring, 10);
  for (const auto& c : {Compressor::identity(), Compressor::top_k(0.2), rescale_biased(Compressor::rand_k(0.3))}) {
    RunConfig cfg = tuned(20);
    cfg.compressor = c;
    // The rescaled rand_k variance needs a smaller outer step at this lambda.
    if (c.base_kind() == CompressorKind::rand_k) cfg.eta_out = 0.002;
    cfg.audit = true;
    const auto res = run(cfg, *p, w);
    EXPECT_LE(res.worst_audit.mean_update, 1e-9) << c.describe();
    EXPECT_LE(res.worst_audit.tracking, 1e-9) << c.describe();
    EXPECT_LE(res.worst_audit.inner.mean_update, 1e-9) << c.describe();
    EXPECT_LE(res.worst_audit.inner.tracking, 1e-9) << c.describe();
    EXPECT_LE(res.worst_audit.inner.aggregate, 1e-9) << c.describe();
  }
}

TEST(Outer, BitwiseDeterministic) {
  auto p = make_quadratic_problem(10, 10, 20, 1);
  const auto w = topology(TopologyKind::ring, 10);
  RunConfig cfg = tuned(15);
  cfg.compressor = rescale_biased(Compressor::rand_k(0.3));
  cfg.eta_out = 0.002;
  const auto a = run(cfg, *p, w);
  const auto b = run(cfg, *p, w);
  EXPECT_EQ(a.final_state.x, b.final_state.x);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(csv_row(a.log[i]), csv_row(b.log[i]));
}

TEST(Outer, ZeroRoundsLogsOnlyInitialRow) {
  auto p = make_quadratic_problem(4, 3, 5, 1);
  const auto w = topology(TopologyKind::ring, 4);
  const auto res = run(tuned(0), *p, w);
  ASSERT_EQ(res.log.size(), 1u);
  EXPECT_EQ(res.log[0].t, 0);
  EXPECT_EQ(res.log[0].payload_outer, 0u);
  EXPECT_EQ(res.log[0].payload_inner_y, 2u * 4u * 5u);
}

TEST(Outer, NaiveWithIdentityKeepsZeroErrorMemory) {
  auto p = make_quadratic_problem(10, 10, 20, 1);
  const auto w = topology(TopologyKind::ring, 10);
  RunConfig cfg = tuned(10);
  cfg.compressor = Compressor::identity();
  const auto a = run(cfg, *p, w);
  const auto b = run_naive_variant(cfg, *p, w);
  EXPECT_EQ(b.final_state.y.d_err.squaredNorm(), 0.0);
  EXPECT_EQ(b.final_state.z.s_err.squaredNorm(), 0.0);
  // Same per-round traffic; only the cold-start reference exchange differs.
  for (std::size_t t = 1; t < a.log.size(); ++t) {
    EXPECT_EQ(a.log[t].payload_inner_y - a.log[t - 1].payload_inner_y,
              b.log[t].payload_inner_y - b.log[t - 1].payload_inner_y);
    EXPECT_EQ(a.log[t].payload_outer, b.log[t].payload_outer);
  }
}

TEST(Outer, PayloadPerRoundMatchesAccounting) {
  auto p = make_quadratic_problem(10, 10, 20, 1);
  const auto w = topology(TopologyKind::ring, 10);
  const RunConfig cfg = tuned(3);
  const auto res = run(cfg, *p, w);
  for (std::size_t t = 1; t < res.log.size(); ++t) {
    EXPECT_EQ(res.log[t].payload_outer - res.log[t - 1].payload_outer, 2u * 10u * 10u);
    // top_k keeps 4 of 20 coordinates: 8 words per message, two messages per node and step.
    EXPECT_EQ(res.log[t].payload_inner_y - res.log[t - 1].payload_inner_y, 2u * 10u * 15u * 8u);
    EXPECT_EQ(res.log[t].payload_inner_z - res.log[t - 1].payload_inner_z, 2u * 10u * 15u * 8u);
  }
}

TEST(Outer, ConsensusDecays) {
  auto p = make_quadratic_problem(10, 10, 20, 1);
  const auto w = topology(TopologyKind::ring, 10);
  const auto res = run(tuned(150), *p, w);
  double peak = 0.0;
  for (const auto& row : res.log) peak = std::max(peak, row.diag.omega1);
  ASSERT_GT(peak, 0.0);
  EXPECT_LE(res.log.back().diag.omega1, 0.01 * peak);
}

TEST(Outer, TargetStopsEarly) {
  auto p = make_quadratic_problem(10, 10, 20, 1);
  const auto w = topology(TopologyKind::ring, 10);
  RunConfig cfg = tuned(500);
  cfg.target_grad_norm = 1e-3;
  const auto res = run(cfg, *p, w);
  EXPECT_TRUE(res.stopped_early);
  EXPECT_LE(*res.log.back().diag.grad_norm_oracle, 1e-3);
  EXPECT_LT(res.log.back().t, 500);
}

TEST(Outer, TopologyMismatchRejected) {
  auto p = make_quadratic_problem(4, 3, 5, 1);
  PayloadLedger ledger;
  EXPECT_THROW(initialize(tuned(), *p, topology(TopologyKind::ring, 5), ledger), InvalidConfigError);
}

TEST(Schedule, FormulaExample) {
  ProblemConstants c;
  c.mu = 1.0;
  c.L_f = 2.0;
  c.L_g = 2.0;
  c.C_f = 2.0;
  c.rho_g = 0.0;
  ASSERT_DOUBLE_EQ(c.kappa(), 2.0);
  const double rho = 2.0 / 3.0;
  const auto s = default_schedule(0.1, c, rho);
  EXPECT_NEAR(s.lambda, 160.0, 1e-9);
  EXPECT_EQ(s.K, 10);
  EXPECT_NEAR(s.gamma_out, rho * rho, 1e-15);
  const auto half = default_schedule(0.05, c, rho);
  EXPECT_NEAR(half.lambda, 2.0 * s.lambda, 1e-9);
  EXPECT_NEAR(half.eta_out, s.eta_out / 4.0, 1e-18);
  EXPECT_GT(half.K, s.K);
}

TEST(Schedule, GammaClippedAndUnknownConstantsRejected) {
  ProblemConstants c;
  c.mu = 1.0;
  c.L_g = 3.0;
  ScheduleCoefficients big;
  big.c_gamma = 10.0;
  EXPECT_DOUBLE_EQ(default_schedule(0.1, c, 0.5, big).gamma_out, 1.0);
  EXPECT_THROW(default_schedule(0.1, ProblemConstants{}, 0.5), InvalidConfigError);
  EXPECT_THROW(default_schedule(0.0, c, 0.5), InvalidConfigError);
}

TEST(HyperRepresentation, ReferenceSchemeNoWorseThanNaiveAtEqualPayload) {
  const auto w = topology(TopologyKind::ring, 4);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto p = make_hyper_representation_toy(4, 8, 4, seed, {.data = {.classes = 3, .samples = 400}});
    RunConfig cfg;
    cfg.lambda = 10.0;
    cfg.K = 10;
    cfg.T = 40;
    cfg.eta_in = 0.5;
    cfg.eta_out = 0.05;
    cfg.gamma_out = 0.5;
    cfg.compressor = Compressor::top_k(0.2);
    cfg.seed = seed;
    const auto ours = run(cfg, *p, w);
    RunConfig longer = cfg;
    longer.T = cfg.T + 1;
    const auto naive = run_naive_variant(longer, *p, w);
    const Words budget = ours.log.back().payload_total();
    const RoundLog* match = nullptr;
    for (const auto& row : naive.log)
      if (row.payload_total() >= budget) {
        match = &row;
        break;
      }
    ASSERT_NE(match, nullptr);
    EXPECT_LE(ours.log.back().task->val_loss, match->task->val_loss + 1e-9) << "seed " << seed;
  }
}

}  // namespace
}  // namespace c2dfb
