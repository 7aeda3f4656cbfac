// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "c2dfb/compression.hpp"
#include "c2dfb/inner_solver.hpp"
#include "c2dfb/metrics.hpp"
#include "c2dfb/problems.hpp"
#include "c2dfb/topology.hpp"

namespace c2dfb {

enum class Variant { c2dfb, naive, uncompressed };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct RunConfig {
  double eta_in = 1.0;
  // Step for the penalized (y) inner loop; defaults to eta_in / (1 + lambda).
  std::optional<double> eta_in_y;
  double eta_out = 1.0;
  double gamma_in = 0.5;
  double gamma_out = 0.5;
  double lambda = 10.0;
  int K = 15;
  int T = 1001;
  std::optional<double> epsilon;
  // Stop once ||grad psi(x_bar)|| <= target (oracle problems only).
  std::optional<double> target_grad_norm;
  Compressor compressor = Compressor::top_k(0.2);
  Variant variant = Variant::c2dfb;
  std::uint64_t seed = 0;
  bool audit = false;
  bool keep_message_records = false;
  bool wall_clock = false;

  double effective_eta_in_y() const { return eta_in_y ? *eta_in_y : eta_in / (1.0 + lambda); }
  // Every violated field, as "key: reason".
  std::vector<std::string> validation_errors() const;
  void validate() const;
};

struct OuterState {
  Stack x;
  Stack s;  // outer gradient trackers
  Stack u;  // last hypergradient estimates
  InnerState y;
  InnerState z;
  int t = 0;

  int nodes() const { return static_cast<int>(x.rows()); }
};

struct OuterAudit {
  double mean_update = 0.0;  // |x_bar' - (x_bar - eta_out s_bar)|_inf
  double tracking = 0.0;     // |s_bar - u_bar|_inf
  InnerAudit inner;
};

struct OuterStepReport {
  InnerReport y;
  InnerReport z;
  OuterAudit audit;
};

// Initialization: z = y, s = u = hypergradient estimate at (x0, y0, z0), cold inner states.
OuterState initialize(const RunConfig& cfg, const BilevelProblem& problem, const MixingMatrix& w,
                      PayloadLedger& ledger);

OuterStepReport outer_step(OuterState& st, const BilevelProblem& problem, const MixingMatrix& w,
                           const RunConfig& cfg, PayloadLedger& ledger);

struct RunResult {
  OuterState final_state;
  std::vector<RoundLog> log;
  PayloadLedger ledger;
  OuterAudit worst_audit;
  // Inner diagnostics of the last round.
  std::optional<OuterStepReport> last_step;
  bool stopped_early = false;
};

using RoundSink = std::function<void(const RoundLog&)>;

// Runs T outer rounds (or until the oracle target is met) and streams rows to sink.
RunResult run(const RunConfig& cfg, const BilevelProblem& problem, const MixingMatrix& w,
              const RoundSink& sink = {});

// Same outer loop with direct compression plus error feedback in the inner loops.
RunResult run_naive_variant(const RunConfig& cfg, const BilevelProblem& problem, const MixingMatrix& w,
                            const RoundSink& sink = {});

struct ScheduleCoefficients {
  double c_lambda = 1.0;
  double c_K = 1.0;
  double c_eta = 1.0;
  double c_gamma = 1.0;
};

struct Schedule {
  double lambda = 0.0;
  int K = 0;
  double eta_out = 0.0;
  double gamma_out = 0.0;
};

// lambda = c l kappa^3 / eps, K = ceil(c log(1/eps^4)), gamma_out = min(1, c rho^2),
// eta_out = c gamma_out eps^2 / (l^4 kappa^6).
Schedule default_schedule(double epsilon, const ProblemConstants& constants, double spectral_gap,
                          const ScheduleCoefficients& coeff = {});

}  // namespace c2dfb
