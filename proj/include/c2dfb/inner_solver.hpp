// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "c2dfb/compression.hpp"
#include "c2dfb/problems.hpp"
#include "c2dfb/rng.hpp"
#include "c2dfb/topology.hpp"
#include "c2dfb/types.hpp"

namespace c2dfb {

// The objective r_i(d) = h_i(x_i, d) or g_i(x_i, d) of one inner solve, with
// every node's upper variable frozen.
class InnerObjectiveFn {
 public:
  InnerObjectiveFn(const BilevelProblem& problem, InnerObjective which, double lambda, Stack x);

  int nodes() const { return problem_->node_count(); }
  int dim() const { return problem_->dim_y(); }
  InnerObjective which() const { return which_; }
  double lambda() const { return lambda_; }
  const Stack& x() const { return x_; }

  Vec gradient(int node, const Vec& d) const;
  double value(int node, const Vec& d) const;
  // Minimizer of (1/m) sum_i r_i when the problem has exact oracles.
  std::optional<Vec> optimum() const;

 private:
  const BilevelProblem* problem_;
  InnerObjective which_;
  double lambda_;
  Stack x_;
};

enum class InnerScheme {
  // Reference points: only Q(d - d_hat) travels, neighbors keep sum_j w_ij d_hat_j.
  reference_point,
  // Direct parameter compression with local error feedback memories.
  naive,
};

struct InnerParams {
  double gamma = 0.5;
  double eta = 1.0;
  int iterations = 15;
  Compressor compressor = Compressor::identity();
  InnerScheme scheme = InnerScheme::reference_point;
  Channel channel = Channel::inner_y;
  // Recompute the invariant residuals after each step.
  bool audit = false;
};

struct InnerState {
  Stack d;            // models
  Stack s;            // gradient trackers
  Stack d_ref;        // own reference points d_hat_i
  Stack s_ref;        // own tracker references s_hat_i
  Stack d_ref_agg;    // sum_j w_ij d_hat_j, maintained from received residuals
  Stack s_ref_agg;    // sum_j w_ij s_hat_j
  Stack grad;         // grad r_i(d_i) at the last evaluation point
  Stack d_err;        // naive scheme: error feedback memories
  Stack s_err;
  std::vector<Rng> rngs;  // per-node compressor streams
  int steps_taken = 0;

  int nodes() const { return static_cast<int>(d.rows()); }
  int dim() const { return static_cast<int>(d.cols()); }
};

struct InnerAudit {
  double mean_update = 0.0;   // |d_bar' - (d_bar - eta s_bar)|_inf
  double tracking = 0.0;      // |s_bar' - mean grad'|_inf
  double aggregate = 0.0;     // |agg - sum_j w_ij ref_j|_inf over d and s
};

struct InnerStepRecord {
  double compression_error = 0.0;          // Omega_1 = ||d - d_hat||^2
  double consensus_error = 0.0;            // Omega_2 = ||d - 1 d_bar||^2
  double tracker_compression_error = 0.0;  // Omega_3 = ||s - s_hat||^2
  double tracker_consensus_error = 0.0;    // Omega_4 = ||s - 1 s_bar||^2
  std::optional<double> optimality_gap;    // Omega_0 = ||d_bar - d*||^2
  Words payload_words = 0;
  InnerAudit audit;
};

struct InnerReport {
  int iterations = 0;
  Words payload_words = 0;
  std::vector<InnerStepRecord> steps;
  InnerAudit worst_audit;
};

struct InnerInitOptions {
  Channel channel = Channel::inner_y;
  InnerScheme scheme = InnerScheme::reference_point;
  std::uint64_t rng_seed = 0;
};

// Cold start: trackers s_i = grad r_i(d_i) and one uncompressed exchange that
// sets d_hat = d, s_hat = s (charged to the ledger). The naive scheme has no
// references and sends nothing.
//
// Warm start (carried != nullptr): references, aggregates, error memories and
// trackers persist, and each tracker is shifted by grad r_i(d_i) - grad_old_i
// so that s_bar equals the mean gradient of the new objective.
InnerState inner_init(const InnerObjectiveFn& r, const Stack& d0, const MixingMatrix& w,
                      const InnerState* carried, const InnerInitOptions& opt, PayloadLedger* ledger);

// One iteration of the compressed gradient-tracking update. Returns per-step
// diagnostics; throws NumericError naming node and step on non-finite gradients.
InnerStepRecord inner_step(InnerState& st, const InnerObjectiveFn& r, const MixingMatrix& w,
                           const InnerParams& p, PayloadLedger* ledger);

// K iterations. When an optimum oracle exists, a gap that grows 10x over its
// level 20 or more steps earlier raises DivergenceError.
InnerReport inner_run(InnerState& st, const InnerObjectiveFn& r, const MixingMatrix& w, const InnerParams& p,
                      PayloadLedger* ledger);

// sum_j w_ij v_j for all i, in ascending j.
Stack mix(const MixingMatrix& w, const Stack& v);

InnerStepRecord inner_snapshot(const InnerState& st, const std::optional<Vec>& optimum);

}  // namespace c2dfb
