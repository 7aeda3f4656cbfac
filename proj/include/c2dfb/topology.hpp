// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "c2dfb/types.hpp"

namespace c2dfb {

enum class TopologyKind { ring, two_hop, erdos_renyi, complete, custom };

std::string to_string(TopologyKind kind);
TopologyKind parse_topology_kind(const std::string& name);

using Edge = std::pair<int, int>;

struct TopologySpec {
  TopologyKind kind = TopologyKind::ring;
  int node_count = 10;
  double edge_probability = 0.4;  // erdos_renyi only
  std::uint64_t seed = 0;
  std::optional<std::vector<Edge>> custom_edges;
};

// Gossip weights plus the spectral quantities the solvers and diagnostics use.
struct MixingMatrix {
  Eigen::MatrixXd weights;
  std::vector<Edge> edges;  // undirected, i < j, sorted
  double spectral_gap = 0.0;    // 1 - max(|lambda_2|, |lambda_m|)
  double mixing_norm = 0.0;     // ||W - I||_2^2
  double second_eigen = 0.0;    // max(|lambda_2|, |lambda_m|)
  // Seed of the sampled graph that was accepted (erdos_renyi), else spec seed.
  std::uint64_t accepted_seed = 0;

  int node_count() const { return static_cast<int>(weights.rows()); }
  // Neighbors of i (excluding i) with positive weight, ascending.
  std::vector<int> neighbors(int i) const;
};

inline constexpr int kErdosRenyiMaxAttempts = 1000;

std::vector<Edge> generate_edges(const TopologySpec& spec, std::uint64_t seed);
bool is_connected(int node_count, const std::vector<Edge>& edges);

// Metropolis-Hastings weights on the spec's graph. Erdos-Renyi graphs are
// resampled from seed-derived attempts until connected.
MixingMatrix build_mixing_matrix(const TopologySpec& spec);

// Builds W from explicit weights; checks symmetry and fills spectral fields.
// Does not require Assumption-1 validity (use validate_mixing_matrix for that).
MixingMatrix mixing_matrix_from_weights(const Eigen::MatrixXd& weights);

// Ascending eigenvalues of a symmetric matrix. Throws on asymmetry.
Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& w);

// 1 - max(|lambda_2|, |lambda_m|). Throws InvalidSpecError for non-symmetric input.
double spectral_gap(const Eigen::MatrixXd& w);
inline double spectral_gap(const MixingMatrix& w) { return spectral_gap(w.weights); }

// W~ = I + gamma (W - I), gamma in (0, 1].
MixingMatrix effective_matrix(const MixingMatrix& w, double gamma);

struct MixingCheck {
  double max_asymmetry = 0.0;
  double max_row_sum_error = 0.0;
  double max_col_sum_error = 0.0;
  double min_entry = 0.0;
  bool pattern_matches_edges = true;
  bool ok(double tol = 1e-12) const {
    return max_asymmetry <= tol && max_row_sum_error <= tol && max_col_sum_error <= tol &&
           min_entry >= 0.0 && pattern_matches_edges;
  }
};

MixingCheck check_mixing_matrix(const MixingMatrix& w);

// Throws InvalidSpecError when W violates symmetry, stochasticity or has no gap.
void validate_mixing_matrix(const MixingMatrix& w);

}  // namespace c2dfb
