// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include "c2dfb/topology.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <set>

#include "c2dfb/rng.hpp"

namespace c2dfb {

std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::ring: return "ring";
    case TopologyKind::two_hop: return "two_hop";
    case TopologyKind::erdos_renyi: return "erdos_renyi";
    case TopologyKind::complete: return "complete";
    case TopologyKind::custom: return "custom";
  }
  return "unknown";
}

TopologyKind parse_topology_kind(const std::string& name) {
  if (name == "ring") return TopologyKind::ring;
  if (name == "two_hop" || name == "2hop" || name == "2-hop") return TopologyKind::two_hop;
  if (name == "erdos_renyi" || name == "er") return TopologyKind::erdos_renyi;
  if (name == "complete") return TopologyKind::complete;
  if (name == "custom") return TopologyKind::custom;
  throw InvalidSpecError("unknown topology kind '" + name + "'");
}

std::vector<int> MixingMatrix::neighbors(int i) const {
  std::vector<int> out;
  for (int j = 0; j < node_count(); ++j) {
    if (j != i && weights(i, j) > 0.0) out.push_back(j);
  }
  return out;
}

namespace {

void add_edge(std::set<Edge>& edges, int a, int b) {
  if (a == b) return;
  edges.insert({std::min(a, b), std::max(a, b)});
}

}  // namespace

std::vector<Edge> generate_edges(const TopologySpec& spec, std::uint64_t seed) {
  const int m = spec.node_count;
  std::set<Edge> edges;
  switch (spec.kind) {
    case TopologyKind::ring:
      for (int i = 0; i < m; ++i) add_edge(edges, i, (i + 1) % m);
      break;
    case TopologyKind::two_hop:
      for (int i = 0; i < m; ++i) {
        add_edge(edges, i, (i + 1) % m);
        add_edge(edges, i, (i + 2) % m);
      }
      break;
    case TopologyKind::complete:
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) add_edge(edges, i, j);
      break;
    case TopologyKind::erdos_renyi: {
      Rng rng(seed);
      std::bernoulli_distribution coin(spec.edge_probability);
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
          if (coin(rng)) add_edge(edges, i, j);
      break;
    }
    case TopologyKind::custom:
      if (!spec.custom_edges) throw InvalidSpecError("custom topology requires an edge list");
      for (const auto& [a, b] : *spec.custom_edges) {
        if (a < 0 || b < 0 || a >= m || b >= m)
          throw InvalidSpecError("custom edge (" + std::to_string(a) + "," + std::to_string(b) +
                                 ") out of range for " + std::to_string(m) + " nodes");
        add_edge(edges, a, b);
      }
      break;
  }
  return {edges.begin(), edges.end()};
}

bool is_connected(int node_count, const std::vector<Edge>& edges) {
  if (node_count <= 1) return true;
  std::vector<std::vector<int>> adj(node_count);
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<bool> seen(node_count, false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  int visited = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++visited;
        q.push(v);
      }
    }
  }
  return visited == node_count;
}

Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& w) {
  if (w.rows() != w.cols()) throw InvalidSpecError("mixing matrix must be square");
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw InvalidSpecError("mixing matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(w, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

namespace {

double second_eigen_magnitude(const Eigen::VectorXd& ascending) {
  const auto m = ascending.size();
  if (m <= 1) return 0.0;
  // lambda_1 is the largest; lambda_2 the next, lambda_m the smallest.
  return std::max(std::abs(ascending(m - 2)), std::abs(ascending(0)));
}

void fill_spectral(MixingMatrix& out) {
  const Eigen::VectorXd ev = symmetric_eigenvalues(out.weights);
  out.second_eigen = second_eigen_magnitude(ev);
  out.spectral_gap = 1.0 - out.second_eigen;
  // W - I is symmetric, so its largest singular value is max |lambda_i - 1|.
  double s = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) s = std::max(s, std::abs(ev(i) - 1.0));
  out.mixing_norm = s * s;
}

std::vector<Edge> edges_from_weights(const Eigen::MatrixXd& w) {
  std::vector<Edge> edges;
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = i + 1; j < w.cols(); ++j)
      if (w(i, j) != 0.0) edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
  return edges;
}

Eigen::MatrixXd metropolis_weights(int m, const std::vector<Edge>& edges) {
  std::vector<int> degree(m, 0);
  for (const auto& [a, b] : edges) {
    ++degree[a];
    ++degree[b];
  }
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
  for (const auto& [a, b] : edges) {
    const double v = 1.0 / (1.0 + std::max(degree[a], degree[b]));
    w(a, b) = v;
    w(b, a) = v;
  }
  for (int i = 0; i < m; ++i) {
    double off = 0.0;
    for (int j = 0; j < m; ++j)
      if (j != i) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  return w;
}

}  // namespace

double spectral_gap(const Eigen::MatrixXd& w) {
  return 1.0 - second_eigen_magnitude(symmetric_eigenvalues(w));
}

MixingMatrix mixing_matrix_from_weights(const Eigen::MatrixXd& weights) {
  MixingMatrix out;
  out.weights = weights;
  out.edges = edges_from_weights(weights);
  fill_spectral(out);
  return out;
}

MixingMatrix build_mixing_matrix(const TopologySpec& spec) {
  if (spec.node_count < 1) throw InvalidSpecError("topology needs at least one node");
  if (spec.kind == TopologyKind::erdos_renyi &&
      !(spec.edge_probability > 0.0 && spec.edge_probability <= 1.0))
    throw InvalidSpecError("erdos_renyi edge probability must lie in (0, 1]");

  std::vector<Edge> edges;
  std::uint64_t accepted = spec.seed;
  if (spec.kind == TopologyKind::erdos_renyi) {
    bool found = false;
    for (int attempt = 0; attempt < kErdosRenyiMaxAttempts; ++attempt) {
      const std::uint64_t s = derive_seed(spec.seed, "erdos_renyi", attempt);
      edges = generate_edges(spec, s);
      if (is_connected(spec.node_count, edges)) {
        accepted = s;
        found = true;
        break;
      }
    }
    if (!found)
      throw InvalidSpecError("no connected erdos_renyi graph after " +
                             std::to_string(kErdosRenyiMaxAttempts) + " attempts from seed " +
                             std::to_string(spec.seed));
  } else {
    edges = generate_edges(spec, spec.seed);
    if (!is_connected(spec.node_count, edges))
      throw InvalidSpecError(to_string(spec.kind) + " graph with seed " + std::to_string(spec.seed) +
                             " is disconnected");
  }

  MixingMatrix out;
  out.weights = metropolis_weights(spec.node_count, edges);
  out.edges = std::move(edges);
  out.accepted_seed = accepted;
  fill_spectral(out);
  return out;
}

MixingMatrix effective_matrix(const MixingMatrix& w, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw InvalidConfigError("mixing step gamma must lie in (0, 1], got " + std::to_string(gamma));
  const auto m = w.weights.rows();
  MixingMatrix out;
  out.weights = Eigen::MatrixXd::Identity(m, m) + gamma * (w.weights - Eigen::MatrixXd::Identity(m, m));
  out.edges = w.edges;
  out.accepted_seed = w.accepted_seed;
  fill_spectral(out);
  return out;
}

MixingCheck check_mixing_matrix(const MixingMatrix& w) {
  MixingCheck c;
  const auto& a = w.weights;
  const auto m = a.rows();
  c.max_asymmetry = (a - a.transpose()).cwiseAbs().maxCoeff();
  c.max_row_sum_error = (a.rowwise().sum().array() - 1.0).abs().maxCoeff();
  c.max_col_sum_error = (a.colwise().sum().array() - 1.0).abs().maxCoeff();
  c.min_entry = a.minCoeff();
  std::set<Edge> edge_set(w.edges.begin(), w.edges.end());
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j) continue;
      const bool is_edge = edge_set.count({static_cast<int>(std::min(i, j)), static_cast<int>(std::max(i, j))}) > 0;
      if (is_edge != (a(i, j) > 0.0)) c.pattern_matches_edges = false;
    }
  }
  return c;
}

void validate_mixing_matrix(const MixingMatrix& w) {
  const MixingCheck c = check_mixing_matrix(w);
  if (c.max_asymmetry > 1e-12) throw InvalidSpecError("mixing matrix is not symmetric");
  if (c.max_row_sum_error > 1e-12 || c.max_col_sum_error > 1e-12)
    throw InvalidSpecError("mixing matrix is not doubly stochastic");
  if (c.min_entry < 0.0) throw InvalidSpecError("mixing matrix has negative entries");
  if (!c.pattern_matches_edges) throw InvalidSpecError("mixing matrix zero pattern does not match edges");
  if (w.node_count() > 1 && !(w.spectral_gap > 0.0))
    throw InvalidSpecError("mixing matrix has no spectral gap (graph disconnected or W = I)");
}

}  // namespace c2dfb
