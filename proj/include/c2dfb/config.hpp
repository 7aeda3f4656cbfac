// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "c2dfb/compression.hpp"
#include "c2dfb/outer_solver.hpp"
#include "c2dfb/problems.hpp"
#include "c2dfb/topology.hpp"

namespace c2dfb {

struct CompressorConfig {
  std::string kind = "top_k";  // identity | top_k | rand_k
  double ratio = 0.2;
  bool rescale = false;  // apply rescale_biased (rand_k / identity only)
};

struct ProblemConfig {
  std::string family = "coefficient_tuning";  // quadratic | coefficient_tuning | hyper_representation
  int dim_x = 10;                    // quadratic
  int dim_y = 20;                    // quadratic
  double coupling = 0.5;             // quadratic
  double target = 1.0;               // quadratic
  double init_scale = 1.0;           // quadratic
  int feature_dim = 0;               // 0: family default (500 sparse, 32 dense)
  int classes = 0;                   // 0: family default (10 sparse, 4 dense)
  int samples = 0;                   // 0: family default (2000 sparse, 1200 dense)
  int head_dim = 16;                 // hyper_representation
  double heterogeneity = 0.8;
  double ridge = 1e-2;               // hyper_representation
  double x_init = -6.0;              // coefficient_tuning
};

struct SeedConfig {
  std::uint64_t master = 0;
  // Absent substreams derive from master; the echo always lists them.
  std::optional<std::uint64_t> topology;
  std::optional<std::uint64_t> data;

  std::uint64_t topology_seed() const;
  std::uint64_t data_seed() const;
};

struct ExperimentConfig {
  TopologySpec topology;
  CompressorConfig compressor;
  ProblemConfig problem;
  RunConfig run;
  ScheduleCoefficients coefficients;
  SeedConfig seeds;
  std::string output_dir = "out";
  int flush_every = 50;
  // Set when the schedule section left lambda / K / eta_out / gamma_out to the epsilon rule.
  bool lambda_from_epsilon = false;
  bool K_from_epsilon = false;
  bool eta_out_from_epsilon = false;
  bool gamma_out_from_epsilon = false;
};

// Parses and validates; throws InvalidConfigError listing every problem, one per line.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);
ExperimentConfig default_config();

// Fully explicit form: every default and derived seed spelled out.
nlohmann::json to_json(const ExperimentConfig& cfg);
// FNV-1a of the canonical echo, 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

Compressor build_compressor(const CompressorConfig& cc);
MixingMatrix build_topology(const ExperimentConfig& cfg);
std::unique_ptr<BilevelProblem> build_problem(const ExperimentConfig& cfg);
// Fills epsilon-driven schedule entries from the problem constants and spectral gap.
void resolve_schedule(ExperimentConfig& cfg, const BilevelProblem& problem, const MixingMatrix& w);

// Closest candidate within edit distance 2, or empty.
std::string suggest_key(const std::string& key, const std::vector<std::string>& candidates);
std::size_t edit_distance(const std::string& a, const std::string& b);

}  // namespace c2dfb
