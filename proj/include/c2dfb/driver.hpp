// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "c2dfb/config.hpp"

namespace c2dfb {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2 };

struct CliOverrides {
  std::optional<std::string> output_dir;
  std::optional<std::string> variant;
};

// Applies command-line overrides; throws InvalidConfigError on a bad variant name.
void apply_overrides(ExperimentConfig& cfg, const CliOverrides& ov);

struct RunArtifacts {
  std::string csv_path;
  std::string summary_path;
  nlohmann::json summary;
};

// Builds topology and problem, resolves the schedule, runs, and writes
// <output_dir>/run-<hash>.csv and run-<hash>.json.
RunArtifacts execute_run(ExperimentConfig cfg);

int cmd_run(const std::string& config_path, const CliOverrides& ov, std::ostream& out, std::ostream& err);

// Sweepable axes: lambda, K, T, eta_in, eta_in_y, eta_out, gamma_in, gamma_out, epsilon, ratio.
int cmd_sweep(const std::string& config_path, const std::string& axis, const std::vector<double>& values,
              const CliOverrides& ov, int jobs, std::ostream& out, std::ostream& err);

int cmd_topology_info(const std::string& config_path, std::ostream& out, std::ostream& err);

int cmd_check_compressor(const std::string& config_path, int dimension, int trials, std::ostream& out,
                         std::ostream& err);

}  // namespace c2dfb
