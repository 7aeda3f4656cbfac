// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "c2dfb/driver.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Compressed decentralized bilevel optimization runner"};
  app.require_subcommand(1);

  std::string config;
  c2dfb::CliOverrides ov;
  std::string output_dir, variant;

  auto* run = app.add_subcommand("run", "Execute one run and write CSV + JSON summary");
  run->add_option("--config", config, "JSON configuration file (defaults when omitted)");
  run->add_option("--output-dir", output_dir, "Override output_dir");
  run->add_option("--variant", variant, "Override variant (c2dfb, naive, uncompressed)");

  std::string axis;
  std::vector<double> values;
  int jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Grid sweep over one schedule or compressor key");
  sweep->add_option("--config", config, "JSON configuration file");
  sweep->add_option("--output-dir", output_dir, "Override output_dir");
  sweep->add_option("--variant", variant, "Override variant");
  sweep->add_option("--axis", axis, "Key to sweep (lambda, K, T, eta_in, eta_out, gamma_in, gamma_out, ratio, ...)")
      ->required();
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--jobs", jobs, "Cells run in parallel")->check(CLI::PositiveNumber);

  auto* topo = app.add_subcommand("topology-info", "Print the mixing matrix spectrum");
  topo->add_option("--config", config, "JSON configuration file");

  int dim = 500, trials = 200;
  auto* comp = app.add_subcommand("check-compressor", "Monte-Carlo contraction check");
  comp->add_option("--config", config, "JSON configuration file");
  comp->add_option("--dim", dim, "Vector dimension");
  comp->add_option("--trials", trials, "Random trials");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : c2dfb::kExitValidation;
  }
  if (!output_dir.empty()) ov.output_dir = output_dir;
  if (!variant.empty()) ov.variant = variant;

  if (run->parsed()) return c2dfb::cmd_run(config, ov, std::cout, std::cerr);
  if (sweep->parsed()) return c2dfb::cmd_sweep(config, axis, values, ov, jobs, std::cout, std::cerr);
  if (topo->parsed()) return c2dfb::cmd_topology_info(config, std::cout, std::cerr);
  return c2dfb::cmd_check_compressor(config, dim, trials, std::cout, std::cerr);
}
