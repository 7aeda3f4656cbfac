// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include "c2dfb/driver.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "c2dfb/metrics.hpp"
#include "c2dfb/rng.hpp"

namespace c2dfb {

using nlohmann::json;
namespace fs = std::filesystem;

void apply_overrides(ExperimentConfig& cfg, const CliOverrides& ov) {
  if (ov.output_dir) cfg.output_dir = *ov.output_dir;
  if (ov.variant) cfg.run.variant = parse_variant(*ov.variant);
}

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::out | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << text;
  os.close();
  if (!os) throw IoError("write failed: " + path);
}

json final_metrics(const RunResult& res, const BilevelProblem& problem, const RunConfig& cfg) {
  const RoundLog& last = res.log.back();
  json j = {{"t", last.t},
            {"omega1_outer", last.diag.omega1},
            {"omega2_outer", last.diag.omega2},
            {"value_surrogate", last.diag.value_surrogate},
            {"value_kind", last.diag.value_is_exact ? "psi" : "penalty_surrogate"},
            {"grad_norm_oracle", opt_json(last.diag.grad_norm_oracle)},
            {"tracker_norm", last.diag.tracker_norm},
            {"inner_gap_y", opt_json(last.diag.inner_gap_y)},
            {"inner_gap_z", opt_json(last.diag.inner_gap_z)}};
  if (const ExactOracles* o = problem.oracles()) {
    const Vec x_bar = node_mean(res.final_state.x);
    j["hypergradient_bias"] = (o->grad_psi_lambda(x_bar, cfg.lambda) - o->grad_psi(x_bar)).norm();
  } else {
    j["hypergradient_bias"] = nullptr;
  }
  if (last.task) {
    j["train_loss"] = last.task->train_loss;
    j["val_loss"] = last.task->val_loss;
    j["val_accuracy"] = opt_json(last.task->val_accuracy);
  }
  return j;
}

}  // namespace

RunArtifacts execute_run(ExperimentConfig cfg) {
  const MixingMatrix w = build_topology(cfg);
  const auto problem = build_problem(cfg);
  resolve_schedule(cfg, *problem, w);

  fs::create_directories(cfg.output_dir);
  const std::string hash = config_hash(cfg);
  RunArtifacts art;
  art.csv_path = (fs::path(cfg.output_dir) / ("run-" + hash + ".csv")).string();
  art.summary_path = (fs::path(cfg.output_dir) / ("run-" + hash + ".json")).string();

  CsvLogSink sink(art.csv_path, cfg.flush_every);
  const RunResult res = run(cfg.run, *problem, w, [&](const RoundLog& row) { sink.write(row); });
  sink.close();

  const PayloadLedger& l = res.ledger;
  art.summary = {
      {"config", to_json(cfg)},
      {"config_hash", hash},
      {"csv", art.csv_path},
      {"csv_schema_version", kCsvSchemaVersion},
      {"family", problem->family()},
      {"compressor", cfg.run.compressor.describe()},
      {"spectral_gap", w.spectral_gap},
      {"mixing_norm", w.mixing_norm},
      {"rounds", res.log.back().t},
      {"stopped_early", res.stopped_early},
      {"payload_words",
       {{"outer", l.total(Channel::outer)},
        {"inner_y", l.total(Channel::inner_y)},
        {"inner_z", l.total(Channel::inner_z)},
        {"total", l.total()}}},
      {"final", final_metrics(res, *problem, cfg.run)},
  };
  write_text(art.summary_path, art.summary.dump(2) + "\n");
  return art;
}

namespace {

ExperimentConfig load_or_default(const std::string& path) {
  return path.empty() ? default_config() : load_config(path);
}

int report(std::ostream& err, const char* what, const std::exception& e, int code) {
  err << "error (" << what << "): " << e.what() << "\n";
  return code;
}

}  // namespace

int cmd_run(const std::string& config_path, const CliOverrides& ov, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_or_default(config_path);
    apply_overrides(cfg, ov);
  } catch (const InvalidConfigError& e) {
    return report(err, "config", e, kExitValidation);
  }
  try {
    const RunArtifacts art = execute_run(cfg);
    out << "csv: " << art.csv_path << "\n"
        << "summary: " << art.summary_path << "\n"
        << "payload_words_total: " << art.summary["payload_words"]["total"].get<Words>() << "\n";
    return kExitOk;
  } catch (const InvalidConfigError& e) {
    return report(err, "config", e, kExitValidation);
  } catch (const InvalidSpecError& e) {
    return report(err, "config", e, kExitValidation);
  } catch (const std::exception& e) {
    return report(err, "runtime", e, kExitRuntime);
  }
}

namespace {

void set_axis(ExperimentConfig& cfg, const std::string& axis, double v) {
  RunConfig& r = cfg.run;
  auto as_int = [&](const char* key) {
    if (v != std::floor(v) || std::abs(v) > 1e9)
      throw InvalidConfigError(std::string("schedule.") + key + ": sweep value must be an integer");
    return static_cast<int>(v);
  };
  if (axis == "lambda" || axis == "λ") {
    r.lambda = v;
    cfg.lambda_from_epsilon = false;
  } else if (axis == "K") {
    r.K = as_int("K");
    cfg.K_from_epsilon = false;
  } else if (axis == "T") {
    r.T = as_int("T");
  } else if (axis == "eta_in") {
    r.eta_in = v;
  } else if (axis == "eta_in_y") {
    r.eta_in_y = v;
  } else if (axis == "eta_out") {
    r.eta_out = v;
    cfg.eta_out_from_epsilon = false;
  } else if (axis == "gamma_in") {
    r.gamma_in = v;
  } else if (axis == "gamma_out") {
    r.gamma_out = v;
    cfg.gamma_out_from_epsilon = false;
  } else if (axis == "epsilon") {
    r.epsilon = v;
  } else if (axis == "ratio") {
    cfg.compressor.ratio = v;
    r.compressor = build_compressor(cfg.compressor);
  } else {
    throw InvalidConfigError("sweep axis '" + axis +
                             "' is not a schedule or compressor key (lambda, K, T, eta_in, eta_in_y, eta_out, "
                             "gamma_in, gamma_out, epsilon, ratio)");
  }
  r.validate();
}

struct Cell {
  double value = 0.0;
  int code = kExitOk;
  std::string error;
  RunArtifacts art;
};

}  // namespace

int cmd_sweep(const std::string& config_path, const std::string& axis, const std::vector<double>& values,
              const CliOverrides& ov, int jobs, std::ostream& out, std::ostream& err) {
  ExperimentConfig base;
  try {
    base = load_or_default(config_path);
    apply_overrides(base, ov);
    if (values.empty()) throw InvalidConfigError("sweep: no values given");
    if (jobs < 1) throw InvalidConfigError("sweep: --jobs must be >= 1");
    ExperimentConfig probe = base;
    set_axis(probe, axis, values.front());
  } catch (const InvalidConfigError& e) {
    return report(err, "config", e, kExitValidation);
  }

  std::vector<Cell> cells(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      Cell& c = cells[i];
      c.value = values[i];
      try {
        ExperimentConfig cfg = base;
        set_axis(cfg, axis, values[i]);
        c.art = execute_run(cfg);
      } catch (const InvalidConfigError& e) {
        c.code = kExitValidation;
        c.error = e.what();
      } catch (const InvalidSpecError& e) {
        c.code = kExitValidation;
        c.error = e.what();
      } catch (const std::exception& e) {
        c.code = kExitRuntime;
        c.error = e.what();
      }
    }
  };
  const int n_threads = std::min<int>(jobs, static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  int code = kExitOk;
  json rows = json::array();
  std::ostringstream table;
  table << "value,status,payload_words_total,grad_norm_oracle,hypergradient_bias,value_surrogate,inner_gap_y,inner_gap_z\n";
  auto cell_text = [](const json& v) { return v.is_null() ? std::string() : format_double(v.get<double>()); };
  for (const Cell& c : cells) {
    code = std::max(code, c.code);
    json row = {{"value", c.value}};
    if (c.code != kExitOk) {
      row["status"] = "failed";
      row["error"] = c.error;
      err << "sweep cell " << axis << "=" << format_double(c.value) << " failed: " << c.error << "\n";
      table << format_double(c.value) << ",failed,,,,,,\n";
    } else {
      const json& f = c.art.summary["final"];
      row["status"] = "ok";
      row["csv"] = c.art.csv_path;
      row["summary"] = c.art.summary_path;
      row["payload_words_total"] = c.art.summary["payload_words"]["total"];
      row["final"] = f;
      table << format_double(c.value) << ",ok," << c.art.summary["payload_words"]["total"].get<Words>() << ','
            << cell_text(f["grad_norm_oracle"]) << ',' << cell_text(f["hypergradient_bias"]) << ','
            << cell_text(f["value_surrogate"]) << ',' << cell_text(f["inner_gap_y"]) << ','
            << cell_text(f["inner_gap_z"]) << "\n";
    }
    rows.push_back(row);
  }

  try {
    fs::create_directories(base.output_dir);
    const std::string stem = "sweep-" + config_hash(base) + "-" + (axis == "λ" ? std::string("lambda") : axis);
    const std::string json_path = (fs::path(base.output_dir) / (stem + ".json")).string();
    const std::string csv_path = (fs::path(base.output_dir) / (stem + ".csv")).string();
    write_text(json_path, json{{"axis", axis}, {"base_config", to_json(base)}, {"cells", rows}}.dump(2) + "\n");
    write_text(csv_path, table.str());
    out << table.str() << "summary: " << json_path << "\ntable: " << csv_path << "\n";
  } catch (const std::exception& e) {
    return report(err, "runtime", e, kExitRuntime);
  }
  return code;
}

int cmd_topology_info(const std::string& config_path, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_or_default(config_path);
  } catch (const InvalidConfigError& e) {
    return report(err, "config", e, kExitValidation);
  }
  try {
    const MixingMatrix w = build_topology(cfg);
    out << std::setprecision(17);
    out << "kind: " << to_string(cfg.topology.kind) << "\n"
        << "nodes: " << w.node_count() << "\n"
        << "accepted_seed: " << w.accepted_seed << "\n"
        << "edges:";
    for (const auto& [i, j] : w.edges) out << " " << i << "-" << j;
    out << "\n"
        << "spectral_gap: " << w.spectral_gap << "\n"
        << "mixing_norm: " << w.mixing_norm << "\n"
        << "second_eigen: " << w.second_eigen << "\n";
    return kExitOk;
  } catch (const InvalidSpecError& e) {
    return report(err, "config", e, kExitValidation);
  } catch (const InvalidConfigError& e) {
    return report(err, "config", e, kExitValidation);
  } catch (const std::exception& e) {
    return report(err, "runtime", e, kExitRuntime);
  }
}

int cmd_check_compressor(const std::string& config_path, int dimension, int trials, std::ostream& out,
                         std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_or_default(config_path);
    if (dimension < 1) throw InvalidConfigError("check-compressor: --dim must be >= 1");
    if (trials < 1) throw InvalidConfigError("check-compressor: --trials must be >= 1");
  } catch (const InvalidConfigError& e) {
    return report(err, "config", e, kExitValidation);
  }
  try {
    const Compressor& c = cfg.run.compressor;
    const ContractionReport r =
        check_contraction(c, dimension, trials, derive_seed(cfg.seeds.master, "check-compressor", 0));
    out << std::setprecision(17);
    out << "compressor: " << c.describe() << "\n"
        << "delta_c: " << c.delta_c() << "\n"
        << "dimension: " << r.dimension << "\n"
        << "trials: " << r.trials << "\n"
        << "worst_ratio: " << r.worst_ratio << "\n"
        << "mean_ratio: " << r.mean_ratio << "\n"
        << "bound: " << r.bound << "\n"
        << "violations: " << r.violations << "\n";
    return r.violations == 0 ? kExitOk : kExitRuntime;
  } catch (const std::exception& e) {
    return report(err, "runtime", e, kExitRuntime);
  }
}

}  // namespace c2dfb
