// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "c2dfb/problems.hpp"
#include "c2dfb/types.hpp"

namespace c2dfb {

struct OuterState;
struct RunConfig;

struct DiagnosticsSnapshot {
  double omega1 = 0.0;           // ||x - 1 x_bar||^2
  double omega2 = 0.0;           // ||s_x - 1 s_bar_x||^2
  double value_surrogate = 0.0;  // psi(x_bar) + omega1/m + eta_out/m omega2
  // True when the value term is the exact psi; otherwise it is the penalty
  // surrogate f(x_bar, y_bar) + lambda (g(x_bar, y_bar) - g(x_bar, z_bar)).
  bool value_is_exact = false;
  std::optional<double> grad_norm_oracle;  // ||grad psi(x_bar)||
  double tracker_norm = 0.0;               // ||s_bar_x||
  std::optional<double> inner_gap_y;       // ||y_bar - y_lambda*||^2 for the current x
  std::optional<double> inner_gap_z;       // ||z_bar - y*||^2
};

DiagnosticsSnapshot snapshot(const OuterState& st, const BilevelProblem& problem, const RunConfig& cfg);

struct RoundLog {
  int t = 0;
  Words payload_outer = 0;
  Words payload_inner_y = 0;
  Words payload_inner_z = 0;
  double wall_seconds = 0.0;
  DiagnosticsSnapshot diag;
  std::optional<TaskMetrics> task;

  Words payload_total() const { return payload_outer + payload_inner_y + payload_inner_z; }
};

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr std::array<std::string_view, 15> kCsvColumns = {
    "schema_version", "t",           "payload_words_outer", "payload_words_inner_y", "payload_words_inner_z",
    "payload_words_total", "wall_seconds", "omega1_outer", "omega2_outer", "value_surrogate",
    "grad_norm_oracle", "tracker_norm", "train_loss", "val_loss", "val_accuracy"};

std::string csv_header();
std::string csv_row(const RoundLog& row);

// One parsed CSV row. Optional columns are empty in the file when absent.
struct CsvRecord {
  int schema_version = 0;
  int t = 0;
  Words payload_outer = 0;
  Words payload_inner_y = 0;
  Words payload_inner_z = 0;
  Words payload_total = 0;
  double wall_seconds = 0.0;
  double omega1 = 0.0;
  double omega2 = 0.0;
  double value_surrogate = 0.0;
  std::optional<double> grad_norm_oracle;
  double tracker_norm = 0.0;
  std::optional<double> train_loss;
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;
};

std::vector<CsvRecord> parse_csv_log(std::istream& is);
std::vector<CsvRecord> read_csv_log(const std::string& path);

// Single-writer CSV sink: header on open, flush every `flush_every` rows and on close.
class CsvLogSink {
 public:
  CsvLogSink(std::string path, int flush_every = 50);
  CsvLogSink(const CsvLogSink&) = delete;
  CsvLogSink& operator=(const CsvLogSink&) = delete;
  ~CsvLogSink();

  void write(const RoundLog& row);
  void close();
  const std::string& path() const { return path_; }
  int rows_written() const { return rows_; }

 private:
  std::string path_;
  std::ofstream os_;
  int flush_every_;
  int rows_ = 0;
  int last_t_ = -1;
  Words last_total_ = 0;
};

inline void write_log(CsvLogSink& sink, const RoundLog& row) { sink.write(row); }

// Decimal with 17 significant digits; parses back to the same double.
std::string format_double(double v);

}  // namespace c2dfb
