// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include "c2dfb/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "c2dfb/outer_solver.hpp"

namespace c2dfb {

DiagnosticsSnapshot snapshot(const OuterState& st, const BilevelProblem& problem, const RunConfig& cfg) {
  DiagnosticsSnapshot d;
  const int m = st.nodes();
  d.omega1 = consensus_error(st.x);
  d.omega2 = consensus_error(st.s);
  d.tracker_norm = node_mean(st.s).norm();
  const Vec x_bar = node_mean(st.x);
  double value = 0.0;
  if (const ExactOracles* o = problem.oracles()) {
    value = o->psi(x_bar);
    d.value_is_exact = true;
    d.grad_norm_oracle = o->grad_psi(x_bar).norm();
    if (st.y.d.size() > 0)
      d.inner_gap_y = (node_mean(st.y.d) - o->inner_optimum(InnerObjective::penalized, st.x, cfg.lambda)).squaredNorm();
    if (st.z.d.size() > 0)
      d.inner_gap_z = (node_mean(st.z.d) - o->inner_optimum(InnerObjective::lower, st.x, cfg.lambda)).squaredNorm();
  } else {
    const Vec y_bar = node_mean(st.y.d);
    const Vec z_bar = node_mean(st.z.d);
    value = problem.f_mean(x_bar, y_bar) + cfg.lambda * (problem.g_mean(x_bar, y_bar) - problem.g_mean(x_bar, z_bar));
  }
  d.value_surrogate = value + d.omega1 / m + cfg.eta_out / m * d.omega2;
  return d;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_header() {
  std::string h;
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
    if (i) h += ',';
    h += kCsvColumns[i];
  }
  return h;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

std::string csv_row(const RoundLog& r) {
  std::ostringstream os;
  os << kCsvSchemaVersion << ',' << r.t << ',' << r.payload_outer << ',' << r.payload_inner_y << ','
     << r.payload_inner_z << ',' << r.payload_total() << ',' << format_double(r.wall_seconds) << ','
     << format_double(r.diag.omega1) << ',' << format_double(r.diag.omega2) << ','
     << format_double(r.diag.value_surrogate) << ',' << opt(r.diag.grad_norm_oracle) << ','
     << format_double(r.diag.tracker_norm) << ',';
  if (r.task) {
    os << format_double(r.task->train_loss) << ',' << format_double(r.task->val_loss) << ','
       << opt(r.task->val_accuracy);
  } else {
    os << ",,";
  }
  return os.str();
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, int line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw IoError("csv line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

std::optional<double> parse_optional(const std::string& s, int line) {
  if (s.empty()) return std::nullopt;
  return parse_double(s, line);
}

template <typename Int>
Int parse_int(const std::string& s, int line) {
  Int v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw IoError("csv line " + std::to_string(line) + ": bad integer '" + s + "'");
  return v;
}

}  // namespace

std::vector<CsvRecord> parse_csv_log(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header()) throw IoError("csv: header does not match schema version " + std::to_string(kCsvSchemaVersion));
  std::vector<CsvRecord> rows;
  int n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != kCsvColumns.size())
      throw IoError("csv line " + std::to_string(n) + ": expected " + std::to_string(kCsvColumns.size()) + " fields");
    CsvRecord r;
    r.schema_version = parse_int<int>(f[0], n);
    if (r.schema_version != kCsvSchemaVersion) throw IoError("csv line " + std::to_string(n) + ": schema mismatch");
    r.t = parse_int<int>(f[1], n);
    r.payload_outer = parse_int<Words>(f[2], n);
    r.payload_inner_y = parse_int<Words>(f[3], n);
    r.payload_inner_z = parse_int<Words>(f[4], n);
    r.payload_total = parse_int<Words>(f[5], n);
    r.wall_seconds = parse_double(f[6], n);
    r.omega1 = parse_double(f[7], n);
    r.omega2 = parse_double(f[8], n);
    r.value_surrogate = parse_double(f[9], n);
    r.grad_norm_oracle = parse_optional(f[10], n);
    r.tracker_norm = parse_double(f[11], n);
    r.train_loss = parse_optional(f[12], n);
    r.val_loss = parse_optional(f[13], n);
    r.val_accuracy = parse_optional(f[14], n);
    rows.push_back(r);
  }
  return rows;
}

std::vector<CsvRecord> read_csv_log(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return parse_csv_log(is);
}

CsvLogSink::CsvLogSink(std::string path, int flush_every) : path_(std::move(path)), flush_every_(flush_every) {
  os_.open(path_, std::ios::out | std::ios::trunc);
  if (!os_) throw IoError("cannot open log " + path_ + " for writing");
  os_ << csv_header() << '\n';
  os_.flush();
  if (!os_) throw IoError("write failed: " + path_);
}

CsvLogSink::~CsvLogSink() {
  if (os_.is_open()) os_.close();
}

void CsvLogSink::write(const RoundLog& row) {
  if (!os_.is_open()) throw IoError("log " + path_ + " is closed");
  if (row.t <= last_t_) throw IoError("log " + path_ + ": round index must increase");
  if (row.payload_total() < last_total_) throw IoError("log " + path_ + ": cumulative payload decreased");
  last_t_ = row.t;
  last_total_ = row.payload_total();
  os_ << csv_row(row) << '\n';
  ++rows_;
  if (flush_every_ > 0 && rows_ % flush_every_ == 0) os_.flush();
  if (!os_) throw IoError("write failed: " + path_);
}

void CsvLogSink::close() {
  if (!os_.is_open()) return;
  os_.flush();
  const bool ok = static_cast<bool>(os_);
  os_.close();
  if (!ok) throw IoError("write failed: " + path_);
}

}  // namespace c2dfb
