// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include "c2dfb/compression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace c2dfb {

std::string to_string(CompressorKind kind) {
  switch (kind) {
    case CompressorKind::identity: return "identity";
    case CompressorKind::top_k: return "top_k";
    case CompressorKind::rand_k: return "rand_k";
    case CompressorKind::rescaled: return "rescaled";
  }
  return "unknown";
}

CompressorKind parse_compressor_kind(const std::string& name) {
  if (name == "identity" || name == "none") return CompressorKind::identity;
  if (name == "top_k" || name == "topk") return CompressorKind::top_k;
  if (name == "rand_k" || name == "randk") return CompressorKind::rand_k;
  throw InvalidConfigError("unknown compressor kind '" + name + "'");
}

namespace {

void check_ratio(double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw InvalidConfigError("compression ratio must lie in (0, 1], got " + std::to_string(ratio));
}

}  // namespace

Compressor Compressor::identity() { return Compressor(CompressorKind::identity, 1.0, 1.0, false); }

Compressor Compressor::top_k(double ratio) {
  check_ratio(ratio);
  return Compressor(CompressorKind::top_k, ratio, ratio, true);
}

Compressor Compressor::rand_k(double ratio) {
  check_ratio(ratio);
  return Compressor(CompressorKind::rand_k, ratio, 2.0 - 1.0 / ratio, false);
}

CompressorKind Compressor::base_kind() const {
  return kind_ == CompressorKind::rescaled ? inner_->base_kind() : kind_;
}

bool Compressor::lossless() const {
  if (kind_ == CompressorKind::identity) return true;
  if (kind_ == CompressorKind::rescaled) return scale_ == 1.0 && inner_->lossless();
  return false;
}

int Compressor::kept(int dimension) const {
  if (kind_ == CompressorKind::rescaled) return inner_->kept(dimension);
  if (kind_ == CompressorKind::identity) return dimension;
  const int k = static_cast<int>(std::floor(ratio_ * dimension));
  return std::clamp(k, 1, std::max(dimension, 1));
}

double Compressor::output_scale(int dimension) const {
  switch (kind_) {
    case CompressorKind::rescaled: return scale_ * inner_->output_scale(dimension);
    case CompressorKind::rand_k: return static_cast<double>(dimension) / kept(dimension);
    default: return 1.0;
  }
}

std::string Compressor::describe() const {
  std::ostringstream os;
  if (kind_ == CompressorKind::rescaled) {
    os << "rescaled(" << inner_->describe() << ", 1/" << 1.0 / scale_ << ")";
  } else {
    os << to_string(kind_);
    if (kind_ != CompressorKind::identity) os << "(ratio=" << ratio_ << ")";
  }
  return os.str();
}

double rescaled_delta(double delta_c) { return 1.0 / (2.0 - delta_c); }

Compressor rescale_biased(const Compressor& c) {
  if (c.biased())
    throw InvalidConfigError("rescale_biased expects an unbiased compressor, got " + c.describe());
  const double divisor = 2.0 - c.delta_c();
  Compressor out(CompressorKind::rescaled, c.ratio(), rescaled_delta(c.delta_c()), c.kind() != CompressorKind::identity);
  out.scale_ = 1.0 / divisor;
  out.inner_ = std::make_shared<const Compressor>(c);
  return out;
}

namespace {

std::vector<int> top_k_indices(std::span<const double> v, int k) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  // Larger magnitude first; equal magnitudes keep the lower index.
  auto before = [&](int a, int b) {
    const double fa = std::abs(v[a]);
    const double fb = std::abs(v[b]);
    return fa > fb || (fa == fb && a < b);
  };
  if (k < static_cast<int>(idx.size())) {
    std::nth_element(idx.begin(), idx.begin() + k, idx.end(), before);
    idx.resize(k);
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<int> rand_k_indices(int d, int k, Rng& rng) {
  std::vector<int> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, d - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

CompressedVector compress(const Compressor& c, std::span<const double> v, Rng* rng) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]))
      throw NumericError("compress: non-finite entry at index " + std::to_string(i));
  }
  const int d = static_cast<int>(v.size());
  CompressedVector msg;
  msg.dimension = d;
  const CompressorKind base = c.base_kind();
  const double scale = c.output_scale(d);

  if (base == CompressorKind::identity) {
    msg.dense = true;
    msg.values.assign(v.begin(), v.end());
    if (scale != 1.0)
      for (double& x : msg.values) x *= scale;
    msg.payload_words = payload_words(msg);
    return msg;
  }

  const int k = c.kept(d);
  if (base == CompressorKind::top_k) {
    msg.indices = top_k_indices(v, k);
  } else {
    if (rng == nullptr) throw InvalidConfigError("rand_k compression requires a random generator");
    msg.indices = rand_k_indices(d, k, *rng);
  }
  msg.values.reserve(msg.indices.size());
  for (int i : msg.indices) msg.values.push_back(v[i] * scale);
  msg.payload_words = payload_words(msg);
  return msg;
}

Vec decompress(const CompressedVector& msg) {
  Vec out = Vec::Zero(msg.dimension);
  accumulate(msg, 1.0, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

void accumulate(const CompressedVector& msg, double weight, std::span<double> out) {
  if (static_cast<int>(out.size()) != msg.dimension)
    throw ShapeError("accumulate: message dimension " + std::to_string(msg.dimension) +
                     " does not match target " + std::to_string(out.size()));
  if (msg.dense) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += weight * msg.values[i];
    return;
  }
  for (std::size_t n = 0; n < msg.indices.size(); ++n) out[msg.indices[n]] += weight * msg.values[n];
}

Words payload_words(const CompressedVector& msg) {
  if (msg.dense) return static_cast<Words>(msg.dimension);
  return 2 * static_cast<Words>(msg.indices.size());
}

ContractionReport check_contraction(const Compressor& c, int dimension, int trials, std::uint64_t seed) {
  ContractionReport r;
  r.dimension = dimension;
  r.trials = trials;
  if (c.kind() == CompressorKind::top_k)
    r.bound = 1.0 - static_cast<double>(c.kept(dimension)) / dimension;
  else
    r.bound = 1.0 - c.delta_c();
  Rng data_rng = make_rng(seed, "contraction-data");
  Rng comp_rng = make_rng(seed, "contraction-compressor");
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec a(dimension);
  double sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < dimension; ++i) a(i) = normal(data_rng);
    const Vec q = decompress(compress(c, a, &comp_rng));
    const double ratio = (q - a).squaredNorm() / a.squaredNorm();
    r.worst_ratio = std::max(r.worst_ratio, ratio);
    sum += ratio;
    if (c.kind() == CompressorKind::top_k && ratio > r.bound * (1.0 + 1e-12)) ++r.violations;
  }
  r.mean_ratio = trials > 0 ? sum / trials : 0.0;
  return r;
}

std::string to_string(Channel ch) {
  switch (ch) {
    case Channel::outer: return "outer";
    case Channel::inner_y: return "inner_y";
    case Channel::inner_z: return "inner_z";
  }
  return "unknown";
}

void PayloadLedger::record(Channel ch, int node, Words words) {
  totals_[static_cast<int>(ch)] += words;
  counts_[static_cast<int>(ch)] += 1;
  if (keep_records_) records_.push_back({ch, node, words});
}

Words PayloadLedger::total() const {
  Words t = 0;
  for (Words w : totals_) t += w;
  return t;
}

Words PayloadLedger::recomputed_total(Channel ch) const {
  Words t = 0;
  for (const auto& r : records_)
    if (r.channel == ch) t += r.words;
  return t;
}

}  // namespace c2dfb
