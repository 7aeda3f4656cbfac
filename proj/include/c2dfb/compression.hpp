// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "c2dfb/rng.hpp"
#include "c2dfb/types.hpp"

namespace c2dfb {

enum class CompressorKind { identity, top_k, rand_k, rescaled };

std::string to_string(CompressorKind kind);
CompressorKind parse_compressor_kind(const std::string& name);

// A contraction operator Q with E||Q(A) - A||^2 <= (1 - delta_c) ||A||^2.
//
// rand_k is the unbiased scaled sparsifier (kept entries multiplied by d/k).
// Its variance factor is d/k - 1, so its nominal delta_c = 2 - 1/ratio, which
// is not positive for ratio <= 1/2. rescale_biased() turns it into a proper
// contraction with delta_c' = 1/(2 - delta_c) = ratio.
class Compressor {
 public:
  static Compressor identity();
  static Compressor top_k(double ratio);
  static Compressor rand_k(double ratio);

  CompressorKind kind() const { return kind_; }
  double ratio() const { return ratio_; }
  double delta_c() const { return delta_c_; }
  bool biased() const { return biased_; }
  // Multiplier applied to the kept values (1 unless rescaled or rand_k).
  double output_scale(int dimension) const;
  const Compressor* inner() const { return inner_.get(); }

  // Base operator kind, looking through rescaling.
  CompressorKind base_kind() const;
  bool lossless() const;
  bool needs_rng() const { return base_kind() == CompressorKind::rand_k; }
  // Number of kept coordinates for a d-dimensional input: max(1, floor(ratio d)).
  int kept(int dimension) const;

  std::string describe() const;

 private:
  friend Compressor rescale_biased(const Compressor& c);

  Compressor(CompressorKind kind, double ratio, double delta_c, bool biased)
      : kind_(kind), ratio_(ratio), delta_c_(delta_c), biased_(biased) {}

  CompressorKind kind_;
  double ratio_;
  double delta_c_;
  bool biased_;
  double scale_ = 1.0;
  std::shared_ptr<const Compressor> inner_;
};

// Wire form of a compressed residual. Sparse forms list (index, value) pairs.
struct CompressedVector {
  int dimension = 0;
  bool dense = false;
  std::vector<int> indices;  // strictly increasing; empty when dense
  std::vector<double> values;
  Words payload_words = 0;
};

// Compresses v. rng is used by rand_k only and may be null otherwise.
CompressedVector compress(const Compressor& c, std::span<const double> v, Rng* rng = nullptr);

inline CompressedVector compress(const Compressor& c, const Vec& v, Rng* rng = nullptr) {
  return compress(c, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), rng);
}

// Scatter into zeros.
Vec decompress(const CompressedVector& msg);

// out += weight * Q(v), touching only the transmitted coordinates.
void accumulate(const CompressedVector& msg, double weight, std::span<double> out);

// Q'(A) = Q(A) / (2 - delta_c) with delta_c' = 1 / (2 - delta_c). The input
// must be unbiased (identity or rand_k): for biased operators the rescaled
// contraction factor does not follow and InvalidConfigError is thrown.
Compressor rescale_biased(const Compressor& c);

// 1 / (2 - delta_c).
double rescaled_delta(double delta_c);

// 2k for sparse messages, d for dense ones.
Words payload_words(const CompressedVector& msg);

struct ContractionReport {
  int dimension = 0;
  int trials = 0;
  double worst_ratio = 0.0;  // max ||Q(A) - A||^2 / ||A||^2
  double mean_ratio = 0.0;
  double bound = 0.0;        // 1 - delta_c (deterministic bound for top_k)
  int violations = 0;        // trials with ratio > bound (top_k only)
};

// Monte-Carlo contraction check on standard Gaussian inputs.
ContractionReport check_contraction(const Compressor& c, int dimension, int trials, std::uint64_t seed);

enum class Channel : int { outer = 0, inner_y = 1, inner_z = 2 };
inline constexpr int kChannelCount = 3;
std::string to_string(Channel ch);

struct MessageRecord {
  Channel channel;
  int node;
  Words words;
};

// Running payload totals plus, optionally, every message so that totals can
// be recomputed independently.
class PayloadLedger {
 public:
  explicit PayloadLedger(bool keep_records = false) : keep_records_(keep_records) {}

  void record(Channel ch, int node, Words words);
  Words total(Channel ch) const { return totals_[static_cast<int>(ch)]; }
  Words total() const;
  std::uint64_t messages(Channel ch) const { return counts_[static_cast<int>(ch)]; }
  bool keeps_records() const { return keep_records_; }
  const std::vector<MessageRecord>& records() const { return records_; }
  Words recomputed_total(Channel ch) const;

 private:
  bool keep_records_;
  std::array<Words, kChannelCount> totals_{};
  std::array<std::uint64_t, kChannelCount> counts_{};
  std::vector<MessageRecord> records_;
};

}  // namespace c2dfb
