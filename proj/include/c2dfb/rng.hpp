// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace c2dfb {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Seed of a named substream of `master`, e.g. derive_seed(seed, "topology").
// Optional index lets callers fan out per node or per attempt.
std::uint64_t derive_seed(std::uint64_t master, std::string_view name, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t master, std::string_view name, std::uint64_t index = 0) {
  return Rng(derive_seed(master, name, index));
}

}  // namespace c2dfb
