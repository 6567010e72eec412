// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seed derivation for reproducible simulation. Every random draw in the
// simulator comes from a stream keyed by (master seed, purpose, path), so two
// algorithm variants that address the same key see the same numbers.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace hfl {

using Rng = std::mt19937_64;

enum class Stream : std::uint64_t {
  init = 1,
  batch = 2,
  quantize_device = 3,
  quantize_edge = 4,
  dataset = 5,
  partition = 6,
  holdout = 7,
  probe = 8,
  repeat = 9,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Folds a path of integers into a seed. Order matters.
std::uint64_t derive_seed(std::uint64_t master, Stream purpose,
                          std::initializer_list<std::uint64_t> path = {});

inline Rng make_stream(std::uint64_t master, Stream purpose,
                       std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_seed(master, purpose, path));
}

}  // namespace hfl
