// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace instructcl {

/// splitmix64 finalizer. Bijective on 64-bit values.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over the bytes of `s`.
std::uint64_t hash_string(std::string_view s);

/// Derives a child seed from a parent seed and an ordered list of key parts.
/// Distinct part lists give statistically independent streams.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> parts);
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);

/// Seeded random stream with platform-independent derived draws.
///
/// The engine is mt19937_64, whose raw output is fixed by the standard. The
/// standard distributions are not, so every derived draw (bounded integers,
/// sampling, shuffling) is implemented here to keep results identical across
/// standard libraries.
class SeededStream {
 public:
  explicit SeededStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [lo, hi], both ends inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Ordered random sample of `count` distinct indices from [0, n).
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count);

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i - 1)));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace instructcl
