// SPDX-License-Identifier: Apache-2.0
#include "instructcl/random.hpp"

#include <numeric>
#include <stdexcept>

namespace instructcl {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(parent);
  for (auto p : parts) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) {
  return derive_seed(parent, {hash_string(label)});
}

std::int64_t SeededStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
  const auto range = static_cast<std::uint64_t>(hi - lo) + 1;
  if (range == 0) return static_cast<std::int64_t>(next());
  // Reject the low values that would bias the modulo.
  const std::uint64_t threshold = (0 - range) % range;
  for (;;) {
    const std::uint64_t x = next();
    if (x >= threshold) return lo + static_cast<std::int64_t>(x % range);
  }
}

std::vector<std::size_t> SeededStream::sample_indices(std::size_t n, std::size_t count) {
  if (count > n) throw std::invalid_argument("sample_indices: count exceeds population");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t a = 0; a < count; ++a) {
    const auto b = static_cast<std::size_t>(
        uniform_int(static_cast<std::int64_t>(a), static_cast<std::int64_t>(n - 1)));
    std::swap(pool[a], pool[b]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace instructcl
