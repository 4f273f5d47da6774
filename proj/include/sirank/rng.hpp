/*
 * Copyright 2026 The sirank Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef SIRANK_RNG_HPP_
#define SIRANK_RNG_HPP_

#include <cstdint>
#include <string_view>
#include <vector>

namespace sirank {

/// SplitMix64 generator (Steele, Lea & Flood 2014). The output sequence is
/// fully specified by the algorithm, so draws are reproducible across
/// platforms and standard library implementations, unlike std::shuffle or
/// std::uniform_int_distribution.
class split_mix64 {
 public:
  explicit split_mix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Unbiased integer in [0, n) via rejection sampling. n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return v % n;
  }

 private:
  std::uint64_t state_;
};

/// FNV-1a 64-bit hash of a byte string.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent stream seed from a global seed and a string key
/// (e.g. a concept name), so per-key draws do not depend on the order in
/// which keys are visited.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) {
  return split_mix64(seed).next() ^ fnv1a64(key);
}

/// Fisher-Yates shuffle driven by split_mix64.
template <typename T>
void shuffle(std::vector<T>& items, split_mix64& rng) {
  if (items.size() < 2) return;
  for (std::size_t i = items.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
    using std::swap;
    swap(items[i], items[j]);
  }
}

}  // namespace sirank

#endif  // SIRANK_RNG_HPP_
