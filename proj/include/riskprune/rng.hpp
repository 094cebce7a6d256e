// Copyright 2026 The riskprune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace riskprune {

// splitmix64 finalizer. Fully deterministic across platforms, unlike the
// standard-library distributions, so snapshots and trial splits reproduce
// byte for byte anywhere.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed for (seed, index), e.g. one per query
// or one per trial.
inline uint64_t mix_seed(uint64_t seed, uint64_t index) {
  return splitmix64(seed + 0x9E3779B97F4A7C15ull * (index + 1));
}

// Small deterministic generator: splitmix64 sequence with hand-rolled
// uniform, normal (Box-Muller, cosine branch only so the draw count per
// variate is fixed), and Fisher-Yates shuffle.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform on (0, 1].
  double next_u01() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. Two uniforms per variate, always finite.
  double next_normal() {
    const double u1 = next_u01();
    const double u2 = next_u01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

  // Uniform integer in [0, n). Lemire reduction, slight modulo bias is
  // irrelevant at these ranges (n far below 2^64).
  uint64_t next_below(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(next_below(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

}  // namespace riskprune
