/* Copyright 2026 The lmmsim Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace lmmsim {

// Deterministic random source. mt19937_64 output is fixed by the standard,
// and all derived draws below use only explicit arithmetic, so a given seed
// produces the same stream on every platform. std::*_distribution is
// deliberately avoided (its mapping is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Exponential with the given mean.
  double exponential(double mean) {
    double u = uniform01();
    while (u == 0.0) u = uniform01();
    return -mean * std::log(u);
  }

  // Uniform integer in [lo, hi], inclusive. Modulo bias is negligible for
  // the desk-scale ranges used here.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    if (lo >= hi) return lo;
    return lo + engine_() % (hi - lo + 1);
  }

  // Index into a cumulative probability vector (last entry ~1.0).
  std::size_t pick_cumulative(const std::vector<double>& cumulative) {
    const double u = uniform01();
    for (std::size_t i = 0; i + 1 < cumulative.size(); ++i) {
      if (u < cumulative[i]) return i;
    }
    return cumulative.empty() ? 0 : cumulative.size() - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lmmsim
