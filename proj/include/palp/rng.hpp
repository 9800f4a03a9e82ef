// Copyright 2026 The PALP Authors
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

#ifndef PALP_RNG_HPP_
#define PALP_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <utility>

namespace palp
{

/// The single pseudo-random source used everywhere in the toolkit.
///
/// The engine is std::mt19937_64 seeded directly with the 64-bit seed; its
/// output sequence is fixed by the C++ standard. The standard library's
/// distributions are implementation-defined, so every derived quantity is
/// computed here from raw engine output:
///
///  - below(n): rejection sampling. Draws x until x < 2^64 - (2^64 mod n),
///    then returns x mod n.
///  - uniform(): top 53 bits of one draw, scaled by 2^-53, in [0, 1).
///  - normal(): Box-Muller on two uniform() draws, one value per call
///    (the sine branch is discarded).
///  - shuffle(): Fisher-Yates from the back, j = below(i + 1).
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  std::uint64_t below(std::uint64_t n)
  {
    // n == 0 is a caller bug; return 0 rather than loop forever.
    if (n <= 1) {
      return 0;
    }
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - ((max % n) + 1) % n;
    std::uint64_t x = engine_();
    while (x > limit) {
      x = engine_();
    }
    return x % n;
  }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal()
  {
    double u1 = uniform();
    while (u1 <= 0.0) {
      u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::span<T> items)
  {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace palp

#endif  // PALP_RNG_HPP_
