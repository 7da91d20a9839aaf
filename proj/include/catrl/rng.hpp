/*
* Copyright 2026 The catrl Authors.
*
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
* ============================================================================
*/

#ifndef CATRL_RNG_HPP_
#define CATRL_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>

namespace catrl {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Mixes any number of 64-bit keys into one seed.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed) { return splitmix64(seed); }

template <typename... Rest>
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key, Rest... rest) {
  return derive_seed(splitmix64(seed ^ splitmix64(key + 0x632be59bd9b4e019ULL)), rest...);
}

// Purpose tags for per-subject streams. Keeping draws for different purposes
// on separate streams means changing, say, the censoring law leaves the
// covariates and treatment draws of every subject untouched.
enum class StreamTag : std::uint64_t {
  kCovariates1 = 1,
  kCovariates2 = 2,
  kTreatment1 = 3,
  kTreatment2 = 4,
  kNoise1 = 5,
  kNoise2 = 6,
  kCensoring = 7,
  kRandomPolicy = 8,
  kSplit = 9,
  kForest = 10,
  kPilot = 11,
};

// SplitMix64 generator addressed by (seed, subject, tag). Satisfies
// UniformRandomBitGenerator. Distribution draws are implemented here rather
// than through <random> distributions so results do not depend on the
// standard library implementation.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed) : state_(derive_seed(seed)) {}
  RngStream(std::uint64_t seed, std::uint64_t subject, StreamTag tag)
      : state_(derive_seed(seed, subject, static_cast<std::uint64_t>(tag))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal(double mean = 0.0, double sd = 1.0) {
    const double u1 = uniform();
    const double u2 = uniform();
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double lognormal(double log_mean, double log_sd) { return std::exp(normal(log_mean, log_sd)); }

  // Exponential with the given rate (mean 1/rate).
  double exponential(double rate) { return -std::log(uniform()) / rate; }

  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n; }

  // Index drawn from an (already normalized) probability vector.
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t a = 0; a + 1 < probs.size(); ++a) {
      acc += probs[a];
      if (u < acc) return static_cast<int>(a);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::uint64_t state_;
};

}  // namespace catrl

#endif  // CATRL_RNG_HPP_
