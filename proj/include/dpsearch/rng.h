// Copyright 2026 The dpsearch Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPSEARCH_RNG_H_
#define DPSEARCH_RNG_H_

#include <cstdint>
#include <limits>
#include <string_view>

namespace dpsearch {

// Counter-based generator: output i is a SplitMix64 finalisation of
// key + i * golden. Substreams are new keys derived from (key, id), so a
// draw is addressed by its path of ids rather than by call order.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key = 0) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  CounterRng substream(std::uint64_t id) const;
  CounterRng substream(std::string_view id) const;

  // Uniform double in the open interval (0, 1).
  double uniform();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_string(std::string_view s);

// Gaussian and Laplace draws with a running count, so tests can check how
// many perturbations a mechanism performed.
class NoiseSampler {
 public:
  NoiseSampler() = default;

  double gaussian(CounterRng& stream, double sigma);
  double laplace(CounterRng& stream, double b);

  std::uint64_t draws() const { return draws_; }

 private:
  std::uint64_t draws_ = 0;
};

}  // namespace dpsearch

#endif  // DPSEARCH_RNG_H_
