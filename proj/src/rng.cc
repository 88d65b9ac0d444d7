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

#include "dpsearch/rng.h"

#include <random>

namespace dpsearch {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t hash_string(std::string_view s) {
  // FNV-1a, then mixed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

CounterRng::result_type CounterRng::operator()() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

CounterRng CounterRng::substream(std::uint64_t id) const {
  return CounterRng(mix64(mix64(key_ ^ 0x6a09e667f3bcc909ULL) + id * kGolden));
}

CounterRng CounterRng::substream(std::string_view id) const {
  return substream(hash_string(id));
}

double CounterRng::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double NoiseSampler::gaussian(CounterRng& stream, double sigma) {
  ++draws_;
  std::normal_distribution<double> dist(0.0, 1.0);
  return sigma * dist(stream);
}

double NoiseSampler::laplace(CounterRng& stream, double b) {
  ++draws_;
  std::exponential_distribution<double> dist(1.0);
  double e1 = dist(stream);
  double e2 = dist(stream);
  return b * (e1 - e2);
}

}  // namespace dpsearch
