// Copyright 2026 The LATKD Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LATKD_RANDOM_H_
#define LATKD_RANDOM_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace latkd {

// Derives an independent 64-bit seed from a master seed and a stream path,
// e.g. DeriveSeed(seed, round, kRowSampling). SplitMix64 finalizer.
std::uint64_t DeriveSeed(std::uint64_t master, std::uint64_t a,
                         std::uint64_t b = 0);

// Seeded generator whose outputs are identical on every platform. The engine
// is std::mt19937_64; the conversions below are written out because the
// standard distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }
  // Uniform in [0, 1) with 53 bits of mantissa.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t Below(std::uint64_t n);
  double Normal();
  bool Bernoulli(double p) { return Uniform() < p; }

  template <typename T>
  void Shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[Below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

// Indices 0..n-1 in random order.
std::vector<std::size_t> Permutation(std::size_t n, Rng& rng);

// Sorted sample of k distinct indices from [0, n).
std::vector<std::size_t> SampleWithoutReplacement(std::size_t n, std::size_t k,
                                                  Rng& rng);

}  // namespace latkd

#endif  // LATKD_RANDOM_H_
