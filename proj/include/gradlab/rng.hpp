// Copyright 2026 The GradLab Authors. All Rights Reserved.
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

#include <cstdint>
#include <string_view>

namespace gradlab {

// Deterministic random stream. splitmix64 generates the raw words; normal
// variates use the Box-Muller transform on two consecutive uniforms, with the
// second variate cached. Every draw is specified bit-for-bit so independent
// implementations can reproduce outputs.
class Rng {
 public:
  explicit Rng(std::uint64_t state) : state_(state) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01();
  // Uniform in (0, 1], never zero; feeds the logarithm in Box-Muller.
  double uniform_open0();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Marsaglia-Tsang; shape > 0, unit scale.
  double gamma(double shape);

 private:
  std::uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

// FNV-1a over the label bytes.
std::uint64_t hash_label(std::string_view label);

// Independent substream for (seed, label, index).
Rng derive_stream(std::uint64_t seed, std::string_view label,
                  std::uint64_t index = 0);

// Seed value (not a stream) for nested derivations.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                          std::uint64_t index = 0);

}  // namespace gradlab
