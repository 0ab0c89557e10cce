// Copyright 2026 The mixmra Authors.
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

#include <boost/random/mersenne_twister.hpp>

namespace mixmra {

/// Name of the pinned engine, echoed into run metadata.
inline constexpr const char* kRngAlgorithm = "mt19937_64";

/// Seeded random source. Engine and distributions come from Boost.Random,
/// whose algorithms are fixed across platforms, so a seed reproduces the
/// same stream everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform();  ///< U(0, 1)
  double uniform(double lo, double hi);
  double normal();   ///< N(0, 1)
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Gamma with shape/rate parameterization.
  double gamma(double shape, double rate);
  /// Inverse-Gamma with shape/rate parameterization.
  double inverse_gamma(double shape, double rate) { return 1.0 / gamma(shape, rate); }
  double beta(double a, double b);
  bool bernoulli(double p) { return uniform() < p; }

  boost::random::mt19937_64& engine() { return engine_; }

 private:
  boost::random::mt19937_64 engine_;
};

/// Deterministic seed derivation for replicate k of a base seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace mixmra
