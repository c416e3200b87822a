//
// Copyright 2026 The dflsim Authors
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
//

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace dfl {

// Seeded RNG with hand-rolled distributions. std:: distribution objects are
// implementation-defined, which would break byte-identical replay of traces;
// everything here is pinned arithmetic over the mt19937_64 stream.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Derives an independent substream; used to give each node / purpose its
  // own generator so call-order changes in one place don't ripple elsewhere.
  static Rng derive(uint64_t seed, const std::string& purpose, uint64_t index = 0);

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, n). Modulo bias is irrelevant at simulation scale.
  uint64_t uniform_u64(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  int64_t uniform_i64(int64_t lo, int64_t hi) {  // inclusive bounds
    return lo + static_cast<int64_t>(uniform_u64(static_cast<uint64_t>(hi - lo + 1)));
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform_double() < p; }

  // Box-Muller; consumes two uniforms per pair, caches the second.
  double normal(double mean = 0.0, double stddev = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = uniform_double();
    double u2 = uniform_double();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  // Exponential with the given mean (inter-block gaps in stochastic mode).
  double exponential(double mean) {
    double u = uniform_double();
    if (u < 1e-300) u = 1e-300;
    return -mean * std::log(u);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dfl
