// Copyright 2026 The SqueezePass Authors. All Rights Reserved.
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

// Versioned pseudo-random generator used for demo graphs and seeded test
// inputs. A plain 64-bit linear congruential generator so that independent
// implementations can reproduce corpora exactly:
//
//   state' = state * 6364136223846793005 + 1442695040888963407   (mod 2^64)
//   u      = (state' >> 40) / 2^24                               in [0, 1)
//
// Streams are keyed by FNV-1a (64-bit, offset 14695981039346656037,
// prime 1099511628211) of a label, XORed into the seed.

#include <cstdint>
#include <string_view>

namespace squeezepass {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

class Lcg {
 public:
  explicit Lcg(std::uint64_t seed) : state_(seed) {}
  Lcg(std::uint64_t seed, std::string_view stream) : state_(seed ^ fnv1a64(stream)) {}

  std::uint64_t next_u64() {
    state_ = state_ * 6364136223846793005ull + 1442695040888963407ull;
    return state_;
  }

  // Uniform in [0, 1) with 24 bits of resolution; exact in binary32.
  double next_unit() {
    return static_cast<double>(next_u64() >> 40) * (1.0 / 16777216.0);
  }

  float next_in(float lo, float hi) {
    return static_cast<float>(lo + (hi - lo) * next_unit());
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return n ? next_u64() % n : 0; }

 private:
  std::uint64_t state_;
};

}  // namespace squeezepass
