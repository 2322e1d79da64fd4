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

// Bit-level software emulation of IEEE 754 binary16 (1 sign bit, 5 exponent
// bits, 10 mantissa bits, bias 15). Rounding is to nearest, ties to even.
// Subnormals are kept (no flush to zero). Magnitudes of 65520 and above
// overflow to infinity; 65504 is the largest finite value.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

namespace squeezepass {

inline constexpr float kF16MaxFinite = 65504.0f;
inline constexpr float kF16SmallestSubnormal = 5.9604644775390625e-08f;  // 2^-24

// Rounds a binary64 value to the nearest binary16 and returns the bit pattern.
// NaNs are quieted (payload not preserved), signs always are.
inline std::uint16_t f16_bits_from_double(double x) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  const auto sign = static_cast<std::uint16_t>((bits >> 48) & 0x8000u);
  const int biased = static_cast<int>((bits >> 52) & 0x7FF);
  const std::uint64_t frac = bits & 0xFFFFFFFFFFFFFull;
  if (biased == 0x7FF) {
    return frac ? static_cast<std::uint16_t>(sign | 0x7E00u)    // NaN
                : static_cast<std::uint16_t>(sign | 0x7C00u);   // +-inf
  }
  // +-0 and binary64 subnormals; the latter are far below the halfway point
  // to the smallest binary16 subnormal, so they round to zero.
  if (biased == 0) return sign;

  const int e = biased - 1023;
  const std::uint64_t sig = (1ull << 52) | frac;  // |x| = sig * 2^(e-52)
  // Unit in the last place of the binary16 result: 2^(e-10) for normals,
  // 2^-24 in the subnormal range.
  const int lsb_exp = (e - 10 > -24) ? e - 10 : -24;
  const int shift = lsb_exp - (e - 52);
  if (shift >= 64) return sign;  // magnitude below half the smallest subnormal
  const std::uint64_t down = sig >> shift;
  const std::uint64_t rem = sig & ((1ull << shift) - 1);
  const std::uint64_t half = 1ull << (shift - 1);
  std::uint64_t q = down + ((rem > half || (rem == half && (down & 1))) ? 1 : 0);
  int exp16 = lsb_exp + 10;
  if (q >= 2048) {  // rounding carried into the next binade
    q >>= 1;
    ++exp16;
  }
  if (q < 1024) return static_cast<std::uint16_t>(sign | q);  // subnormal
  if (exp16 > 15) return static_cast<std::uint16_t>(sign | 0x7C00u);  // overflow
  return static_cast<std::uint16_t>(sign | ((exp16 + 15) << 10) | (q - 1024));
}

inline std::uint16_t f16_bits_from_float(float x) {
  // float widens exactly to double, so a single rounding happens here.
  return f16_bits_from_double(static_cast<double>(x));
}

// Exact widening of a binary16 bit pattern; every binary16 value is
// representable in binary32.
inline float f16_bits_to_float(std::uint16_t h) {
  const bool negative = (h & 0x8000u) != 0;
  const int exp = (h >> 10) & 0x1F;
  const int mant = h & 0x3FF;
  float mag;
  if (exp == 0x1F) {
    mag = mant ? std::numeric_limits<float>::quiet_NaN()
               : std::numeric_limits<float>::infinity();
  } else if (exp == 0) {
    mag = std::ldexp(static_cast<float>(mant), -24);
  } else {
    mag = std::ldexp(static_cast<float>(1024 + mant), exp - 25);
  }
  return negative ? -mag : mag;
}

inline double f16_bits_to_double(std::uint16_t h) {
  return static_cast<double>(f16_bits_to_float(h));
}

// Round-to-nearest-even binary16 value of x, widened back. Values above the
// overflow threshold return +-inf; NaN stays NaN.
inline float round_to_f16(float x) { return f16_bits_to_float(f16_bits_from_double(x)); }

inline double round_to_f16(double x) { return f16_bits_to_double(f16_bits_from_double(x)); }

inline bool is_f16_value(float x) {
  if (std::isnan(x)) return true;  // NaN tensors stay NaN after rounding
  return x == round_to_f16(x);
}

}  // namespace squeezepass
