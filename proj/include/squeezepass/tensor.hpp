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

// Dense tensor values. F16 tensors store their elements widened to binary32
// but constrained to binary16-representable values (including +-inf), which
// keeps arithmetic simple while overflow behavior stays bit-exact. I8 tensors
// hold quantized weights plus per-output-channel scales and are never used
// for arithmetic directly.

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "squeezepass/error.hpp"
#include "squeezepass/float16.hpp"

namespace squeezepass {

enum class DType { F32, F16, I8 };

inline const char* dtype_name(DType d) {
  switch (d) {
    case DType::F32: return "f32";
    case DType::F16: return "f16";
    case DType::I8: return "i8";
  }
  return "?";
}

inline bool dtype_from_name(const std::string& s, DType* out) {
  if (s == "f32") { *out = DType::F32; return true; }
  if (s == "f16") { *out = DType::F16; return true; }
  if (s == "i8") { *out = DType::I8; return true; }
  return false;
}

using Shape = std::vector<std::int64_t>;

inline std::int64_t element_count(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

// The IR can express rank-5 tensors (needed to represent converter-style
// group-normalization graphs); capability profiles impose tighter limits.
inline constexpr int kMaxTensorRank = 5;

inline void check_shape(const Shape& shape) {
  if (shape.size() > kMaxTensorRank)
    throw ValidationError("tensor rank " + std::to_string(shape.size()) +
                          " exceeds the maximum of " + std::to_string(kMaxTensorRank));
  for (auto d : shape) {
    if (d <= 0) throw ValidationError("tensor dimensions must be positive");
  }
}

struct Tensor {
  Shape shape;
  DType dtype = DType::F32;
  std::vector<float> values;       // payload for F32/F16
  std::vector<std::int8_t> quant;  // payload for I8
  std::vector<float> scales;       // I8 only; size 1 (per-tensor) or last dim

  std::int64_t element_count() const { return squeezepass::element_count(shape); }
  int rank() const { return static_cast<int>(shape.size()); }

  static Tensor f32(Shape shape, std::vector<float> data) {
    check_shape(shape);
    if (squeezepass::element_count(shape) != static_cast<std::int64_t>(data.size()))
      throw ValidationError("tensor data length does not match shape");
    Tensor t;
    t.shape = std::move(shape);
    t.dtype = DType::F32;
    t.values = std::move(data);
    return t;
  }

  // Rounds the provided values so the binary16 representability invariant
  // holds by construction.
  static Tensor f16(Shape shape, std::vector<float> data) {
    Tensor t = f32(std::move(shape), std::move(data));
    t.dtype = DType::F16;
    for (float& v : t.values) v = round_to_f16(v);
    return t;
  }

  static Tensor i8(Shape shape, std::vector<std::int8_t> data, std::vector<float> scales) {
    check_shape(shape);
    if (squeezepass::element_count(shape) != static_cast<std::int64_t>(data.size()))
      throw ValidationError("tensor data length does not match shape");
    const auto channels = static_cast<std::size_t>(shape.empty() ? 1 : shape.back());
    if (scales.size() != 1 && scales.size() != channels)
      throw ValidationError("i8 tensor needs one scale or one per output channel");
    for (float s : scales) {
      if (!(s > 0.0f)) throw ValidationError("i8 scales must be positive");
    }
    Tensor t;
    t.shape = std::move(shape);
    t.dtype = DType::I8;
    t.quant = std::move(data);
    t.scales = std::move(scales);
    return t;
  }

  static Tensor scalar(float v) { return f32({1}, {v}); }

  float scale_for_channel(std::int64_t c) const {
    return scales.size() == 1 ? scales[0] : scales[static_cast<std::size_t>(c)];
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape || a.dtype != b.dtype) return false;
    if (a.quant != b.quant) return false;
    auto bits_equal = [](const std::vector<float>& x, const std::vector<float>& y) {
      if (x.size() != y.size()) return false;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::bit_cast<std::uint32_t>(x[i]) != std::bit_cast<std::uint32_t>(y[i]))
          return false;
      }
      return true;
    };
    return bits_equal(a.values, b.values) && bits_equal(a.scales, b.scales);
  }
};

// Supported directions: F32->F16 (round to nearest even), F16->F32 (exact),
// I8->F16 and I8->F32 (dequantize by the channel scale, channel = last axis).
inline Tensor tensor_cast(const Tensor& t, DType to) {
  if (t.dtype == DType::F32 && to == DType::F16) {
    return Tensor::f16(t.shape, t.values);
  }
  if (t.dtype == DType::F16 && to == DType::F32) {
    Tensor out = t;
    out.dtype = DType::F32;
    return out;
  }
  if (t.dtype == DType::I8 && (to == DType::F16 || to == DType::F32)) {
    const std::int64_t channels = t.shape.empty() ? 1 : t.shape.back();
    std::vector<float> vals(t.quant.size());
    for (std::size_t i = 0; i < t.quant.size(); ++i) {
      const std::int64_t c = static_cast<std::int64_t>(i) % channels;
      const double v = static_cast<double>(t.quant[i]) *
                       static_cast<double>(t.scale_for_channel(c));
      vals[i] = (to == DType::F16) ? static_cast<float>(round_to_f16(v))
                                   : static_cast<float>(v);
    }
    Tensor out;
    out.shape = t.shape;
    out.dtype = to;
    out.values = std::move(vals);
    return out;
  }
  throw Error(std::string("unsupported cast ") + dtype_name(t.dtype) + " -> " + dtype_name(to));
}

}  // namespace squeezepass
