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

// JSON graph file format, version 1. Top-level keys: `version`, `inputs`,
// `outputs`, `tensors` (id -> {shape, dtype}), `initializers` (id ->
// {dtype, shape, data, scales?}) and `nodes`. Initializer payloads are
// base64 of little-endian packed values (4 bytes per f32, 2 bytes of
// binary16 bits per f16, 1 byte per i8), so round-trips are bit-exact.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "squeezepass/graph.hpp"

namespace squeezepass {
namespace detail {

inline const char* kBase64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(kBase64Alphabet[(v >> 18) & 63]);
    out.push_back(kBase64Alphabet[(v >> 12) & 63]);
    out.push_back(kBase64Alphabet[(v >> 6) & 63]);
    out.push_back(kBase64Alphabet[v & 63]);
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out.push_back(kBase64Alphabet[(v >> 18) & 63]);
    out.push_back(kBase64Alphabet[(v >> 12) & 63]);
    out.push_back('=');
    out.push_back('=');
  } else if (rest == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out.push_back(kBase64Alphabet[(v >> 18) & 63]);
    out.push_back(kBase64Alphabet[(v >> 12) & 63]);
    out.push_back(kBase64Alphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) throw ValidationError("base64 payload length must be a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=') {
        if (i + 4 != text.size() || j < 2) throw ValidationError("malformed base64 padding");
        vals[j] = 0;
        ++pad;
      } else {
        vals[j] = value_of(c);
        if (vals[j] < 0) throw ValidationError("invalid base64 character");
        if (pad > 0) throw ValidationError("base64 data after padding");
      }
    }
    const std::uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  return out;
}

inline std::vector<std::uint8_t> pack_tensor(const Tensor& t) {
  std::vector<std::uint8_t> bytes;
  switch (t.dtype) {
    case DType::F32:
      bytes.reserve(t.values.size() * 4);
      for (float v : t.values) {
        const auto u = std::bit_cast<std::uint32_t>(v);
        bytes.push_back(static_cast<std::uint8_t>(u & 0xFF));
        bytes.push_back(static_cast<std::uint8_t>((u >> 8) & 0xFF));
        bytes.push_back(static_cast<std::uint8_t>((u >> 16) & 0xFF));
        bytes.push_back(static_cast<std::uint8_t>((u >> 24) & 0xFF));
      }
      break;
    case DType::F16:
      bytes.reserve(t.values.size() * 2);
      for (float v : t.values) {
        const std::uint16_t h = f16_bits_from_float(v);
        bytes.push_back(static_cast<std::uint8_t>(h & 0xFF));
        bytes.push_back(static_cast<std::uint8_t>((h >> 8) & 0xFF));
      }
      break;
    case DType::I8:
      bytes.reserve(t.quant.size());
      for (std::int8_t v : t.quant) bytes.push_back(static_cast<std::uint8_t>(v));
      break;
  }
  return bytes;
}

inline Tensor unpack_tensor(DType dtype, Shape shape, const std::vector<std::uint8_t>& bytes,
                            std::vector<float> scales) {
  const std::int64_t n = element_count(shape);
  switch (dtype) {
    case DType::F32: {
      if (static_cast<std::int64_t>(bytes.size()) != n * 4)
        throw ValidationError("f32 payload size does not match the shape");
      std::vector<float> vals(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t o = static_cast<std::size_t>(i) * 4;
        const std::uint32_t u = bytes[o] | (bytes[o + 1] << 8) | (bytes[o + 2] << 16) |
                                (static_cast<std::uint32_t>(bytes[o + 3]) << 24);
        vals[static_cast<std::size_t>(i)] = std::bit_cast<float>(u);
      }
      return Tensor::f32(std::move(shape), std::move(vals));
    }
    case DType::F16: {
      if (static_cast<std::int64_t>(bytes.size()) != n * 2)
        throw ValidationError("f16 payload size does not match the shape");
      std::vector<float> vals(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t o = static_cast<std::size_t>(i) * 2;
        const std::uint16_t h = static_cast<std::uint16_t>(bytes[o] | (bytes[o + 1] << 8));
        vals[static_cast<std::size_t>(i)] = f16_bits_to_float(h);
      }
      return Tensor::f16(std::move(shape), std::move(vals));
    }
    case DType::I8: {
      if (static_cast<std::int64_t>(bytes.size()) != n)
        throw ValidationError("i8 payload size does not match the shape");
      std::vector<std::int8_t> vals(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i)
        vals[static_cast<std::size_t>(i)] = static_cast<std::int8_t>(bytes[static_cast<std::size_t>(i)]);
      if (scales.empty()) scales.push_back(1.0f);
      return Tensor::i8(std::move(shape), std::move(vals), std::move(scales));
    }
  }
  throw ValidationError("unknown dtype");
}

inline Shape shape_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": shape must be an array");
  Shape s;
  for (const auto& d : j) {
    if (!d.is_number_integer() || d.get<std::int64_t>() <= 0)
      throw ValidationError(where + ": shape dimensions must be positive integers");
    s.push_back(d.get<std::int64_t>());
  }
  return s;
}

}  // namespace detail

inline nlohmann::json graph_to_json(const Graph& g) {
  nlohmann::json j;
  j["version"] = 1;
  j["inputs"] = g.inputs;
  j["outputs"] = g.outputs;

  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& [id, info] : g.tensors) {
    if (g.is_initializer(id)) continue;
    tensors[id] = {{"shape", info.shape}, {"dtype", dtype_name(info.dtype)}};
  }
  j["tensors"] = tensors;

  nlohmann::json inits = nlohmann::json::object();
  for (const auto& [id, t] : g.initializers) {
    nlohmann::json e = {{"dtype", dtype_name(t.dtype)},
                        {"shape", t.shape},
                        {"data", detail::base64_encode(detail::pack_tensor(t))}};
    if (t.dtype == DType::I8) e["scales"] = t.scales;
    inits[id] = e;
  }
  j["initializers"] = inits;

  nlohmann::json nodes = nlohmann::json::array();
  for (const Node& n : g.nodes) {
    nlohmann::json attrs = nlohmann::json::object();
    switch (n.op) {
      case OpKind::FullyConnected:
        attrs["weight"] = n.attrs.weight;
        if (!n.attrs.bias.empty()) attrs["bias"] = n.attrs.bias;
        break;
      case OpKind::Conv2D:
        attrs["weight"] = n.attrs.weight;
        if (!n.attrs.bias.empty()) attrs["bias"] = n.attrs.bias;
        attrs["stride"] = {n.attrs.stride[0], n.attrs.stride[1]};
        attrs["padding"] = padding_name(n.attrs.padding);
        break;
      case OpKind::Reshape:
      case OpKind::BroadcastTo:
        attrs["target_shape"] = n.attrs.target_shape;
        break;
      case OpKind::Mean:
        attrs["axes"] = n.attrs.axes;
        attrs["keep_dims"] = n.attrs.keep_dims;
        break;
      case OpKind::Concat:
        attrs["axis"] = n.attrs.axis;
        break;
      case OpKind::Split:
        attrs["axis"] = n.attrs.axis;
        attrs["parts"] = n.attrs.parts;
        break;
      case OpKind::GroupNorm:
        attrs["groups"] = n.attrs.groups;
        attrs["epsilon"] = n.attrs.epsilon;
        attrs["gamma"] = n.attrs.gamma;
        attrs["beta"] = n.attrs.beta;
        break;
      default:
        break;
    }
    if (!n.attrs.trace_tag.empty()) attrs["trace_tag"] = n.attrs.trace_tag;
    nodes.push_back({{"id", n.id},
                     {"op", op_name(n.op)},
                     {"attrs", attrs},
                     {"inputs", n.inputs},
                     {"outputs", n.outputs}});
  }
  j["nodes"] = nodes;
  return j;
}

inline Graph graph_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("graph file: top level must be an object");
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"] != 1)
    throw ValidationError("graph file: `version` must be the integer 1");
  Graph g;
  for (const char* key : {"inputs", "outputs"}) {
    if (!j.contains(key) || !j[key].is_array())
      throw ValidationError(std::string("graph file: `") + key + "` must be an array");
  }
  g.inputs = j["inputs"].get<std::vector<std::string>>();
  g.outputs = j["outputs"].get<std::vector<std::string>>();

  if (j.contains("tensors")) {
    if (!j["tensors"].is_object()) throw ValidationError("graph file: `tensors` must be an object");
    for (const auto& [id, e] : j["tensors"].items()) {
      const std::string where = "tensors." + id;
      if (!e.contains("shape") || !e.contains("dtype"))
        throw ValidationError(where + ": needs `shape` and `dtype`");
      TensorInfo info;
      info.shape = detail::shape_from_json(e["shape"], where);
      if (!e["dtype"].is_string() || !dtype_from_name(e["dtype"].get<std::string>(), &info.dtype))
        throw ValidationError(where + ": dtype must be \"f32\", \"f16\", or \"i8\"");
      g.tensors[id] = info;
    }
  }

  if (j.contains("initializers")) {
    if (!j["initializers"].is_object())
      throw ValidationError("graph file: `initializers` must be an object");
    for (const auto& [id, e] : j["initializers"].items()) {
      const std::string where = "initializers." + id;
      if (!e.contains("shape") || !e.contains("dtype") || !e.contains("data"))
        throw ValidationError(where + ": needs `shape`, `dtype`, and `data`");
      DType dtype;
      if (!e["dtype"].is_string() || !dtype_from_name(e["dtype"].get<std::string>(), &dtype))
        throw ValidationError(where + ": dtype must be \"f32\", \"f16\", or \"i8\"");
      Shape shape = detail::shape_from_json(e["shape"], where);
      std::vector<float> scales;
      if (e.contains("scales")) {
        if (dtype != DType::I8) throw ValidationError(where + ": scales are only valid for i8");
        if (!e["scales"].is_array()) throw ValidationError(where + ": scales must be an array");
        for (const auto& s : e["scales"]) scales.push_back(s.get<float>());
      }
      if (!e["data"].is_string()) throw ValidationError(where + ": data must be a base64 string");
      Tensor t;
      try {
        t = detail::unpack_tensor(dtype, std::move(shape),
                                  detail::base64_decode(e["data"].get<std::string>()),
                                  std::move(scales));
      } catch (const Error& err) {
        throw ValidationError(where + ": " + err.what());
      }
      g.tensors[id] = TensorInfo{t.shape, t.dtype};
      g.initializers[id] = std::move(t);
    }
  }

  if (!j.contains("nodes") || !j["nodes"].is_array())
    throw ValidationError("graph file: `nodes` must be an array");
  for (std::size_t idx = 0; idx < j["nodes"].size(); ++idx) {
    const auto& e = j["nodes"][idx];
    const std::string where = "nodes[" + std::to_string(idx) + "]";
    if (!e.is_object() || !e.contains("id") || !e.contains("op"))
      throw ValidationError(where + ": needs `id` and `op`");
    Node n;
    n.id = e["id"].get<std::string>();
    if (!op_from_name(e["op"].get<std::string>(), &n.op))
      throw ValidationError(where + ": unknown op '" + e["op"].get<std::string>() + "'");
    if (e.contains("inputs")) n.inputs = e["inputs"].get<std::vector<std::string>>();
    if (e.contains("outputs")) n.outputs = e["outputs"].get<std::vector<std::string>>();
    const nlohmann::json attrs = e.contains("attrs") ? e["attrs"] : nlohmann::json::object();
    auto get_ref = [&](const char* key, std::string* out, bool required) {
      if (!attrs.contains(key)) {
        if (required) throw ValidationError(where + ": attrs need `" + key + "`");
        return;
      }
      if (!attrs[key].is_string()) throw ValidationError(where + ": `" + std::string(key) + "` must be a string");
      *out = attrs[key].get<std::string>();
    };
    switch (n.op) {
      case OpKind::FullyConnected:
        get_ref("weight", &n.attrs.weight, true);
        get_ref("bias", &n.attrs.bias, false);
        break;
      case OpKind::Conv2D: {
        get_ref("weight", &n.attrs.weight, true);
        get_ref("bias", &n.attrs.bias, false);
        if (attrs.contains("stride")) {
          if (!attrs["stride"].is_array() || attrs["stride"].size() != 2)
            throw ValidationError(where + ": stride must be [sh, sw]");
          n.attrs.stride = {attrs["stride"][0].get<std::int64_t>(),
                            attrs["stride"][1].get<std::int64_t>()};
        }
        if (!attrs.contains("padding") || !attrs["padding"].is_string())
          throw ValidationError(where + ": Conv2D needs a padding string");
        const std::string p = attrs["padding"].get<std::string>();
        if (p == "SAME") {
          n.attrs.padding = Padding::Same;
        } else if (p == "VALID") {
          n.attrs.padding = Padding::Valid;
        } else {
          throw ValidationError(where + ": padding must be exactly \"SAME\" or \"VALID\", got \"" + p + "\"");
        }
        break;
      }
      case OpKind::Reshape:
      case OpKind::BroadcastTo:
        if (!attrs.contains("target_shape"))
          throw ValidationError(where + ": attrs need `target_shape`");
        n.attrs.target_shape = detail::shape_from_json(attrs["target_shape"], where);
        break;
      case OpKind::Mean:
        if (!attrs.contains("axes") || !attrs["axes"].is_array())
          throw ValidationError(where + ": Mean needs an `axes` array");
        for (const auto& a : attrs["axes"]) n.attrs.axes.push_back(a.get<std::int64_t>());
        if (attrs.contains("keep_dims")) {
          if (!attrs["keep_dims"].is_boolean())
            throw ValidationError(where + ": keep_dims must be a boolean");
          n.attrs.keep_dims = attrs["keep_dims"].get<bool>();
        }
        break;
      case OpKind::Concat:
        if (!attrs.contains("axis")) throw ValidationError(where + ": Concat needs `axis`");
        n.attrs.axis = attrs["axis"].get<std::int64_t>();
        break;
      case OpKind::Split:
        if (!attrs.contains("axis") || !attrs.contains("parts"))
          throw ValidationError(where + ": Split needs `axis` and `parts`");
        n.attrs.axis = attrs["axis"].get<std::int64_t>();
        n.attrs.parts = attrs["parts"].get<std::int64_t>();
        break;
      case OpKind::GroupNorm:
        if (!attrs.contains("groups") || !attrs.contains("epsilon"))
          throw ValidationError(where + ": GroupNorm needs `groups` and `epsilon`");
        n.attrs.groups = attrs["groups"].get<std::int64_t>();
        n.attrs.epsilon = attrs["epsilon"].get<double>();
        get_ref("gamma", &n.attrs.gamma, true);
        get_ref("beta", &n.attrs.beta, true);
        break;
      default:
        break;
    }
    if (attrs.contains("trace_tag")) n.attrs.trace_tag = attrs["trace_tag"].get<std::string>();
    g.nodes.push_back(std::move(n));
  }
  return g;
}

inline std::string save_graph_to_string(const Graph& g) {
  return graph_to_json(g).dump(2) + "\n";
}

inline void save_graph(const Graph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << save_graph_to_string(g);
}

inline Graph load_graph_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("graph file: invalid JSON: ") + e.what());
  }
  return graph_from_json(j);
}

inline Graph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_graph_from_string(buf.str());
}

}  // namespace squeezepass
