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

// Deterministic desk-scale test graphs imitating diffusion-model blocks.
// The tiny class keeps channel counts at or below 16; the paper_shape class
// uses the production activation sizes (1x4096x320 fully-connected inputs,
// the 1x32x32x1920 -> 1x32x32x640 3x3 convolution). Initializers are seeded
// uniform values in [-0.5, 0.5] drawn from the documented LCG (rng.hpp),
// stream-keyed by "demo:<name>:<size-class>", so the same (name, seed)
// yields bit-identical graphs.

#include <cstdint>
#include <string>
#include <vector>

#include "squeezepass/graph.hpp"
#include "squeezepass/rng.hpp"

namespace squeezepass {

enum class SizeClass { Tiny, PaperShape };

inline const char* size_class_name(SizeClass s) {
  return s == SizeClass::Tiny ? "tiny" : "paper_shape";
}

struct DemoSpec {
  std::string name;
  std::uint64_t seed = 42;
  SizeClass size_class = SizeClass::Tiny;
};

inline const std::vector<std::string>& demo_names() {
  static const std::vector<std::string> names = {
      "fc_block", "big_conv", "groupnorm_block", "gelu_block", "transformer_like", "unet_like"};
  return names;
}

namespace detail {

class DemoBuilder {
 public:
  DemoBuilder(const DemoSpec& spec)
      : rng_(spec.seed, "demo:" + spec.name + ":" + size_class_name(spec.size_class)) {}

  Graph& graph() { return g_; }

  Tensor random_tensor(Shape shape) {
    std::vector<float> vals(static_cast<std::size_t>(element_count(shape)));
    for (float& v : vals) v = rng_.next_in(-0.5f, 0.5f);
    return Tensor::f32(std::move(shape), std::move(vals));
  }

  void add_init(const std::string& id, Shape shape) {
    g_.initializers[id] = random_tensor(std::move(shape));
  }

  Node& add_node(const std::string& id, OpKind op, std::vector<std::string> inputs,
                 std::vector<std::string> outputs) {
    g_.nodes.push_back(Node{id, op, {}, std::move(inputs), std::move(outputs)});
    return g_.nodes.back();
  }

  void add_fc(const std::string& id, const std::string& in, const std::string& out,
              std::int64_t cin, std::int64_t cout) {
    add_init(id + "_w", {cin, cout});
    add_init(id + "_b", {cout});
    Node& n = add_node(id, OpKind::FullyConnected, {in}, {out});
    n.attrs.weight = id + "_w";
    n.attrs.bias = id + "_b";
  }

  void add_conv(const std::string& id, const std::string& in, const std::string& out,
                std::int64_t k, std::int64_t cin, std::int64_t cout) {
    add_init(id + "_w", {k, k, cin, cout});
    add_init(id + "_b", {cout});
    Node& n = add_node(id, OpKind::Conv2D, {in}, {out});
    n.attrs.weight = id + "_w";
    n.attrs.bias = id + "_b";
    n.attrs.stride = {1, 1};
    n.attrs.padding = Padding::Same;
  }

  void add_groupnorm(const std::string& id, const std::string& in, const std::string& out,
                     std::int64_t channels, std::int64_t groups) {
    add_init(id + "_gamma", {channels});
    add_init(id + "_beta", {channels});
    Node& n = add_node(id, OpKind::GroupNorm, {in}, {out});
    n.attrs.groups = groups;
    n.attrs.epsilon = 1e-5;
    n.attrs.gamma = id + "_gamma";
    n.attrs.beta = id + "_beta";
  }

 private:
  Graph g_;
  Lcg rng_;
};

}  // namespace detail

inline Graph make_demo(const DemoSpec& spec) {
  const bool paper = spec.size_class == SizeClass::PaperShape;
  detail::DemoBuilder b(spec);
  Graph& g = b.graph();

  if (spec.name == "fc_block") {
    const std::int64_t rows = paper ? 4096 : 12;
    const std::int64_t c = paper ? 320 : 8;
    g.inputs = {"x"};
    g.outputs = {"y"};
    g.tensors["x"] = {{1, rows, c}, DType::F32};
    b.add_fc("fc0", "x", "y", c, c);
  } else if (spec.name == "big_conv") {
    const std::int64_t s = paper ? 32 : 8;
    const std::int64_t cin = paper ? 1920 : 16;
    const std::int64_t cout = paper ? 640 : 8;
    g.inputs = {"x"};
    g.outputs = {"y"};
    g.tensors["x"] = {{1, s, s, cin}, DType::F32};
    b.add_conv("conv0", "x", "y", 3, cin, cout);
  } else if (spec.name == "groupnorm_block") {
    const std::int64_t s = paper ? 32 : 4;
    const std::int64_t c = paper ? 1920 : 8;
    const std::int64_t groups = paper ? 32 : 2;
    g.inputs = {"x"};
    g.outputs = {"y"};
    g.tensors["x"] = {{1, s, s, c}, DType::F32};
    b.add_groupnorm("gn0", "x", "y", c, groups);
  } else if (spec.name == "gelu_block") {
    const std::int64_t rows = paper ? 4096 : 12;
    const std::int64_t c = paper ? 320 : 16;
    g.inputs = {"x"};
    g.outputs = {"y"};
    g.tensors["x"] = {{1, rows, c}, DType::F32};
    b.add_fc("fc0", "x", "t0", c, c);
    b.add_node("gelu0", OpKind::Gelu, {"t0"}, {"y"});
  } else if (spec.name == "transformer_like") {
    const std::int64_t s = paper ? 64 : 4;
    const std::int64_t c = paper ? 320 : 8;
    const std::int64_t groups = paper ? 32 : 2;
    g.inputs = {"x"};
    g.outputs = {"y"};
    g.tensors["x"] = {{1, s, s, c}, DType::F32};
    b.add_groupnorm("gn0", "x", "t0", c, groups);
    b.add_node("flatten", OpKind::Reshape, {"t0"}, {"t1"}).attrs.target_shape = {1, s * s, c};
    b.add_fc("fc0", "t1", "t2", c, c);
    b.add_node("gelu0", OpKind::Gelu, {"t2"}, {"t3"});
    b.add_fc("fc1", "t3", "t4", c, c);
    b.add_node("unflatten", OpKind::Reshape, {"t4"}, {"y"}).attrs.target_shape = {1, s, s, c};
  } else if (spec.name == "unet_like") {
    const std::int64_t s = paper ? 32 : 8;
    const std::int64_t cin = paper ? 1920 : 16;
    const std::int64_t cout = paper ? 640 : 8;
    const std::int64_t g1 = paper ? 32 : 4;
    const std::int64_t g2 = paper ? 32 : 2;
    g.inputs = {"x"};
    g.outputs = {"y"};
    g.tensors["x"] = {{1, s, s, cin}, DType::F32};
    b.add_groupnorm("gn0", "x", "t0", cin, g1);
    b.add_node("gelu0", OpKind::Gelu, {"t0"}, {"t1"});
    b.add_conv("conv0", "t1", "t2", 3, cin, cout);
    b.add_groupnorm("gn1", "t2", "t3", cout, g2);
    b.add_node("gelu1", OpKind::Gelu, {"t3"}, {"t4"});
    b.add_conv("conv1", "t4", "y", 3, cout, cout);
  } else {
    throw Error("unknown demo graph '" + spec.name + "'");
  }

  Graph out = infer_shapes(g);
  require_valid(out, "make_demo");
  return out;
}

}  // namespace squeezepass
