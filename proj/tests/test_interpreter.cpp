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

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <bit>

#include "oracles.hpp"
#include "squeezepass/interpreter.hpp"
#include "squeezepass/rng.hpp"

using namespace squeezepass;

namespace {

Graph conv_graph(Shape in_shape, Shape k_shape, Padding padding, std::vector<float> w,
                 std::vector<float> bias = {}) {
  Graph g;
  g.inputs = {"x"};
  g.outputs = {"y"};
  g.tensors["x"] = {in_shape, DType::F32};
  g.initializers["w"] = Tensor::f32(k_shape, std::move(w));
  Node conv;
  conv.id = "conv";
  conv.op = OpKind::Conv2D;
  conv.attrs.weight = "w";
  conv.attrs.padding = padding;
  if (!bias.empty()) {
    g.initializers["b"] = Tensor::f32({k_shape[3]}, std::move(bias));
    conv.attrs.bias = "b";
  }
  conv.inputs = {"x"};
  conv.outputs = {"y"};
  g.nodes.push_back(conv);
  return g;
}

bool bits_equal(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint32_t>(a[i]) != std::bit_cast<std::uint32_t>(b[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("identity 1x1 convolution reproduces its input", "[interpreter]") {
  std::vector<float> w(4 * 4, 0.0f);
  for (int i = 0; i < 4; ++i) w[static_cast<std::size_t>(i * 4 + i)] = 1.0f;
  Graph g = conv_graph({1, 3, 3, 4}, {1, 1, 4, 4}, Padding::Valid, std::move(w),
                       std::vector<float>(4, 0.0f));
  const auto inputs = seeded_inputs(g, 5, -2.0f, 2.0f);
  const ExecTrace t = execute(g, inputs, ExecMode::F32);
  REQUIRE(bits_equal(t.outputs.at("y").values, inputs.at("x").values));
}

TEST_CASE("2x2 VALID convolution on a ramp matches the sliding-window sums", "[interpreter]") {
  Graph g = conv_graph({1, 3, 3, 1}, {2, 2, 1, 1}, Padding::Valid, {1, 1, 1, 1});
  std::map<std::string, Tensor> inputs;
  inputs["x"] = Tensor::f32({1, 3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const ExecTrace t = execute(g, inputs, ExecMode::F32);
  REQUIRE(t.outputs.at("y").values == std::vector<float>{12, 16, 24, 28});
}

TEST_CASE("random convolutions match the direct oracle", "[interpreter]") {
  Lcg rng(23, "conv-cases");
  for (int round = 0; round < 6; ++round) {
    const std::int64_t cin = 1 + static_cast<std::int64_t>(rng.next_below(6));
    const std::int64_t cout = 1 + static_cast<std::int64_t>(rng.next_below(5));
    const std::int64_t k = 1 + static_cast<std::int64_t>(rng.next_below(3));
    const Padding padding = rng.next_below(2) ? Padding::Same : Padding::Valid;
    const Shape in_shape{1, 6, 5, cin};
    const Shape k_shape{k, k, cin, cout};
    std::vector<float> w(static_cast<std::size_t>(element_count(k_shape)));
    for (float& v : w) v = rng.next_in(-0.5f, 0.5f);
    std::vector<float> bias(static_cast<std::size_t>(cout));
    for (float& v : bias) v = rng.next_in(-0.5f, 0.5f);
    Graph g = conv_graph(in_shape, k_shape, padding, w, bias);
    const auto inputs = seeded_inputs(g, 100 + static_cast<std::uint64_t>(round), -1.0f, 1.0f);
    const ExecTrace t = execute(g, inputs, ExecMode::F32);
    const auto want = oracles::conv2d(inputs.at("x").values, in_shape, w, k_shape, bias, 1, 1,
                                      padding == Padding::Same);
    const auto& got = t.outputs.at("y").values;
    REQUIRE(got.size() == want.size());
    double max_abs = 0;
    for (std::size_t i = 0; i < got.size(); ++i)
      max_abs = std::max(max_abs, std::fabs(static_cast<double>(got[i]) - want[i]));
    REQUIRE(max_abs < 1e-5);
  }
}

TEST_CASE("group normalization on constant input collapses to beta", "[interpreter]") {
  Graph g;
  g.inputs = {"x"};
  g.outputs = {"y"};
  g.tensors["x"] = {{1, 2, 2, 4}, DType::F32};
  g.initializers["gamma"] = Tensor::f32({4}, {1.5f, -2.0f, 0.5f, 3.0f});
  g.initializers["beta"] = Tensor::f32({4}, {0.25f, -0.5f, 0.75f, -1.0f});
  Node gn;
  gn.id = "gn";
  gn.op = OpKind::GroupNorm;
  gn.attrs.groups = 2;
  gn.attrs.epsilon = 1e-5;
  gn.attrs.gamma = "gamma";
  gn.attrs.beta = "beta";
  gn.inputs = {"x"};
  gn.outputs = {"y"};
  g.nodes.push_back(gn);
  std::map<std::string, Tensor> inputs;
  inputs["x"] = Tensor::f32({1, 2, 2, 4}, std::vector<float>(16, 3.25f));
  const ExecTrace t = execute(g, inputs, ExecMode::F32);
  const auto& y = t.outputs.at("y").values;
  for (std::size_t i = 0; i < y.size(); ++i) REQUIRE(y[i] == g.initializers["beta"].values[i % 4]);
}

TEST_CASE("composite GroupNorm matches the direct two-pass oracle", "[interpreter]") {
  Graph g;
  g.inputs = {"x"};
  g.outputs = {"y"};
  g.tensors["x"] = {{1, 4, 4, 8}, DType::F32};
  Lcg rng(31, "gn-params");
  std::vector<float> gamma(8), beta(8);
  for (float& v : gamma) v = rng.next_in(-0.5f, 0.5f);
  for (float& v : beta) v = rng.next_in(-0.5f, 0.5f);
  g.initializers["gamma"] = Tensor::f32({8}, gamma);
  g.initializers["beta"] = Tensor::f32({8}, beta);
  Node gn;
  gn.id = "gn";
  gn.op = OpKind::GroupNorm;
  gn.attrs.groups = 2;
  gn.attrs.epsilon = 1e-5;
  gn.attrs.gamma = "gamma";
  gn.attrs.beta = "beta";
  gn.inputs = {"x"};
  gn.outputs = {"y"};
  g.nodes.push_back(gn);
  const auto inputs = seeded_inputs(g, 77, -3.0f, 3.0f);
  const ExecTrace t = execute(g, inputs, ExecMode::F32);
  const auto want = oracles::groupnorm(inputs.at("x").values, 1, 4, 4, 8, 2, 1e-5, gamma, beta);
  const auto& got = t.outputs.at("y").values;
  double max_abs = 0;
  for (std::size_t i = 0; i < got.size(); ++i)
    max_abs = std::max(max_abs, std::fabs(static_cast<double>(got[i]) - want[i]));
  REQUIRE(max_abs < 1e-5);
}

TEST_CASE("fully connected matches the matmul oracle", "[interpreter]") {
  Graph g;
  g.inputs = {"x"};
  g.outputs = {"y"};
  g.tensors["x"] = {{1, 3, 2}, DType::F32};
  g.initializers["w"] = Tensor::f32({2, 4}, {0.1f, -0.2f, 0.3f, 0.4f, 0.5f, -0.6f, 0.7f, 0.8f});
  g.initializers["b"] = Tensor::f32({4}, {1.0f, 2.0f, 3.0f, 4.0f});
  Node fc;
  fc.id = "fc";
  fc.op = OpKind::FullyConnected;
  fc.attrs.weight = "w";
  fc.attrs.bias = "b";
  fc.inputs = {"x"};
  fc.outputs = {"y"};
  g.nodes.push_back(fc);
  const auto inputs = seeded_inputs(g, 9, -1.0f, 1.0f);
  const ExecTrace t = execute(g, inputs, ExecMode::F32);
  const auto want = oracles::matmul(inputs.at("x").values, 3, 2, g.initializers["w"].values, 4,
                                    g.initializers["b"].values);
  for (std::size_t i = 0; i < want.size(); ++i)
    REQUIRE(std::fabs(t.outputs.at("y").values[i] - want[i]) < 1e-6);
}

TEST_CASE("composite GELU matches the exact erf formula", "[interpreter]") {
  Graph g;
  g.inputs = {"x"};
  g.outputs = {"y"};
  g.tensors["x"] = {{64}, DType::F32};
  Node n;
  n.id = "gelu";
  n.op = OpKind::Gelu;
  n.inputs = {"x"};
  n.outputs = {"y"};
  g.nodes.push_back(n);
  const auto inputs = seeded_inputs(g, 123, -6.0f, 6.0f);
  const ExecTrace t = execute(g, inputs, ExecMode::F32);
  for (std::size_t i = 0; i < 64; ++i) {
    const double want = oracles::gelu_exact(inputs.at("x").values[i]);
    REQUIRE(std::fabs(t.outputs.at("y").values[i] - want) <=
            1e-6 * std::max(1.0, std::fabs(want)));
  }
}

TEST_CASE("execution is deterministic", "[interpreter]") {
  Graph g = conv_graph({1, 6, 6, 3}, {3, 3, 3, 2}, Padding::Same,
                       std::vector<float>(3 * 3 * 3 * 2, 0.125f), {0.5f, -0.5f});
  const auto inputs = seeded_inputs(g, 55, -1.0f, 1.0f);
  const ExecTrace a = execute(g, inputs, ExecMode::F32);
  const ExecTrace b = execute(g, inputs, ExecMode::F32);
  REQUIRE(bits_equal(a.outputs.at("y").values, b.outputs.at("y").values));
  const ExecTrace c = execute(g, inputs, ExecMode::F16Emulated);
  const ExecTrace d = execute(g, inputs, ExecMode::F16Emulated);
  REQUIRE(bits_equal(c.outputs.at("y").values, d.outputs.at("y").values));
}

TEST_CASE("binding errors are reported", "[interpreter]") {
  Graph g = conv_graph({1, 2, 2, 1}, {1, 1, 1, 1}, Padding::Valid, {1.0f});
  std::map<std::string, Tensor> inputs;
  REQUIRE_THROWS_AS(execute(g, inputs, ExecMode::F32), Error);  // missing
  inputs["x"] = Tensor::f32({1, 2, 2, 2}, std::vector<float>(8, 0.0f));
  REQUIRE_THROWS_AS(execute(g, inputs, ExecMode::F32), Error);  // wrong shape
  inputs["x"] = Tensor::f16({1, 2, 2, 1}, std::vector<float>(4, 0.0f));
  REQUIRE_THROWS_AS(execute(g, inputs, ExecMode::F32), Error);  // wrong dtype
}

TEST_CASE("F16 emulation records non-finite node outputs", "[interpreter]") {
  Graph g;
  g.inputs = {"x"};
  g.outputs = {"y"};
  g.tensors["x"] = {{2}, DType::F32};
  Node n;
  n.id = "sq";
  n.op = OpKind::Mul;
  n.inputs = {"x", "x"};
  n.outputs = {"y"};
  g.nodes.push_back(n);
  std::map<std::string, Tensor> inputs;
  inputs["x"] = Tensor::f32({2}, {300.0f, 1.0f});  // 300^2 = 90000 overflows binary16
  const ExecTrace f16 = execute(g, inputs, ExecMode::F16Emulated);
  REQUIRE(f16.nonfinite_events.size() == 1);
  REQUIRE(f16.nonfinite_events[0].node_id == "sq");
  const ExecTrace f32 = execute(g, inputs, ExecMode::F32);
  REQUIRE(f32.nonfinite_events.empty());
}

TEST_CASE("topological reordering does not change results", "[interpreter]") {
  // Diamond: y = (x + 1) * (x - 1), with independent branches that can be
  // stored in either order.
  Graph g;
  g.inputs = {"x"};
  g.outputs = {"y"};
  g.tensors["x"] = {{8}, DType::F32};
  g.initializers["one"] = Tensor::scalar(1.0f);
  Node a{"a", OpKind::Add, {}, {"x", "one"}, {"xp"}};
  Node b{"b", OpKind::Sub, {}, {"x", "one"}, {"xm"}};
  Node m{"m", OpKind::Mul, {}, {"xp", "xm"}, {"y"}};
  g.nodes = {a, b, m};
  REQUIRE(validate(g).empty());
  const auto inputs = seeded_inputs(g, 2, -2.0f, 2.0f);
  const ExecTrace t1 = execute(g, inputs, ExecMode::F32);
  Graph g2 = g;
  std::swap(g2.nodes[0], g2.nodes[1]);  // still topological
  REQUIRE(validate(g2).empty());
  const ExecTrace t2 = execute(g2, inputs, ExecMode::F32);
  REQUIRE(bits_equal(t1.outputs.at("y").values, t2.outputs.at("y").values));
}

TEST_CASE("peak intermediate accounting tracks live node outputs", "[interpreter]") {
  // Chain of three elementwise nodes over an 8-element tensor: at most two
  // node outputs are live at once.
  Graph g;
  g.inputs = {"x"};
  g.outputs = {"y"};
  g.tensors["x"] = {{8}, DType::F32};
  g.initializers["one"] = Tensor::scalar(1.0f);
  Node a{"a", OpKind::Add, {}, {"x", "one"}, {"t0"}};
  Node b{"b", OpKind::Mul, {}, {"t0", "one"}, {"t1"}};
  Node c{"c", OpKind::Sub, {}, {"t1", "one"}, {"y"}};
  g.nodes = {a, b, c};
  const ExecTrace t = execute(g, seeded_inputs(g, 4), ExecMode::F32);
  REQUIRE(t.peak_intermediate_elements == 16);
}

TEST_CASE("compare_graphs reports zero error for identical graphs", "[interpreter]") {
  Graph g = conv_graph({1, 4, 4, 2}, {3, 3, 2, 2}, Padding::Same,
                       std::vector<float>(3 * 3 * 2 * 2, 0.2f), {0.1f, 0.2f});
  const auto inputs = seeded_inputs(g, 6);
  const EquivalenceReport rep = compare_graphs(g, g, inputs, ExecMode::F32, {0.0, 0.0});
  REQUIRE(rep.pass);
  REQUIRE(rep.max_abs == 0.0);
  REQUIRE(rep.max_rel == 0.0);
}

TEST_CASE("compare_graphs flags a perturbed weight", "[interpreter]") {
  Graph g = conv_graph({1, 4, 4, 2}, {3, 3, 2, 2}, Padding::Same,
                       std::vector<float>(3 * 3 * 2 * 2, 0.2f), {0.1f, 0.2f});
  Graph g2 = g;
  g2.initializers["w"].values[0] += 1.0f;
  const auto inputs = seeded_inputs(g, 6);
  const EquivalenceReport rep = compare_graphs(g, g2, inputs, ExecMode::F32, {1e-5, 1e-5});
  REQUIRE_FALSE(rep.pass);
  REQUIRE(rep.max_abs > 0.0);
}

TEST_CASE("compare_graphs rejects signature mismatches", "[interpreter]") {
  Graph g = conv_graph({1, 2, 2, 1}, {1, 1, 1, 1}, Padding::Valid, {1.0f});
  Graph g2 = g;
  g2.inputs = {"z"};
  g2.tensors["z"] = g2.tensors["x"];
  REQUIRE_THROWS_AS(compare_graphs(g, g2, seeded_inputs(g, 1), ExecMode::F32, Tolerance{}),
                    Error);
}
