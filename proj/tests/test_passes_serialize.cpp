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

#include "squeezepass/demo_graphs.hpp"
#include "squeezepass/passes.hpp"
#include "test_helpers.hpp"

using namespace squeezepass;

TEST_CASE("input serialization structure and tolerance", "[serialize]") {
  const Graph g = make_demo({"big_conv", 42, SizeClass::Tiny});  // Cin 16, Cout 8
  for (std::int64_t k : {2, 4, 8}) {
    const auto [rewritten, report] = conv_serialize_input(g, "conv0", k);
    REQUIRE(validate(rewritten).empty());
    const StructuralSummary s = structural_predicates(rewritten);
    REQUIRE(s.op_counts.at("Conv2D") == k);
    REQUIRE(s.op_counts.at("Split") == 1);
    REQUIRE(s.op_counts.at("Add") == k);  // k-1 partial sums + 1 bias add
    // Reassociation only: same multiset of products, different grouping.
    const auto rep = test_helpers::compare_over_runs(g, rewritten, ExecMode::F32, 8, 50, -1, 1);
    REQUIRE(rep.max_rel <= 1e-5);
  }
}

TEST_CASE("output serialization is bit-identical in F32", "[serialize]") {
  const Graph g = make_demo({"big_conv", 42, SizeClass::Tiny});
  for (std::int64_t k : {2, 4, 8}) {
    const auto [rewritten, report] = conv_serialize_output(g, "conv0", k);
    REQUIRE(validate(rewritten).empty());
    const StructuralSummary s = structural_predicates(rewritten);
    REQUIRE(s.op_counts.at("Conv2D") == k);
    REQUIRE(s.op_counts.at("Concat") == 1);
    const auto rep = test_helpers::compare_over_runs(g, rewritten, ExecMode::F32, 8, 60, -1, 1);
    REQUIRE(rep.max_abs == 0.0);
  }
}

TEST_CASE("k=1 serialization is the identity", "[serialize]") {
  const Graph g = make_demo({"big_conv", 42, SizeClass::Tiny});
  const auto [in_g, in_rep] = conv_serialize_input(g, "conv0", 1);
  REQUIRE_FALSE(in_rep.changed());
  REQUIRE(in_rep.notes.count("noop") == 1);
  REQUIRE(in_g == g);
  const auto [out_g, out_rep] = conv_serialize_output(g, "conv0", 1);
  REQUIRE_FALSE(out_rep.changed());
  REQUIRE(out_g == g);
}

TEST_CASE("serialization rejects bad arguments", "[serialize]") {
  const Graph g = make_demo({"big_conv", 42, SizeClass::Tiny});
  REQUIRE_THROWS_AS(conv_serialize_input(g, "conv0", 3), PassError);   // 3 does not divide 16
  REQUIRE_THROWS_AS(conv_serialize_output(g, "conv0", 3), PassError);  // 3 does not divide 8
  REQUIRE_THROWS_AS(conv_serialize_input(g, "nope", 2), PassError);
  const Graph fc = make_demo({"fc_block", 42, SizeClass::Tiny});
  REQUIRE_THROWS_AS(conv_serialize_input(fc, "fc0", 2), PassError);  // not a Conv2D
}

TEST_CASE("serialization of a bias-free conv skips the bias add", "[serialize]") {
  Graph g = make_demo({"big_conv", 42, SizeClass::Tiny});
  Node* conv = g.find_node("conv0");
  conv->attrs.bias.clear();
  prune_orphan_initializers(g);
  const auto [rewritten, report] = conv_serialize_input(g, "conv0", 2);
  const StructuralSummary s = structural_predicates(rewritten);
  REQUIRE(s.op_counts.at("Add") == 1);  // just the partial sum
  const auto rep = test_helpers::compare_over_runs(g, rewritten, ExecMode::F32, 4, 70, -1, 1);
  REQUIRE(rep.max_rel <= 1e-5);
}

TEST_CASE("serialization slices quantized kernels consistently", "[serialize]") {
  // Build an i8-weight conv by hand: per-channel scales live on the output
  // axis, so output-serialization must slice them and input-serialization
  // must keep them.
  Graph g = make_demo({"big_conv", 7, SizeClass::Tiny});
  const Tensor& w = g.initializers.at("conv0_w");
  std::vector<std::int8_t> q(static_cast<std::size_t>(w.element_count()));
  Lcg rng(19, "i8-kernel");
  for (auto& v : q) v = static_cast<std::int8_t>(static_cast<int>(rng.next_below(255)) - 127);
  std::vector<float> scales(8);
  for (float& s : scales) s = 0.001f + 0.001f * static_cast<float>(rng.next_below(16));
  g.initializers["conv0_w"] = Tensor::i8(w.shape, std::move(q), std::move(scales));
  g.tensors["conv0_w"] = {w.shape, DType::I8};
  REQUIRE(validate(g).empty());

  const auto [by_out, rep_out] = conv_serialize_output(g, "conv0", 4);
  REQUIRE(validate(by_out).empty());
  const auto rep1 = test_helpers::compare_over_runs(g, by_out, ExecMode::F32, 4, 80, -1, 1);
  REQUIRE(rep1.max_abs == 0.0);

  const auto [by_in, rep_in] = conv_serialize_input(g, "conv0", 2);
  REQUIRE(validate(by_in).empty());
  const auto rep2 = test_helpers::compare_over_runs(g, by_in, ExecMode::F32, 4, 90, -1, 1);
  REQUIRE(rep2.max_rel <= 1e-5);
}

TEST_CASE("minimal serialization factors for the production conv", "[serialize]") {
  const Graph g = make_demo({"big_conv", 42, SizeClass::PaperShape});
  const CapabilityProfile profile = mobile_gpu_profile();

  // Library result.
  const auto k_in = minimal_serialization_factor(g, "conv0", SerialDim::Input, profile);
  const auto k_out = minimal_serialization_factor(g, "conv0", SerialDim::Output, profile);
  REQUIRE(k_in.has_value());
  REQUIRE(k_out.has_value());
  REQUIRE(*k_in == 2);
  REQUIRE(*k_out == 8);

  // Brute-force verification: actually apply each candidate serialization
  // and run the admission predicate over every produced Conv2D.
  auto admits_all = [&](SerialDim dim, std::int64_t k) {
    const Graph inferred = infer_shapes(g);
    const auto [rewritten, report] =
        dim == SerialDim::Input ? conv_serialize_input(inferred, "conv0", k)
                                : conv_serialize_output(inferred, "conv0", k);
    const Graph r = infer_shapes(rewritten);
    for (const Node& n : r.nodes) {
      if (n.op != OpKind::Conv2D) continue;
      if (!admit(r, n, profile).admitted) return false;
    }
    return true;
  };
  for (SerialDim dim : {SerialDim::Input, SerialDim::Output}) {
    const std::int64_t channels = dim == SerialDim::Input ? 1920 : 640;
    std::int64_t expect = dim == SerialDim::Input ? 2 : 8;
    for (std::int64_t k = 1; k <= channels; ++k) {
      if (channels % k != 0) continue;
      const bool ok = admits_all(dim, k);
      if (k < expect) {
        REQUIRE_FALSE(ok);
      } else if (k == expect) {
        REQUIRE(ok);
        break;
      }
    }
  }
}

TEST_CASE("minimal factor edge cases", "[serialize]") {
  const Graph g = make_demo({"big_conv", 42, SizeClass::PaperShape});
  CapabilityProfile unlimited = mobile_gpu_profile();
  unlimited.max_io_elements.reset();
  REQUIRE(*minimal_serialization_factor(g, "conv0", SerialDim::Input, unlimited) == 1);
  REQUIRE(*minimal_serialization_factor(g, "conv0", SerialDim::Output, unlimited) == 1);

  // Budget below the output tensor alone: input serialization can never
  // help because the full output appears in every partial conv.
  CapabilityProfile tight = mobile_gpu_profile();
  tight.max_io_elements = 655360;  // exactly |output| of the production conv
  REQUIRE_FALSE(minimal_serialization_factor(g, "conv0", SerialDim::Input, tight).has_value());

  CapabilityProfile no_conv = mobile_gpu_profile();
  no_conv.supported_ops.erase("Conv2D");
  REQUIRE_FALSE(minimal_serialization_factor(g, "conv0", SerialDim::Input, no_conv).has_value());
}

TEST_CASE("choose_serialization picks input k=2 for the production conv", "[serialize]") {
  const Graph g = make_demo({"big_conv", 42, SizeClass::PaperShape});
  const SerializationChoice choice =
      choose_serialization(g, "conv0", mobile_gpu_profile(), CostModel{});
  REQUIRE(choice.dim == SerialDim::Input);
  REQUIRE(choice.k == 2);
}

TEST_CASE("choose_serialization tie-breaks toward the input dimension", "[serialize]") {
  // Symmetric conv (Cin == Cout, SAME): both dimensions need k=2 and the
  // produced convolutions price identically.
  Graph g;
  g.inputs = {"x"};
  g.outputs = {"y"};
  g.tensors["x"] = {{1, 8, 8, 8}, DType::F32};
  g.initializers["w"] = Tensor::f32({3, 3, 8, 8}, std::vector<float>(3 * 3 * 8 * 8, 0.01f));
  Node conv{"conv", OpKind::Conv2D, {}, {"x"}, {"y"}};
  conv.attrs.weight = "w";
  conv.attrs.padding = Padding::Same;
  g.nodes.push_back(conv);

  CapabilityProfile p = mobile_gpu_profile();
  p.max_io_elements = 1024;  // original io = 512 + 512 = 1024 fails strictly; k=2 passes
  const SerializationChoice choice = choose_serialization(g, "conv", p, CostModel{});
  REQUIRE(choice.dim == SerialDim::Input);
  REQUIRE(choice.k == 2);
}

TEST_CASE("choose_serialization falls back to the only feasible dimension", "[serialize]") {
  // Output far larger than the input: every input-dim candidate still
  // carries the whole output, so only output serialization can fit.
  Graph g;
  g.inputs = {"x"};
  g.outputs = {"y"};
  g.tensors["x"] = {{1, 4, 4, 4}, DType::F32};
  g.initializers["w"] = Tensor::f32({1, 1, 4, 1024}, std::vector<float>(4 * 1024, 0.01f));
  Node conv{"conv", OpKind::Conv2D, {}, {"x"}, {"y"}};
  conv.attrs.weight = "w";
  conv.attrs.padding = Padding::Valid;
  g.nodes.push_back(conv);

  CapabilityProfile p = mobile_gpu_profile();
  p.max_io_elements = 10000;  // |out| = 16384 alone exceeds it; out/2 + in = 8256 fits
  REQUIRE_FALSE(minimal_serialization_factor(g, "conv", SerialDim::Input, p).has_value());
  const SerializationChoice choice = choose_serialization(g, "conv", p, CostModel{});
  REQUIRE(choice.dim == SerialDim::Output);
  REQUIRE(choice.k == 2);

  CapabilityProfile hopeless = p;
  hopeless.max_io_elements = 10;
  REQUIRE_THROWS_AS(choose_serialization(g, "conv", hopeless, CostModel{}), PassError);
}
