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
#include "squeezepass/graph_json.hpp"

using namespace squeezepass;

TEST_CASE("every demo graph validates cleanly", "[demo]") {
  for (const std::string& name : demo_names()) {
    for (SizeClass sc : {SizeClass::Tiny, SizeClass::PaperShape}) {
      CAPTURE(name, size_class_name(sc));
      const Graph g = make_demo({name, 42, sc});
      REQUIRE(validate(g).empty());
    }
  }
}

TEST_CASE("demo generation is bit-deterministic", "[demo]") {
  for (const std::string& name : demo_names()) {
    const Graph a = make_demo({name, 42, SizeClass::Tiny});
    const Graph b = make_demo({name, 42, SizeClass::Tiny});
    REQUIRE(save_graph_to_string(a) == save_graph_to_string(b));
  }
}

TEST_CASE("different seeds change values but not structure", "[demo]") {
  const Graph a = make_demo({"unet_like", 42, SizeClass::Tiny});
  const Graph b = make_demo({"unet_like", 43, SizeClass::Tiny});
  REQUIRE(structural_predicates(a).op_counts == structural_predicates(b).op_counts);
  REQUIRE_FALSE(a == b);
}

TEST_CASE("paper_shape demos reproduce the production activation sizes", "[demo]") {
  const Graph fc = infer_shapes(make_demo({"fc_block", 42, SizeClass::PaperShape}));
  REQUIRE(fc.tensor_info("x").shape == Shape{1, 4096, 320});

  const Graph conv = infer_shapes(make_demo({"big_conv", 42, SizeClass::PaperShape}));
  REQUIRE(conv.tensor_info("x").shape == Shape{1, 32, 32, 1920});
  REQUIRE(conv.tensor_info("y").shape == Shape{1, 32, 32, 640});
  REQUIRE(conv.initializers.at("conv0_w").shape == Shape{3, 3, 1920, 640});
}

TEST_CASE("tiny demos keep channel counts at or below 16", "[demo]") {
  for (const std::string& name : demo_names()) {
    const Graph g = infer_shapes(make_demo({name, 42, SizeClass::Tiny}));
    for (const auto& [id, info] : g.tensors) {
      if (info.shape.size() == 4) REQUIRE(info.shape[3] <= 16);
      if (info.shape.size() == 3) REQUIRE(info.shape[2] <= 16);
    }
  }
}

TEST_CASE("initializer values live in [-0.5, 0.5]", "[demo]") {
  for (const std::string& name : demo_names()) {
    const Graph g = make_demo({name, 42, SizeClass::Tiny});
    for (const auto& [id, t] : g.initializers)
      for (float v : t.values) {
        REQUIRE(v >= -0.5f);
        REQUIRE(v <= 0.5f);
      }
  }
}

TEST_CASE("unknown demo names are rejected", "[demo]") {
  REQUIRE_THROWS_AS(make_demo({"resnet", 42, SizeClass::Tiny}), Error);
}
