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

// Delegation-enabling graph rewrites, as pure Graph -> (Graph, PassReport)
// functions:
//
//   fc_to_conv             FullyConnected -> Reshape + 1x1 Conv2D + Reshape
//   conv_serialize_input   split one Conv2D along Cin into k partial convs
//                          summed by a balanced Add tree (bias added once
//                          at the end)
//   conv_serialize_output  split along Cout into k convs + Concat; per-
//                          element accumulation order is unchanged, so F32
//                          results are bit-identical
//   lower_groupnorm        expand GroupNorm composites (naive rank-5
//                          variant with BroadcastTo, or the rank-4
//                          broadcast-free variant)
//   lower_gelu             expand GELU composites into the tanh-polynomial
//                          subgraph, optionally clipping the tanh argument
//                          to [-M, M] so the cubic term stays representable
//                          in binary16
//   run_pipeline           the full flow, serializing every Conv2D the
//                          profile rejects
//
// Passes preserve graph input/output ids and splice replacements in place,
// so the stored node order stays topological.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "squeezepass/delegation.hpp"
#include "squeezepass/graph.hpp"

namespace squeezepass {

struct PassReport {
  std::string pass_name;
  std::vector<std::string> removed_nodes;
  std::vector<std::string> added_nodes;
  std::map<std::string, std::string> notes;

  bool changed() const { return !removed_nodes.empty() || !added_nodes.empty(); }
};

struct GeluParams {
  double clip = 10.0;            // M
  double c1 = 0.7978845608028654;  // sqrt(2/pi)
  double c2 = 0.044715;
};

enum class GroupNormVariant { Naive, BroadcastFree };
enum class GeluVariant { Naive, Stable };
enum class SerialDim { Input, Output };

inline const char* serial_dim_name(SerialDim d) {
  return d == SerialDim::Input ? "input" : "output";
}

namespace detail {

class IdAllocator {
 public:
  explicit IdAllocator(const Graph& g) {
    for (const Node& n : g.nodes) {
      used_.insert(n.id);
      for (const auto& t : n.outputs) used_.insert(t);
    }
    for (const auto& [id, info] : g.tensors) used_.insert(id);
    for (const auto& [id, t] : g.initializers) used_.insert(id);
    for (const auto& id : g.inputs) used_.insert(id);
  }

  std::string fresh(const std::string& base) {
    if (used_.insert(base).second) return base;
    for (int i = 2;; ++i) {
      const std::string candidate = base + "_" + std::to_string(i);
      if (used_.insert(candidate).second) return candidate;
    }
  }

 private:
  std::set<std::string> used_;
};

inline Tensor slice_axis(const Tensor& t, int axis, std::int64_t lo, std::int64_t hi) {
  Shape out_shape = t.shape;
  out_shape[static_cast<std::size_t>(axis)] = hi - lo;
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= t.shape[static_cast<std::size_t>(d)];
  for (std::size_t d = static_cast<std::size_t>(axis) + 1; d < t.shape.size(); ++d)
    inner *= t.shape[d];
  const std::int64_t axis_len = t.shape[static_cast<std::size_t>(axis)];
  const std::int64_t span = hi - lo;

  auto copy_payload = [&](const auto& src, auto& dst) {
    dst.resize(static_cast<std::size_t>(outer * span * inner));
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t a = 0; a < span; ++a)
        for (std::int64_t i = 0; i < inner; ++i)
          dst[static_cast<std::size_t>((o * span + a) * inner + i)] =
              src[static_cast<std::size_t>((o * axis_len + lo + a) * inner + i)];
  };

  Tensor out;
  out.shape = out_shape;
  out.dtype = t.dtype;
  if (t.dtype == DType::I8) {
    copy_payload(t.quant, out.quant);
    if (t.scales.size() > 1 && axis == t.rank() - 1) {
      out.scales.assign(t.scales.begin() + lo, t.scales.begin() + hi);
    } else {
      out.scales = t.scales;
    }
  } else {
    copy_payload(t.values, out.values);
  }
  return out;
}

inline std::vector<std::int64_t> sorted_divisors(std::int64_t n) {
  std::vector<std::int64_t> divs;
  for (std::int64_t k = 1; k <= n; ++k)
    if (n % k == 0) divs.push_back(k);
  return divs;
}

}  // namespace detail

// Converts every FullyConnected node with a rank-2 or rank-3 input into
// Reshape -> 1x1 VALID Conv2D -> Reshape. The kernel is the weight viewed
// as [1, 1, Cin, Cout] (same row-major payload), so the accumulation order
// per output element is unchanged.
inline std::pair<Graph, PassReport> fc_to_conv(const Graph& graph) {
  require_valid(graph, "fc_to_conv");
  const Graph g = infer_shapes(graph);
  PassReport report;
  report.pass_name = "fc_to_conv";

  Graph out = g;
  detail::IdAllocator ids(g);
  std::vector<Node> rewritten;
  for (const Node& n : g.nodes) {
    if (n.op != OpKind::FullyConnected) {
      rewritten.push_back(n);
      continue;
    }
    const Shape in_shape = g.tensor_info(n.inputs[0]).shape;
    if (in_shape.size() > 3)
      throw PassError("fc_to_conv", n.id, "input rank " + std::to_string(in_shape.size()) +
                                              " is not convertible (want rank 2 or 3)");
    const Shape out_shape = g.tensor_info(n.outputs[0]).shape;
    const Tensor& w = g.initializers.at(n.attrs.weight);
    const std::int64_t cin = w.shape[0];
    const std::int64_t cout = w.shape[1];
    const std::int64_t batch = in_shape.size() == 3 ? in_shape[0] : 1;
    const std::int64_t rows = in_shape[in_shape.size() - 2];

    Tensor kernel = w;
    kernel.shape = {1, 1, cin, cout};
    const std::string kernel_id = ids.fresh(n.attrs.weight + "__1x1");
    out.initializers[kernel_id] = std::move(kernel);

    const std::string x4 = ids.fresh(n.id + "__nhwc_in");
    const std::string y4 = ids.fresh(n.id + "__nhwc_out");

    Node pre{ids.fresh(n.id + "__reshape_in"), OpKind::Reshape, {}, {n.inputs[0]}, {x4}};
    pre.attrs.target_shape = {batch, rows, 1, cin};
    Node conv{ids.fresh(n.id + "__conv"), OpKind::Conv2D, {}, {x4}, {y4}};
    conv.attrs.weight = kernel_id;
    conv.attrs.bias = n.attrs.bias;
    conv.attrs.stride = {1, 1};
    conv.attrs.padding = Padding::Valid;
    Node post{ids.fresh(n.id + "__reshape_out"), OpKind::Reshape, {}, {y4}, {n.outputs[0]}};
    post.attrs.target_shape = out_shape;

    report.removed_nodes.push_back(n.id);
    for (const Node* added : {&pre, &conv, &post}) report.added_nodes.push_back(added->id);
    rewritten.push_back(std::move(pre));
    rewritten.push_back(std::move(conv));
    rewritten.push_back(std::move(post));
    out.tensors.erase(n.outputs[0]);  // re-inferred below
  }
  out.nodes = std::move(rewritten);
  prune_orphan_initializers(out);
  out = infer_shapes(out);
  report.notes["converted"] = std::to_string(report.removed_nodes.size());
  return {std::move(out), std::move(report)};
}

// Splits a Conv2D along the input-channel dimension into k bias-free convs
// over Split slices, summed by a balanced tree of Add nodes; the original
// bias (if any) is added once after the tree. k = 1 is the identity.
inline std::pair<Graph, PassReport> conv_serialize_input(const Graph& graph,
                                                         const std::string& node_id,
                                                         std::int64_t k) {
  require_valid(graph, "conv_serialize_input");
  const Graph g = infer_shapes(graph);
  PassReport report;
  report.pass_name = "conv_serialize_input";
  report.notes["node"] = node_id;
  report.notes["dim"] = "input";
  report.notes["k"] = std::to_string(k);

  const Node* target = g.find_node(node_id);
  if (!target) throw PassError("conv_serialize_input", node_id, "no such node");
  if (target->op != OpKind::Conv2D)
    throw PassError("conv_serialize_input", node_id, "not a Conv2D node");
  if (k < 1) throw PassError("conv_serialize_input", node_id, "k must be >= 1");
  if (k == 1) {
    report.notes["noop"] = "k=1 leaves the graph unchanged";
    return {graph, std::move(report)};
  }
  const Tensor& w = g.initializers.at(target->attrs.weight);
  const std::int64_t cin = w.shape[2];
  if (cin % k != 0)
    throw PassError("conv_serialize_input", node_id,
                    "k=" + std::to_string(k) + " does not divide Cin=" + std::to_string(cin));

  Graph out = g;
  detail::IdAllocator ids(g);
  std::vector<Node> rewritten;
  for (const Node& n : g.nodes) {
    if (n.id != node_id) {
      rewritten.push_back(n);
      continue;
    }
    const std::string final_out = n.outputs[0];
    const bool has_bias = !n.attrs.bias.empty();

    Node split{ids.fresh(n.id + "__split"), OpKind::Split, {}, {n.inputs[0]}, {}};
    split.attrs.axis = 3;
    split.attrs.parts = k;
    std::vector<std::string> parts;
    for (std::int64_t i = 0; i < k; ++i)
      parts.push_back(ids.fresh(n.inputs[0] + "__slice" + std::to_string(i)));
    split.outputs = parts;
    report.added_nodes.push_back(split.id);
    rewritten.push_back(std::move(split));

    const std::int64_t chunk = cin / k;
    std::vector<std::string> partials;
    for (std::int64_t i = 0; i < k; ++i) {
      const std::string kernel_id =
          ids.fresh(n.attrs.weight + "__cin" + std::to_string(i));
      out.initializers[kernel_id] =
          detail::slice_axis(w, 2, i * chunk, (i + 1) * chunk);
      Node conv{ids.fresh(n.id + "__part" + std::to_string(i)), OpKind::Conv2D, {},
                {parts[static_cast<std::size_t>(i)]},
                {ids.fresh(final_out + "__partial" + std::to_string(i))}};
      conv.attrs.weight = kernel_id;
      conv.attrs.stride = n.attrs.stride;
      conv.attrs.padding = n.attrs.padding;
      partials.push_back(conv.outputs[0]);
      report.added_nodes.push_back(conv.id);
      rewritten.push_back(std::move(conv));
    }

    // Balanced pairwise reduction; an odd operand carries to the next level.
    int level = 0;
    while (partials.size() > 1) {
      std::vector<std::string> next;
      for (std::size_t i = 0; i + 1 < partials.size(); i += 2) {
        const bool last_add = partials.size() == 2 && !has_bias;
        const std::string sum_id =
            last_add ? final_out
                     : ids.fresh(final_out + "__sum" + std::to_string(level) + "_" +
                                 std::to_string(i / 2));
        Node add{ids.fresh(n.id + "__add" + std::to_string(level) + "_" + std::to_string(i / 2)),
                 OpKind::Add, {}, {partials[i], partials[i + 1]}, {sum_id}};
        report.added_nodes.push_back(add.id);
        rewritten.push_back(std::move(add));
        next.push_back(sum_id);
      }
      if (partials.size() % 2 == 1) next.push_back(partials.back());
      partials = std::move(next);
      ++level;
    }
    if (has_bias) {
      Node add{ids.fresh(n.id + "__bias_add"), OpKind::Add, {},
               {partials[0], n.attrs.bias}, {final_out}};
      report.added_nodes.push_back(add.id);
      rewritten.push_back(std::move(add));
    }
    report.removed_nodes.push_back(n.id);
  }
  out.nodes = std::move(rewritten);
  prune_orphan_initializers(out);
  out = infer_shapes(out);
  return {std::move(out), std::move(report)};
}

// Splits a Conv2D along the output-channel dimension into k convs over
// kernel/bias slices, concatenated along the channel axis. k = 1 is the
// identity.
inline std::pair<Graph, PassReport> conv_serialize_output(const Graph& graph,
                                                          const std::string& node_id,
                                                          std::int64_t k) {
  require_valid(graph, "conv_serialize_output");
  const Graph g = infer_shapes(graph);
  PassReport report;
  report.pass_name = "conv_serialize_output";
  report.notes["node"] = node_id;
  report.notes["dim"] = "output";
  report.notes["k"] = std::to_string(k);

  const Node* target = g.find_node(node_id);
  if (!target) throw PassError("conv_serialize_output", node_id, "no such node");
  if (target->op != OpKind::Conv2D)
    throw PassError("conv_serialize_output", node_id, "not a Conv2D node");
  if (k < 1) throw PassError("conv_serialize_output", node_id, "k must be >= 1");
  if (k == 1) {
    report.notes["noop"] = "k=1 leaves the graph unchanged";
    return {graph, std::move(report)};
  }
  const Tensor& w = g.initializers.at(target->attrs.weight);
  const std::int64_t cout = w.shape[3];
  if (cout % k != 0)
    throw PassError("conv_serialize_output", node_id,
                    "k=" + std::to_string(k) + " does not divide Cout=" + std::to_string(cout));

  Graph out = g;
  detail::IdAllocator ids(g);
  std::vector<Node> rewritten;
  for (const Node& n : g.nodes) {
    if (n.id != node_id) {
      rewritten.push_back(n);
      continue;
    }
    const std::string final_out = n.outputs[0];
    const std::int64_t chunk = cout / k;
    std::vector<std::string> pieces;
    for (std::int64_t i = 0; i < k; ++i) {
      const std::string kernel_id =
          ids.fresh(n.attrs.weight + "__cout" + std::to_string(i));
      out.initializers[kernel_id] = detail::slice_axis(w, 3, i * chunk, (i + 1) * chunk);
      Node conv{ids.fresh(n.id + "__part" + std::to_string(i)), OpKind::Conv2D, {},
                {n.inputs[0]},
                {ids.fresh(final_out + "__piece" + std::to_string(i))}};
      conv.attrs.weight = kernel_id;
      conv.attrs.stride = n.attrs.stride;
      conv.attrs.padding = n.attrs.padding;
      if (!n.attrs.bias.empty()) {
        const Tensor& b = g.initializers.at(n.attrs.bias);
        const std::string bias_id = ids.fresh(n.attrs.bias + "__cout" + std::to_string(i));
        out.initializers[bias_id] = detail::slice_axis(b, 0, i * chunk, (i + 1) * chunk);
        conv.attrs.bias = bias_id;
      }
      pieces.push_back(conv.outputs[0]);
      report.added_nodes.push_back(conv.id);
      rewritten.push_back(std::move(conv));
    }
    Node concat{ids.fresh(n.id + "__concat"), OpKind::Concat, {}, pieces, {final_out}};
    concat.attrs.axis = 3;
    report.added_nodes.push_back(concat.id);
    rewritten.push_back(std::move(concat));
    report.removed_nodes.push_back(n.id);
  }
  out.nodes = std::move(rewritten);
  prune_orphan_initializers(out);
  out = infer_shapes(out);
  return {std::move(out), std::move(report)};
}

// Smallest k among the sorted divisors of the channel count such that every
// Conv2D the serialization would produce is admitted by the profile.
// std::nullopt when no divisor works. The per-conv activation totals follow
// directly from the pass construction: in/k + out for the input dimension,
// in + out/k for the output dimension.
inline std::optional<std::int64_t> minimal_serialization_factor(const Graph& graph,
                                                                const std::string& node_id,
                                                                SerialDim dim,
                                                                const CapabilityProfile& profile) {
  const Graph g = infer_shapes(graph);
  const Node* n = g.find_node(node_id);
  if (!n) throw Error("minimal_serialization_factor: no node '" + node_id + "'");
  if (n->op != OpKind::Conv2D)
    throw Error("minimal_serialization_factor: node '" + node_id + "' is not a Conv2D");
  if (!profile.supported_ops.count("Conv2D")) return std::nullopt;
  const Shape in_shape = g.tensor_info(n->inputs[0]).shape;
  const Shape out_shape = g.tensor_info(n->outputs[0]).shape;
  if (static_cast<int>(in_shape.size()) > profile.max_rank ||
      static_cast<int>(out_shape.size()) > profile.max_rank)
    return std::nullopt;
  const std::int64_t in_elems = element_count(in_shape);
  const std::int64_t out_elems = element_count(out_shape);
  const std::int64_t channels = dim == SerialDim::Input ? in_shape[3] : out_shape[3];
  for (std::int64_t k : detail::sorted_divisors(channels)) {
    const std::int64_t io =
        dim == SerialDim::Input ? in_elems / k + out_elems : in_elems + out_elems / k;
    if (!profile.max_io_elements || io < *profile.max_io_elements) return k;
  }
  return std::nullopt;
}

struct SerializationChoice {
  SerialDim dim = SerialDim::Input;
  std::int64_t k = 1;
};

// Picks the cheaper feasible serialization. The comparison prices the
// produced convolution kernel calls (alpha per call, beta per MAC, gamma
// per activation element); total MACs are equal either way, so the choice
// turns on call count and activation traffic. Ties break toward the input
// dimension.
inline SerializationChoice choose_serialization(const Graph& graph, const std::string& node_id,
                                                const CapabilityProfile& profile,
                                                const CostModel& cost) {
  const Graph g = infer_shapes(graph);
  const Node* n = g.find_node(node_id);
  if (!n) throw Error("choose_serialization: no node '" + node_id + "'");
  const auto k_in = minimal_serialization_factor(g, node_id, SerialDim::Input, profile);
  const auto k_out = minimal_serialization_factor(g, node_id, SerialDim::Output, profile);
  if (!k_in && !k_out)
    throw PassError("choose_serialization", node_id,
                    "no serialization factor enables delegation under profile '" +
                        profile.name + "'");
  const std::int64_t in_elems = element_count(g.tensor_info(n->inputs[0]).shape);
  const std::int64_t out_elems = element_count(g.tensor_info(n->outputs[0]).shape);
  const double macs = static_cast<double>(node_macs(g, *n));
  auto conv_cost = [&](SerialDim dim, std::int64_t k) {
    const double io = dim == SerialDim::Input
                          ? static_cast<double>(in_elems + k * out_elems)
                          : static_cast<double>(k * in_elems + out_elems);
    return cost.alpha * static_cast<double>(k) + cost.beta * macs + cost.gamma * io;
  };
  if (k_in && !k_out) return {SerialDim::Input, *k_in};
  if (k_out && !k_in) return {SerialDim::Output, *k_out};
  const double cost_in = conv_cost(SerialDim::Input, *k_in);
  const double cost_out = conv_cost(SerialDim::Output, *k_out);
  if (cost_out < cost_in) return {SerialDim::Output, *k_out};
  return {SerialDim::Input, *k_in};  // cheaper or tied
}

inline std::pair<Graph, PassReport> conv_serialize(const Graph& g, const std::string& node_id,
                                                   const SerializationChoice& choice) {
  return choice.dim == SerialDim::Input ? conv_serialize_input(g, node_id, choice.k)
                                        : conv_serialize_output(g, node_id, choice.k);
}

// Expands GroupNorm composites. The broadcast-free variant works on a
// [B, H*W, G, C/G] view with keep-dims means and implicit trailing
// broadcasting (rank never exceeds 4, no BroadcastTo). The naive variant
// reproduces converter-style output: a rank-5 [B, H, W, G, C/G] view with
// the mean and variance materialized through explicit BroadcastTo nodes.
inline std::pair<Graph, PassReport> lower_groupnorm(const Graph& graph,
                                                    GroupNormVariant variant) {
  require_valid(graph, "lower_groupnorm");
  const Graph g = infer_shapes(graph);
  PassReport report;
  report.pass_name = variant == GroupNormVariant::Naive ? "lower_groupnorm_naive"
                                                        : "lower_groupnorm_broadcast_free";

  Graph out = g;
  detail::IdAllocator ids(g);
  std::vector<Node> rewritten;
  for (const Node& n : g.nodes) {
    if (n.op != OpKind::GroupNorm) {
      rewritten.push_back(n);
      continue;
    }
    const Shape in_shape = g.tensor_info(n.inputs[0]).shape;
    const std::int64_t b = in_shape[0], h = in_shape[1], w = in_shape[2], c = in_shape[3];
    const std::int64_t groups = n.attrs.groups;
    const std::int64_t cg = c / groups;

    const std::string eps_id = ids.fresh(n.id + "__eps");
    out.initializers[eps_id] = Tensor::scalar(static_cast<float>(n.attrs.epsilon));

    auto tensor_id = [&](const char* suffix) { return ids.fresh(n.id + suffix); };
    const std::string x = n.inputs[0];
    const std::string final_out = n.outputs[0];

    std::vector<Node> seq;
    auto emit = [&](const char* id_suffix, OpKind op, std::vector<std::string> inputs,
                    std::string output) -> Node& {
      Node node{ids.fresh(n.id + id_suffix), op, {}, std::move(inputs), {std::move(output)}};
      seq.push_back(std::move(node));
      return seq.back();
    };

    if (variant == GroupNormVariant::BroadcastFree) {
      const std::string r0 = tensor_id("__grouped");
      emit("__reshape_in", OpKind::Reshape, {x}, r0).attrs.target_shape = {b, h * w, groups, cg};
      const std::string mean = tensor_id("__mean");
      {
        Node& m = emit("__mean", OpKind::Mean, {r0}, mean);
        m.attrs.axes = {1, 3};
        m.attrs.keep_dims = true;
      }
      const std::string sqdiff = tensor_id("__sqdiff");
      emit("__sqdiff", OpKind::SquaredDifference, {r0, mean}, sqdiff);
      const std::string var = tensor_id("__var");
      {
        Node& m = emit("__var", OpKind::Mean, {sqdiff}, var);
        m.attrs.axes = {1, 3};
        m.attrs.keep_dims = true;
      }
      const std::string vareps = tensor_id("__vareps");
      emit("__vareps", OpKind::Add, {var, eps_id}, vareps);
      const std::string inv = tensor_id("__rsqrt");
      emit("__rsqrt", OpKind::Rsqrt, {vareps}, inv);
      const std::string centered = tensor_id("__centered");
      emit("__center", OpKind::Sub, {r0, mean}, centered);
      const std::string normed = tensor_id("__normed");
      emit("__normalize", OpKind::Mul, {centered, inv}, normed);
      const std::string r1 = tensor_id("__nhwc");
      emit("__reshape_out", OpKind::Reshape, {normed}, r1).attrs.target_shape = {b, h, w, c};
      const std::string scaled = tensor_id("__scaled");
      emit("__scale", OpKind::Mul, {r1, n.attrs.gamma}, scaled);
      emit("__shift", OpKind::Add, {scaled, n.attrs.beta}, final_out);
    } else {
      const Shape r5{b, h, w, groups, cg};
      const std::string r0 = tensor_id("__grouped");
      emit("__reshape_in", OpKind::Reshape, {x}, r0).attrs.target_shape = r5;
      const std::string mean = tensor_id("__mean");
      {
        Node& m = emit("__mean", OpKind::Mean, {r0}, mean);
        m.attrs.axes = {1, 2, 4};
        m.attrs.keep_dims = true;
      }
      const std::string mean_b = tensor_id("__mean_full");
      emit("__mean_broadcast", OpKind::BroadcastTo, {mean}, mean_b).attrs.target_shape = r5;
      const std::string sqdiff = tensor_id("__sqdiff");
      emit("__sqdiff", OpKind::SquaredDifference, {r0, mean_b}, sqdiff);
      const std::string var = tensor_id("__var");
      {
        Node& m = emit("__var", OpKind::Mean, {sqdiff}, var);
        m.attrs.axes = {1, 2, 4};
        m.attrs.keep_dims = true;
      }
      const std::string var_b = tensor_id("__var_full");
      emit("__var_broadcast", OpKind::BroadcastTo, {var}, var_b).attrs.target_shape = r5;
      const std::string vareps = tensor_id("__vareps");
      emit("__vareps", OpKind::Add, {var_b, eps_id}, vareps);
      const std::string inv = tensor_id("__rsqrt");
      emit("__rsqrt", OpKind::Rsqrt, {vareps}, inv);
      const std::string centered = tensor_id("__centered");
      emit("__center", OpKind::Sub, {r0, mean_b}, centered);
      const std::string normed = tensor_id("__normed");
      emit("__normalize", OpKind::Mul, {centered, inv}, normed);
      const std::string r1 = tensor_id("__nhwc");
      emit("__reshape_out", OpKind::Reshape, {normed}, r1).attrs.target_shape = {b, h, w, c};
      const std::string scaled = tensor_id("__scaled");
      emit("__scale", OpKind::Mul, {r1, n.attrs.gamma}, scaled);
      emit("__shift", OpKind::Add, {scaled, n.attrs.beta}, final_out);
    }

    report.removed_nodes.push_back(n.id);
    for (Node& node : seq) {
      report.added_nodes.push_back(node.id);
      rewritten.push_back(std::move(node));
    }
    out.tensors.erase(final_out);
  }
  out.nodes = std::move(rewritten);
  prune_orphan_initializers(out);
  out = infer_shapes(out);
  report.notes["lowered"] = std::to_string(report.removed_nodes.size());
  return {std::move(out), std::move(report)};
}

// Expands GELU composites into 0.5*x*(1 + tanh(c1*(z + c2*z^3))) built from
// Mul/Add/Tanh primitives, where z = x for the naive variant and
// z = max(min(x, M), -M) for the stable one (Minimum/Maximum at the head of
// the subgraph). The outer 0.5*x prefactor always uses the unclipped x.
// The cube, polynomial, and tanh-argument nodes carry trace tags so the
// interpreter's F16 emulation can attribute non-finite intermediates.
inline std::pair<Graph, PassReport> lower_gelu(const Graph& graph, GeluVariant variant,
                                               const GeluParams& params = {}) {
  require_valid(graph, "lower_gelu");
  if (!(params.clip > 0)) throw Error("lower_gelu: clip bound M must be positive");
  const Graph g = infer_shapes(graph);
  PassReport report;
  report.pass_name = variant == GeluVariant::Naive ? "lower_gelu_naive" : "lower_gelu_stable";
  if (variant == GeluVariant::Stable) {
    std::string m = std::to_string(params.clip);
    report.notes["clip"] = m;
  }

  Graph out = g;
  detail::IdAllocator ids(g);
  std::vector<Node> rewritten;
  for (const Node& n : g.nodes) {
    if (n.op != OpKind::Gelu) {
      rewritten.push_back(n);
      continue;
    }
    const std::string x = n.inputs[0];
    const std::string final_out = n.outputs[0];

    auto constant = [&](const char* suffix, double v) {
      const std::string id = ids.fresh(n.id + suffix);
      out.initializers[id] = Tensor::scalar(static_cast<float>(v));
      return id;
    };
    const std::string c_half = constant("__c_half", 0.5);
    const std::string c_one = constant("__c_one", 1.0);
    const std::string c1 = constant("__c1", params.c1);
    const std::string c2 = constant("__c2", params.c2);

    std::vector<Node> seq;
    auto emit = [&](const char* id_suffix, OpKind op, std::vector<std::string> inputs,
                    std::string output) -> Node& {
      Node node{ids.fresh(n.id + id_suffix), op, {}, std::move(inputs), {std::move(output)}};
      seq.push_back(std::move(node));
      return seq.back();
    };
    auto tensor_id = [&](const char* suffix) { return ids.fresh(n.id + suffix); };

    std::string z = x;
    if (variant == GeluVariant::Stable) {
      const std::string c_clip = constant("__c_clip", params.clip);
      const std::string c_negclip = constant("__c_negclip", -params.clip);
      const std::string clipped_hi = tensor_id("__clip_hi");
      emit("__clip_min", OpKind::Minimum, {x, c_clip}, clipped_hi);
      z = tensor_id("__clipped");
      emit("__clip_max", OpKind::Maximum, {clipped_hi, c_negclip}, z);
    }

    const std::string sq = tensor_id("__sq");
    emit("__square", OpKind::Mul, {z, z}, sq);
    const std::string cube = tensor_id("__cube");
    emit("__cube", OpKind::Mul, {sq, z}, cube).attrs.trace_tag = "cube";
    const std::string scaled_cube = tensor_id("__scaled_cube");
    emit("__scale_cube", OpKind::Mul, {cube, c2}, scaled_cube);
    const std::string poly = tensor_id("__poly");
    emit("__poly", OpKind::Add, {z, scaled_cube}, poly).attrs.trace_tag = "polynomial";
    const std::string targ = tensor_id("__tanh_arg");
    emit("__tanh_arg", OpKind::Mul, {poly, c1}, targ).attrs.trace_tag = "tanh_arg";
    const std::string th = tensor_id("__tanh");
    emit("__tanh", OpKind::Tanh, {targ}, th);
    const std::string one_plus = tensor_id("__one_plus");
    emit("__one_plus", OpKind::Add, {th, c_one}, one_plus);
    const std::string half_x = tensor_id("__half_x");
    emit("__half_x", OpKind::Mul, {x, c_half}, half_x);
    emit("__combine", OpKind::Mul, {half_x, one_plus}, final_out);

    report.removed_nodes.push_back(n.id);
    for (Node& node : seq) {
      report.added_nodes.push_back(node.id);
      rewritten.push_back(std::move(node));
    }
    out.tensors.erase(final_out);
  }
  out.nodes = std::move(rewritten);
  prune_orphan_initializers(out);
  out = infer_shapes(out);
  report.notes["lowered"] = std::to_string(report.removed_nodes.size());
  return {std::move(out), std::move(report)};
}

// Converter-style baseline: composites expanded with their naive lowerings,
// FullyConnected nodes left alone. This is the "before" graph a stock
// conversion pipeline would hand to the delegate.
inline Graph naive_lowering(const Graph& g) {
  Graph cur = g;
  bool has_gn = false, has_gelu = false;
  for (const Node& n : cur.nodes) {
    has_gn |= n.op == OpKind::GroupNorm;
    has_gelu |= n.op == OpKind::Gelu;
  }
  if (has_gn) cur = lower_groupnorm(cur, GroupNormVariant::Naive).first;
  if (has_gelu) cur = lower_gelu(cur, GeluVariant::Naive).first;
  return cur;
}

struct PipelineResult {
  Graph graph;
  std::vector<PassReport> reports;
};

// The full deployment flow: broadcast-free GroupNorm, stable GELU,
// FullyConnected conversion, then serialization of every Conv2D the profile
// rejects (skipped with a note when no factor can help). Passes that change
// nothing contribute no report.
inline PipelineResult run_pipeline(const Graph& graph, const CapabilityProfile& profile,
                                   const CostModel& cost = {}, const GeluParams& params = {}) {
  require_valid(graph, "run_pipeline");
  PipelineResult result;
  Graph cur = infer_shapes(graph);

  auto apply = [&](std::pair<Graph, PassReport> outcome) {
    if (outcome.second.changed()) result.reports.push_back(std::move(outcome.second));
    cur = std::move(outcome.first);
    require_valid(cur, result.reports.empty() ? "run_pipeline" : result.reports.back().pass_name);
  };

  apply(lower_groupnorm(cur, GroupNormVariant::BroadcastFree));
  apply(lower_gelu(cur, GeluVariant::Stable, params));
  apply(fc_to_conv(cur));

  std::vector<std::string> failing;
  for (const Node& n : cur.nodes) {
    if (n.op == OpKind::Conv2D && !admit(cur, n, profile).admitted) failing.push_back(n.id);
  }
  for (const std::string& id : failing) {
    SerializationChoice choice;
    try {
      choice = choose_serialization(cur, id, profile, cost);
    } catch (const PassError&) {
      PassReport note;
      note.pass_name = "conv_serialization";
      note.notes["node"] = id;
      note.notes["infeasible"] = "no serialization factor enables delegation";
      result.reports.push_back(std::move(note));
      continue;
    }
    auto outcome = conv_serialize(cur, id, choice);
    outcome.second.notes["chosen"] = serial_dim_name(choice.dim);
    apply(std::move(outcome));
  }

  result.graph = std::move(cur);
  return result;
}

}  // namespace squeezepass
