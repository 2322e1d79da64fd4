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

// Tensor-program IR. Graphs are DAGs stored in topological order, all in
// NHWC layout. Weight-like constants live in `initializers` and are wired to
// nodes through named attribute references (weight/bias/gamma/beta); node
// `inputs` may also name initializers directly (e.g. added bias terms).
// GELU and GroupNorm are composite markers: they carry no lowering and are
// expanded by rewrite passes.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "squeezepass/error.hpp"
#include "squeezepass/tensor.hpp"

namespace squeezepass {

enum class OpKind {
  FullyConnected,
  Conv2D,
  Reshape,
  Mean,
  SquaredDifference,
  Add,
  Sub,
  Mul,
  Rsqrt,
  Tanh,
  Minimum,
  Maximum,
  Concat,
  Split,
  BroadcastTo,
  Gelu,       // composite marker
  GroupNorm,  // composite marker
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::FullyConnected: return "FullyConnected";
    case OpKind::Conv2D: return "Conv2D";
    case OpKind::Reshape: return "Reshape";
    case OpKind::Mean: return "Mean";
    case OpKind::SquaredDifference: return "SquaredDifference";
    case OpKind::Add: return "Add";
    case OpKind::Sub: return "Sub";
    case OpKind::Mul: return "Mul";
    case OpKind::Rsqrt: return "Rsqrt";
    case OpKind::Tanh: return "Tanh";
    case OpKind::Minimum: return "Minimum";
    case OpKind::Maximum: return "Maximum";
    case OpKind::Concat: return "Concat";
    case OpKind::Split: return "Split";
    case OpKind::BroadcastTo: return "BroadcastTo";
    case OpKind::Gelu: return "GELU";
    case OpKind::GroupNorm: return "GroupNorm";
  }
  return "?";
}

inline bool op_from_name(const std::string& s, OpKind* out) {
  static const std::map<std::string, OpKind> table = {
      {"FullyConnected", OpKind::FullyConnected},
      {"Conv2D", OpKind::Conv2D},
      {"Reshape", OpKind::Reshape},
      {"Mean", OpKind::Mean},
      {"SquaredDifference", OpKind::SquaredDifference},
      {"Add", OpKind::Add},
      {"Sub", OpKind::Sub},
      {"Mul", OpKind::Mul},
      {"Rsqrt", OpKind::Rsqrt},
      {"Tanh", OpKind::Tanh},
      {"Minimum", OpKind::Minimum},
      {"Maximum", OpKind::Maximum},
      {"Concat", OpKind::Concat},
      {"Split", OpKind::Split},
      {"BroadcastTo", OpKind::BroadcastTo},
      {"GELU", OpKind::Gelu},
      {"GroupNorm", OpKind::GroupNorm},
  };
  auto it = table.find(s);
  if (it == table.end()) return false;
  *out = it->second;
  return true;
}

inline bool is_composite(OpKind k) { return k == OpKind::Gelu || k == OpKind::GroupNorm; }

inline bool is_binary_elementwise(OpKind k) {
  switch (k) {
    case OpKind::SquaredDifference:
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
    case OpKind::Minimum:
    case OpKind::Maximum:
      return true;
    default:
      return false;
  }
}

inline bool is_unary_elementwise(OpKind k) {
  return k == OpKind::Rsqrt || k == OpKind::Tanh || k == OpKind::Gelu;
}

enum class Padding { Same, Valid };

inline const char* padding_name(Padding p) { return p == Padding::Same ? "SAME" : "VALID"; }

// Per-kind attributes; only the fields relevant to a node's kind are used.
struct Attrs {
  std::string weight;                       // FullyConnected, Conv2D
  std::string bias;                         // FullyConnected, Conv2D ("" = none)
  std::array<std::int64_t, 2> stride{1, 1}; // Conv2D (sh, sw)
  Padding padding = Padding::Valid;         // Conv2D
  Shape target_shape;                       // Reshape, BroadcastTo
  std::vector<std::int64_t> axes;           // Mean
  bool keep_dims = false;                   // Mean
  std::int64_t axis = 0;                    // Concat, Split
  std::int64_t parts = 0;                   // Split
  std::int64_t groups = 0;                  // GroupNorm
  double epsilon = 0.0;                     // GroupNorm
  std::string gamma;                        // GroupNorm
  std::string beta;                         // GroupNorm
  std::string trace_tag;                    // interpreter label for traced intermediates

  friend bool operator==(const Attrs&, const Attrs&) = default;
};

struct Node {
  std::string id;
  OpKind op = OpKind::Add;
  Attrs attrs;
  std::vector<std::string> inputs;   // tensor ids (activations or initializers)
  std::vector<std::string> outputs;  // tensor ids

  friend bool operator==(const Node&, const Node&) = default;
};

struct TensorInfo {
  Shape shape;
  DType dtype = DType::F32;

  friend bool operator==(const TensorInfo&, const TensorInfo&) = default;
};

struct Graph {
  std::vector<Node> nodes;                    // stored order is topological
  std::map<std::string, TensorInfo> tensors;  // declared and inferred shapes
  std::map<std::string, Tensor> initializers;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  bool is_initializer(const std::string& id) const { return initializers.count(id) != 0; }

  const Node* find_node(const std::string& id) const {
    for (const Node& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }
  Node* find_node(const std::string& id) {
    for (Node& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }

  const TensorInfo& tensor_info(const std::string& id) const {
    auto it = tensors.find(id);
    if (it == tensors.end()) throw Error("no shape information for tensor '" + id + "'");
    return it->second;
  }

  friend bool operator==(const Graph&, const Graph&) = default;
};

// Initializer ids referenced through a node's attributes, in a fixed order.
inline std::vector<std::string> attr_refs(const Node& n) {
  std::vector<std::string> refs;
  for (const std::string* s : {&n.attrs.weight, &n.attrs.bias, &n.attrs.gamma, &n.attrs.beta})
    if (!s->empty()) refs.push_back(*s);
  return refs;
}

struct Diagnostic {
  std::string where;  // node id or tensor id
  std::string message;
};

namespace detail {

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  Shape out(std::max(a.size(), b.size()), 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::int64_t da = i < out.size() - a.size() ? 1 : a[i - (out.size() - a.size())];
    const std::int64_t db = i < out.size() - b.size() ? 1 : b[i - (out.size() - b.size())];
    if (da == db || da == 1 || db == 1) {
      out[i] = std::max(da, db);
    } else {
      throw Error("shapes are not broadcast-compatible");
    }
  }
  return out;
}

// SAME: out = ceil(in / stride); VALID: out = floor((in - k) / stride) + 1.
inline std::int64_t conv_out_dim(std::int64_t in, std::int64_t k, std::int64_t stride,
                                 Padding padding) {
  if (padding == Padding::Same) return (in + stride - 1) / stride;
  if (in < k) throw Error("VALID convolution window exceeds the input extent");
  return (in - k) / stride + 1;
}

}  // namespace detail

// Shape/dtype inference for one node. `info` resolves an id to its (possibly
// already inferred) TensorInfo. Throws Error on any inconsistency.
template <typename Lookup>
std::vector<TensorInfo> infer_node(const Graph& g, const Node& n, Lookup&& info) {
  auto expect_outputs = [&](std::size_t want) {
    if (n.outputs.size() != want)
      throw Error(std::string(op_name(n.op)) + " expects " + std::to_string(want) +
                  " output(s), got " + std::to_string(n.outputs.size()));
  };
  auto expect_inputs = [&](std::size_t want) {
    if (n.inputs.size() != want)
      throw Error(std::string(op_name(n.op)) + " expects " + std::to_string(want) +
                  " input(s), got " + std::to_string(n.inputs.size()));
  };
  auto init = [&](const std::string& id) -> const Tensor& {
    auto it = g.initializers.find(id);
    if (it == g.initializers.end())
      throw Error("attribute reference '" + id + "' is not an initializer");
    return it->second;
  };

  switch (n.op) {
    case OpKind::FullyConnected: {
      expect_inputs(1);
      expect_outputs(1);
      const TensorInfo in = info(n.inputs[0]);
      if (in.shape.size() != 2 && in.shape.size() != 3)
        throw Error("FullyConnected input must be rank 2 or 3");
      if (n.attrs.weight.empty()) throw Error("FullyConnected needs a weight reference");
      const Tensor& w = init(n.attrs.weight);
      if (w.rank() != 2) throw Error("FullyConnected weight must be [Cin, Cout]");
      if (in.shape.back() != w.shape[0])
        throw Error("FullyConnected input channels do not match the weight");
      if (!n.attrs.bias.empty()) {
        const Tensor& b = init(n.attrs.bias);
        if (b.shape != Shape{w.shape[1]}) throw Error("FullyConnected bias must be [Cout]");
      }
      Shape out = in.shape;
      out.back() = w.shape[1];
      return {{out, in.dtype}};
    }
    case OpKind::Conv2D: {
      expect_inputs(1);
      expect_outputs(1);
      const TensorInfo in = info(n.inputs[0]);
      if (in.shape.size() != 4) throw Error("Conv2D input must be NHWC rank 4");
      if (n.attrs.weight.empty()) throw Error("Conv2D needs a weight reference");
      const Tensor& w = init(n.attrs.weight);
      if (w.rank() != 4) throw Error("Conv2D weight must be [kh, kw, Cin, Cout]");
      if (in.shape[3] != w.shape[2])
        throw Error("Conv2D input channels do not match the kernel");
      if (n.attrs.stride[0] <= 0 || n.attrs.stride[1] <= 0)
        throw Error("Conv2D stride must be positive");
      if (!n.attrs.bias.empty()) {
        const Tensor& b = init(n.attrs.bias);
        if (b.shape != Shape{w.shape[3]}) throw Error("Conv2D bias must be [Cout]");
      }
      const std::int64_t oh =
          detail::conv_out_dim(in.shape[1], w.shape[0], n.attrs.stride[0], n.attrs.padding);
      const std::int64_t ow =
          detail::conv_out_dim(in.shape[2], w.shape[1], n.attrs.stride[1], n.attrs.padding);
      return {{Shape{in.shape[0], oh, ow, w.shape[3]}, in.dtype}};
    }
    case OpKind::Reshape: {
      expect_inputs(1);
      expect_outputs(1);
      const TensorInfo in = info(n.inputs[0]);
      check_shape(n.attrs.target_shape);
      if (element_count(in.shape) != element_count(n.attrs.target_shape))
        throw Error("Reshape must conserve the element count");
      return {{n.attrs.target_shape, in.dtype}};
    }
    case OpKind::Mean: {
      expect_inputs(1);
      expect_outputs(1);
      const TensorInfo in = info(n.inputs[0]);
      if (n.attrs.axes.empty()) throw Error("Mean needs at least one axis");
      std::set<std::int64_t> axes;
      for (auto a : n.attrs.axes) {
        if (a < 0 || a >= static_cast<std::int64_t>(in.shape.size()))
          throw Error("Mean axis out of range");
        if (!axes.insert(a).second) throw Error("Mean axes must be distinct");
      }
      Shape out;
      for (std::size_t i = 0; i < in.shape.size(); ++i) {
        if (axes.count(static_cast<std::int64_t>(i))) {
          if (n.attrs.keep_dims) out.push_back(1);
        } else {
          out.push_back(in.shape[i]);
        }
      }
      if (out.empty()) out.push_back(1);  // full reduction collapses to [1]
      return {{out, in.dtype}};
    }
    case OpKind::SquaredDifference:
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
    case OpKind::Minimum:
    case OpKind::Maximum: {
      expect_inputs(2);
      expect_outputs(1);
      const TensorInfo a = info(n.inputs[0]);
      const TensorInfo b = info(n.inputs[1]);
      if (a.dtype != b.dtype)
        throw Error(std::string(op_name(n.op)) + " operands must share a dtype");
      return {{detail::broadcast_shape(a.shape, b.shape), a.dtype}};
    }
    case OpKind::Rsqrt:
    case OpKind::Tanh:
    case OpKind::Gelu: {
      expect_inputs(1);
      expect_outputs(1);
      const TensorInfo in = info(n.inputs[0]);
      return {{in.shape, in.dtype}};
    }
    case OpKind::Concat: {
      if (n.inputs.empty()) throw Error("Concat needs at least one input");
      expect_outputs(1);
      TensorInfo first = info(n.inputs[0]);
      const auto axis = n.attrs.axis;
      if (axis < 0 || axis >= static_cast<std::int64_t>(first.shape.size()))
        throw Error("Concat axis out of range");
      Shape out = first.shape;
      for (std::size_t i = 1; i < n.inputs.size(); ++i) {
        const TensorInfo t = info(n.inputs[i]);
        if (t.dtype != first.dtype) throw Error("Concat operands must share a dtype");
        if (t.shape.size() != first.shape.size())
          throw Error("Concat operands must share a rank");
        for (std::size_t d = 0; d < out.size(); ++d) {
          if (static_cast<std::int64_t>(d) == axis) continue;
          if (t.shape[d] != first.shape[d])
            throw Error("Concat operands differ outside the concat axis");
        }
        out[static_cast<std::size_t>(axis)] += t.shape[static_cast<std::size_t>(axis)];
      }
      return {{out, first.dtype}};
    }
    case OpKind::Split: {
      expect_inputs(1);
      const TensorInfo in = info(n.inputs[0]);
      const auto axis = n.attrs.axis;
      if (axis < 0 || axis >= static_cast<std::int64_t>(in.shape.size()))
        throw Error("Split axis out of range");
      if (n.attrs.parts <= 0) throw Error("Split needs a positive part count");
      if (in.shape[static_cast<std::size_t>(axis)] % n.attrs.parts != 0)
        throw Error("Split axis extent is not divisible by the part count");
      expect_outputs(static_cast<std::size_t>(n.attrs.parts));
      Shape out = in.shape;
      out[static_cast<std::size_t>(axis)] /= n.attrs.parts;
      return std::vector<TensorInfo>(static_cast<std::size_t>(n.attrs.parts),
                                     TensorInfo{out, in.dtype});
    }
    case OpKind::BroadcastTo: {
      expect_inputs(1);
      expect_outputs(1);
      const TensorInfo in = info(n.inputs[0]);
      check_shape(n.attrs.target_shape);
      const Shape& target = n.attrs.target_shape;
      if (in.shape.size() > target.size())
        throw Error("BroadcastTo cannot reduce rank");
      const std::size_t pad = target.size() - in.shape.size();
      for (std::size_t i = 0; i < target.size(); ++i) {
        const std::int64_t d = i < pad ? 1 : in.shape[i - pad];
        if (d != 1 && d != target[i])
          throw Error("BroadcastTo source dimension is neither 1 nor the target");
      }
      return {{target, in.dtype}};
    }
    case OpKind::GroupNorm: {
      expect_inputs(1);
      expect_outputs(1);
      const TensorInfo in = info(n.inputs[0]);
      if (in.shape.size() != 4) throw Error("GroupNorm input must be NHWC rank 4");
      const std::int64_t c = in.shape[3];
      if (n.attrs.groups <= 0 || c % n.attrs.groups != 0)
        throw Error("GroupNorm channels must be divisible by the group count");
      if (n.attrs.gamma.empty() || n.attrs.beta.empty())
        throw Error("GroupNorm needs gamma and beta references");
      const Tensor& gamma = init(n.attrs.gamma);
      const Tensor& beta = init(n.attrs.beta);
      if (gamma.shape != Shape{c} || beta.shape != Shape{c})
        throw Error("GroupNorm gamma/beta must be [C]");
      return {{in.shape, in.dtype}};
    }
  }
  throw Error("unhandled op kind");
}

// Fills in a concrete TensorInfo for every node output, walking the stored
// (topological) order. Declared shapes that disagree with the inferred ones
// raise an Error.
inline Graph infer_shapes(const Graph& g) {
  Graph out = g;
  std::map<std::string, TensorInfo> known;
  for (const auto& [id, t] : g.initializers) {
    const TensorInfo info{t.shape, t.dtype};
    auto declared = out.tensors.find(id);
    if (declared != out.tensors.end() && !(declared->second == info))
      throw Error("initializer '" + id + "' disagrees with its declared shape/dtype");
    out.tensors[id] = info;
    known[id] = info;
  }
  for (const std::string& id : g.inputs) {
    auto it = g.tensors.find(id);
    if (it == g.tensors.end())
      throw Error("graph input '" + id + "' has no declared shape");
    known[id] = it->second;
  }
  auto lookup = [&](const std::string& id) -> TensorInfo {
    auto it = known.find(id);
    if (it == known.end()) throw Error("tensor '" + id + "' is not defined at this point");
    return it->second;
  };
  for (const Node& n : out.nodes) {
    std::vector<TensorInfo> infos;
    try {
      infos = infer_node(out, n, lookup);
    } catch (const Error& e) {
      throw Error("node '" + n.id + "': " + e.what());
    }
    for (std::size_t i = 0; i < n.outputs.size(); ++i) {
      const std::string& id = n.outputs[i];
      auto declared = out.tensors.find(id);
      if (declared != out.tensors.end() && !(declared->second == infos[i]))
        throw Error("node '" + n.id + "': declared shape/dtype of '" + id +
                    "' does not match the inferred one");
      out.tensors[id] = infos[i];
      known[id] = infos[i];
    }
  }
  return out;
}

// Structural checks. Returns one diagnostic per violation; an empty list
// means every Graph invariant holds.
inline std::vector<Diagnostic> validate(const Graph& g) {
  std::vector<Diagnostic> diags;
  auto complain = [&](const std::string& where, const std::string& msg) {
    diags.push_back({where, msg});
  };

  std::set<std::string> node_ids;
  std::set<std::string> defined;  // ids usable as node inputs so far
  for (const auto& [id, t] : g.initializers) {
    defined.insert(id);
    try {
      check_shape(t.shape);
    } catch (const Error& e) {
      complain(id, e.what());
    }
  }
  for (const std::string& id : g.inputs) {
    if (g.is_initializer(id)) complain(id, "graph input is also an initializer");
    auto it = g.tensors.find(id);
    if (it == g.tensors.end()) {
      complain(id, "graph input has no declared shape");
    } else if (it->second.dtype == DType::I8) {
      complain(id, "i8 is reserved for stored weights, not activations");
    }
    defined.insert(id);
  }

  std::map<std::string, TensorInfo> known;
  for (const auto& [id, t] : g.initializers) known[id] = TensorInfo{t.shape, t.dtype};
  for (const std::string& id : g.inputs) {
    auto it = g.tensors.find(id);
    if (it != g.tensors.end()) known[id] = it->second;
  }
  auto lookup = [&](const std::string& id) -> TensorInfo {
    auto it = known.find(id);
    if (it == known.end()) throw Error("tensor '" + id + "' is not defined at this point");
    return it->second;
  };

  for (const Node& n : g.nodes) {
    if (!node_ids.insert(n.id).second) complain(n.id, "duplicate node id");
    for (const std::string& in : n.inputs) {
      if (!defined.count(in))
        complain(n.id, "input '" + in +
                           "' is not a graph input, initializer, or earlier node output "
                           "(cycle or use before definition)");
    }
    for (const std::string& ref : attr_refs(n)) {
      if (!g.is_initializer(ref))
        complain(n.id, "attribute reference '" + ref + "' is not an initializer");
    }
    for (const std::string& in : n.inputs) {
      auto it = known.find(in);
      if (it != known.end() && it->second.dtype == DType::I8)
        complain(n.id, "i8 tensor '" + in + "' used as an arithmetic input");
    }
    bool inferred_ok = true;
    std::vector<TensorInfo> infos;
    try {
      infos = infer_node(g, n, lookup);
    } catch (const Error& e) {
      complain(n.id, e.what());
      inferred_ok = false;
    }
    for (std::size_t i = 0; i < n.outputs.size(); ++i) {
      const std::string& id = n.outputs[i];
      if (g.is_initializer(id)) complain(n.id, "node output '" + id + "' is an initializer");
      if (!defined.insert(id).second)
        complain(n.id, "tensor '" + id + "' is produced more than once");
      if (inferred_ok && i < infos.size()) {
        auto declared = g.tensors.find(id);
        if (declared != g.tensors.end() && !(declared->second == infos[i]))
          complain(n.id, "declared shape/dtype of '" + id + "' does not match the inferred one");
        known[id] = infos[i];
      }
    }
  }

  for (const std::string& id : g.outputs) {
    if (!defined.count(id)) complain(id, "graph output is never produced");
  }

  // Referenced-initializer accounting; orphans are reported so that pruning
  // passes can keep graphs tight.
  std::set<std::string> used;
  for (const Node& n : g.nodes) {
    for (const std::string& in : n.inputs)
      if (g.is_initializer(in)) used.insert(in);
    for (const std::string& ref : attr_refs(n)) used.insert(ref);
  }
  for (const auto& [id, t] : g.initializers) {
    if (!used.count(id)) complain(id, "orphan initializer");
  }
  return diags;
}

inline void prune_orphan_initializers(Graph& g) {
  std::set<std::string> used;
  for (const Node& n : g.nodes) {
    for (const std::string& in : n.inputs)
      if (g.is_initializer(in)) used.insert(in);
    for (const std::string& ref : attr_refs(n)) used.insert(ref);
  }
  for (auto it = g.initializers.begin(); it != g.initializers.end();) {
    if (!used.count(it->first)) {
      g.tensors.erase(it->first);
      it = g.initializers.erase(it);
    } else {
      ++it;
    }
  }
}

struct StructuralSummary {
  int max_rank = 0;
  std::int64_t broadcast_to_count = 0;
  std::int64_t fully_connected_count = 0;
  std::map<std::string, std::int64_t> op_counts;
};

// Structural facts used by pass post-condition tests: the largest tensor
// rank anywhere in the graph, BroadcastTo/FullyConnected node counts, and
// the multiset of op kinds.
inline StructuralSummary structural_predicates(const Graph& g) {
  const Graph inferred = infer_shapes(g);
  StructuralSummary s;
  for (const auto& [id, info] : inferred.tensors)
    s.max_rank = std::max(s.max_rank, static_cast<int>(info.shape.size()));
  for (const auto& [id, t] : inferred.initializers)
    s.max_rank = std::max(s.max_rank, t.rank());
  for (const Node& n : inferred.nodes) {
    s.op_counts[op_name(n.op)] += 1;
    if (n.op == OpKind::BroadcastTo) ++s.broadcast_to_count;
    if (n.op == OpKind::FullyConnected) ++s.fully_connected_count;
  }
  return s;
}

// Throws ValidationError when a graph fails validation; used by operations
// whose precondition is a validated graph.
inline void require_valid(const Graph& g, const std::string& context) {
  const auto diags = validate(g);
  if (!diags.empty()) {
    std::string msg = context + ": graph failed validation:";
    for (const auto& d : diags) msg += "\n  [" + d.where + "] " + d.message;
    throw ValidationError(msg);
  }
}

}  // namespace squeezepass
