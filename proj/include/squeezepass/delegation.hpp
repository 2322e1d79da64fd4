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

// Delegate partition simulation. A CapabilityProfile declares what an
// accelerator runtime admits; partition() assigns each node to the device
// or the CPU and tallies the tensors crossing the boundary. The cost model
// is abstract (kernel-call overhead, MACs, activation I/O, transfer bytes)
// and is calibrated to reproduce orderings, not wall-clock times.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "squeezepass/graph.hpp"

namespace squeezepass {

struct CapabilityProfile {
  std::string name;
  std::set<std::string> supported_ops;
  int max_rank = 4;
  std::optional<std::int64_t> max_io_elements;  // nullopt = unlimited
  bool broadcast_to_supported = false;
};

// The activation-size budget models the delegate's per-kernel workspace
// limit, so it is enforced on the weight-bearing kernel ops. Data-movement
// and elementwise kernels stream through tensors of any size: converting a
// failing FullyConnected into Reshape-Conv2D-Reshape, or splitting one with
// Split/Add, must not trip the budget on the wrapper ops it introduces.
inline bool io_budget_applies(OpKind k) {
  return k == OpKind::Conv2D || k == OpKind::FullyConnected;
}

// Activation I/O element total: non-initializer inputs plus outputs.
// Requires a shape-inferred graph.
inline std::int64_t node_io_elements(const Graph& g, const Node& n) {
  std::int64_t total = 0;
  for (const std::string& in : n.inputs)
    if (!g.is_initializer(in)) total += element_count(g.tensor_info(in).shape);
  for (const std::string& out : n.outputs) total += element_count(g.tensor_info(out).shape);
  return total;
}

// Multiply-accumulate proxy: Conv2D counts out_elements * kh * kw * Cin,
// FullyConnected out_elements * Cin, elementwise ops their output size,
// reductions (Mean, composite GroupNorm) their input size, and pure data
// movement counts zero.
inline std::int64_t node_macs(const Graph& g, const Node& n) {
  switch (n.op) {
    case OpKind::Conv2D: {
      const Tensor& w = g.initializers.at(n.attrs.weight);
      return element_count(g.tensor_info(n.outputs[0]).shape) / w.shape[3] *
             (w.shape[0] * w.shape[1] * w.shape[2] * w.shape[3]);
    }
    case OpKind::FullyConnected: {
      const Tensor& w = g.initializers.at(n.attrs.weight);
      return element_count(g.tensor_info(n.outputs[0]).shape) * w.shape[0];
    }
    case OpKind::Mean:
    case OpKind::GroupNorm:
      return element_count(g.tensor_info(n.inputs[0]).shape);
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
    case OpKind::SquaredDifference:
    case OpKind::Minimum:
    case OpKind::Maximum:
    case OpKind::Rsqrt:
    case OpKind::Tanh:
    case OpKind::Gelu:
      return element_count(g.tensor_info(n.outputs[0]).shape);
    case OpKind::Reshape:
    case OpKind::Concat:
    case OpKind::Split:
    case OpKind::BroadcastTo:
      return 0;
  }
  return 0;
}

struct Admission {
  bool admitted = false;
  std::string reason;  // empty when admitted
};

// Admission under a profile: the op kind must be supported (BroadcastTo
// additionally gated by its flag), every non-initializer input and output
// rank must be within max_rank, and for kernel ops the activation I/O
// element total must be strictly below the budget.
inline Admission admit(const Graph& g, const Node& n, const CapabilityProfile& profile) {
  const std::string kind = op_name(n.op);
  if (n.op == OpKind::BroadcastTo && !profile.broadcast_to_supported)
    return {false, "unsupported op: BroadcastTo"};
  if (!profile.supported_ops.count(kind)) return {false, "unsupported op: " + kind};
  auto rank_of = [&](const std::string& id) {
    return static_cast<int>(g.tensor_info(id).shape.size());
  };
  for (const std::string& in : n.inputs) {
    if (g.is_initializer(in)) continue;
    if (rank_of(in) > profile.max_rank)
      return {false, "rank " + std::to_string(rank_of(in)) + " exceeds max rank " +
                         std::to_string(profile.max_rank)};
  }
  for (const std::string& out : n.outputs) {
    if (rank_of(out) > profile.max_rank)
      return {false, "rank " + std::to_string(rank_of(out)) + " exceeds max rank " +
                         std::to_string(profile.max_rank)};
  }
  if (profile.max_io_elements && io_budget_applies(n.op)) {
    const std::int64_t io = node_io_elements(g, n);
    if (io >= *profile.max_io_elements)
      return {false, "io budget: " + std::to_string(io) + " >= " +
                         std::to_string(*profile.max_io_elements)};
  }
  return {true, ""};
}

struct NodeAssignment {
  std::string node_id;
  bool device = false;
  std::string reason;  // rejection reason when on the CPU
};

struct Segment {
  bool device = false;
  std::vector<std::string> node_ids;
};

struct PartitionReport {
  std::string profile_name;
  std::vector<NodeAssignment> assignments;  // in topological order
  std::vector<Segment> segments;            // maximal same-assignment runs
  std::int64_t transitions = 0;             // edges whose endpoints differ
  std::int64_t transferred_elements = 0;    // crossing tensors, counted once
  bool complete = false;                    // no node fell back to the CPU
};

inline PartitionReport partition(const Graph& graph, const CapabilityProfile& profile) {
  const Graph g = infer_shapes(graph);
  PartitionReport rep;
  rep.profile_name = profile.name;

  std::map<std::string, bool> on_device;
  for (const Node& n : g.nodes) {
    const Admission a = admit(g, n, profile);
    rep.assignments.push_back({n.id, a.admitted, a.reason});
    on_device[n.id] = a.admitted;
    if (rep.segments.empty() || rep.segments.back().device != a.admitted)
      rep.segments.push_back({a.admitted, {}});
    rep.segments.back().node_ids.push_back(n.id);
  }
  rep.complete = true;
  for (const NodeAssignment& a : rep.assignments)
    if (!a.device) rep.complete = false;

  // Producer assignment per tensor; graph inputs and outputs do not count
  // as crossings (the host boundary is inherent).
  std::map<std::string, bool> producer;
  for (const Node& n : g.nodes)
    for (const std::string& out : n.outputs) producer[out] = on_device[n.id];
  for (const Node& n : g.nodes) {
    for (const std::string& in : n.inputs) {
      auto it = producer.find(in);
      if (it == producer.end()) continue;  // graph input or initializer
      if (it->second != on_device[n.id]) ++rep.transitions;
    }
  }
  std::set<std::string> crossed;
  for (const Node& n : g.nodes) {
    for (const std::string& in : n.inputs) {
      auto it = producer.find(in);
      if (it == producer.end()) continue;
      if (it->second != on_device[n.id] && crossed.insert(in).second)
        rep.transferred_elements += element_count(g.tensor_info(in).shape);
    }
  }
  return rep;
}

struct CostModel {
  double alpha = 1e5;   // per kernel call
  double beta = 1.0;    // per MAC
  double gamma = 0.1;   // per activation I/O element
  double delta = 10.0;  // per element transferred between CPU and device
};

// Abstract time units: sum over nodes of alpha + beta*MACs + gamma*io,
// plus delta * transferred_elements from the partition report.
inline double estimate_cost(const Graph& graph, const PartitionReport& report,
                            const CostModel& cost) {
  const Graph g = infer_shapes(graph);
  double total = 0.0;
  for (const Node& n : g.nodes) {
    total += cost.alpha;
    total += cost.beta * static_cast<double>(node_macs(g, n));
    total += cost.gamma * static_cast<double>(node_io_elements(g, n));
  }
  total += cost.delta * static_cast<double>(report.transferred_elements);
  return total;
}

inline CapabilityProfile profile_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("profile: top level must be an object");
  CapabilityProfile p;
  if (j.contains("name")) p.name = j["name"].get<std::string>();
  if (!j.contains("supported_ops") || !j["supported_ops"].is_array() ||
      j["supported_ops"].empty())
    throw ValidationError("profile: `supported_ops` must be a non-empty array");
  for (const auto& op : j["supported_ops"]) p.supported_ops.insert(op.get<std::string>());
  if (j.contains("max_rank")) {
    p.max_rank = j["max_rank"].get<int>();
    if (p.max_rank < 1) throw ValidationError("profile: max_rank must be >= 1");
  }
  if (j.contains("max_io_elements") && !j["max_io_elements"].is_null())
    p.max_io_elements = j["max_io_elements"].get<std::int64_t>();
  if (j.contains("broadcast_to_supported"))
    p.broadcast_to_supported = j["broadcast_to_supported"].get<bool>();
  return p;
}

inline nlohmann::json profile_to_json(const CapabilityProfile& p) {
  nlohmann::json j;
  j["name"] = p.name;
  j["supported_ops"] = p.supported_ops;
  j["max_rank"] = p.max_rank;
  if (p.max_io_elements) j["max_io_elements"] = *p.max_io_elements;
  j["broadcast_to_supported"] = p.broadcast_to_supported;
  return j;
}

inline CapabilityProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open profile '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("profile: invalid JSON: ") + e.what());
  }
  return profile_from_json(j);
}

// The delegate model shipped with the repository: every op the lowered
// graphs use, rank at most 4, a strict two-mebi-element activation budget,
// and no BroadcastTo.
inline CapabilityProfile mobile_gpu_profile() {
  CapabilityProfile p;
  p.name = "mobile-gpu";
  p.supported_ops = {"Add",  "Concat",  "Conv2D", "FullyConnected", "Maximum",
                     "Mean", "Minimum", "Mul",    "Reshape",        "Rsqrt",
                     "Split", "SquaredDifference", "Sub", "Tanh"};
  p.max_rank = 4;
  p.max_io_elements = 2097152;  // 2^21, strict
  p.broadcast_to_supported = false;
  return p;
}

}  // namespace squeezepass
