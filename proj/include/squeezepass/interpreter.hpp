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

// Reference executor. Two modes:
//   F32         — every arithmetic step is rounded to binary32.
//   F16Emulated — graph inputs, weights, every node output, and every
//                 intra-node accumulation step are rounded to binary16.
// Each scalar step is evaluated in binary64 and then rounded to the mode
// precision, which for a single add/sub/mul reproduces the correctly rounded
// result of that precision exactly. Conv2D accumulates per output element
// over (kh outer, kw, then Cin); reductions accumulate in row-major input
// order. Node outputs containing NaN or +-inf are recorded as non-finite
// events, labeled by the node's trace tag when the producing pass set one.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "squeezepass/graph.hpp"
#include "squeezepass/rng.hpp"

namespace squeezepass {

enum class ExecMode { F32, F16Emulated };

inline const char* exec_mode_name(ExecMode m) {
  return m == ExecMode::F32 ? "f32" : "f16";
}

struct NonFiniteEvent {
  std::string node_id;
  std::string label;  // trace tag if set, otherwise the op kind name
};

struct ExecTrace {
  std::map<std::string, Tensor> outputs;  // graph outputs by id
  std::vector<NonFiniteEvent> nonfinite_events;
  std::int64_t peak_intermediate_elements = 0;
};

namespace detail {

struct Rounder {
  ExecMode mode;
  double operator()(double v) const {
    if (mode == ExecMode::F32) return static_cast<double>(static_cast<float>(v));
    return f16_bits_to_double(f16_bits_from_double(v));
  }
};

inline std::vector<std::int64_t> row_major_strides(const Shape& s) {
  std::vector<std::int64_t> strides(s.size());
  std::int64_t acc = 1;
  for (std::size_t i = s.size(); i-- > 0;) {
    strides[i] = acc;
    acc *= s[i];
  }
  return strides;
}

// Strides for reading `src` as if broadcast to `out`; broadcast dimensions
// get stride 0.
inline std::vector<std::int64_t> broadcast_strides(const Shape& src, const Shape& out) {
  const auto src_strides = row_major_strides(src);
  std::vector<std::int64_t> strides(out.size(), 0);
  const std::size_t pad = out.size() - src.size();
  for (std::size_t i = 0; i < src.size(); ++i) {
    strides[pad + i] = (src[i] == 1 && out[pad + i] != 1) ? 0 : src_strides[i];
  }
  return strides;
}

}  // namespace detail

// Executes a validated graph on the given input bindings. Deterministic:
// the same graph and inputs produce bit-identical outputs.
inline ExecTrace execute(const Graph& graph, const std::map<std::string, Tensor>& inputs,
                         ExecMode mode) {
  const Graph g = infer_shapes(graph);
  const detail::Rounder rnd{mode};

  std::map<std::string, std::vector<float>> env;

  for (const std::string& id : g.inputs) {
    auto it = inputs.find(id);
    if (it == inputs.end()) throw Error("missing input tensor '" + id + "'");
    const TensorInfo& want = g.tensor_info(id);
    if (it->second.shape != want.shape)
      throw Error("input '" + id + "' has the wrong shape");
    if (it->second.dtype != want.dtype)
      throw Error("input '" + id + "' has the wrong dtype");
    std::vector<float> vals = it->second.values;
    if (mode == ExecMode::F16Emulated)
      for (float& v : vals) v = round_to_f16(v);
    env[id] = std::move(vals);
  }

  // Weights and constants, dequantized/rounded once per run.
  std::map<std::string, std::vector<float>> consts;
  auto fetch_const = [&](const std::string& id) -> const std::vector<float>& {
    auto hit = consts.find(id);
    if (hit != consts.end()) return hit->second;
    const Tensor& t = g.initializers.at(id);
    std::vector<float> vals;
    if (t.dtype == DType::I8) {
      vals = tensor_cast(t, mode == ExecMode::F16Emulated ? DType::F16 : DType::F32).values;
    } else {
      vals = t.values;
      if (mode == ExecMode::F16Emulated)
        for (float& v : vals) v = round_to_f16(v);
    }
    return consts.emplace(id, std::move(vals)).first->second;
  };

  auto value_of = [&](const std::string& id) -> const std::vector<float>& {
    auto it = env.find(id);
    if (it != env.end()) return it->second;
    if (g.is_initializer(id)) return fetch_const(id);
    throw Error("tensor '" + id + "' has no value at this point");
  };

  // Liveness accounting for the peak intermediate footprint (node outputs
  // only; graph outputs stay live to the end).
  std::map<std::string, int> remaining_uses;
  for (const Node& n : g.nodes)
    for (const std::string& in : n.inputs)
      if (!g.is_initializer(in)) remaining_uses[in] += 1;
  std::set<std::string> keep(g.outputs.begin(), g.outputs.end());
  for (const std::string& id : g.inputs) keep.insert(id);
  std::int64_t live_elements = 0;
  std::int64_t peak_elements = 0;

  ExecTrace trace;

  auto scan_nonfinite = [&](const Node& n, const std::vector<float>& vals) {
    for (float v : vals) {
      if (!std::isfinite(v)) {
        trace.nonfinite_events.push_back(
            {n.id, n.attrs.trace_tag.empty() ? op_name(n.op) : n.attrs.trace_tag});
        return;
      }
    }
  };

  for (const Node& n : g.nodes) {
    const Shape& out_shape = g.tensor_info(n.outputs[0]).shape;
    std::vector<std::vector<float>> results;

    switch (n.op) {
      case OpKind::Conv2D:
      case OpKind::FullyConnected: {
        const std::vector<float>& x = value_of(n.inputs[0]);
        const std::vector<float>& w = fetch_const(n.attrs.weight);
        const std::vector<float>* bias =
            n.attrs.bias.empty() ? nullptr : &fetch_const(n.attrs.bias);
        const Shape in_shape = g.tensor_info(n.inputs[0]).shape;
        const Shape w_shape = g.initializers.at(n.attrs.weight).shape;

        // FullyConnected runs through the same accumulation kernel as a 1x1
        // VALID convolution, so the conversion pass is numerically a no-op.
        std::int64_t batch, oh, ow, kh, kw, cin, cout, ih, iw, sh, sw;
        Padding padding;
        if (n.op == OpKind::Conv2D) {
          batch = in_shape[0];
          ih = in_shape[1];
          iw = in_shape[2];
          cin = in_shape[3];
          kh = w_shape[0];
          kw = w_shape[1];
          cout = w_shape[3];
          oh = out_shape[1];
          ow = out_shape[2];
          sh = n.attrs.stride[0];
          sw = n.attrs.stride[1];
          padding = n.attrs.padding;
        } else {
          batch = 1;
          ih = element_count(in_shape) / in_shape.back();
          iw = 1;
          cin = in_shape.back();
          kh = 1;
          kw = 1;
          cout = w_shape[1];
          oh = ih;
          ow = 1;
          sh = sw = 1;
          padding = Padding::Valid;
        }
        std::int64_t pad_top = 0, pad_left = 0;
        if (padding == Padding::Same) {
          pad_top = std::max<std::int64_t>((oh - 1) * sh + kh - ih, 0) / 2;
          pad_left = std::max<std::int64_t>((ow - 1) * sw + kw - iw, 0) / 2;
        }
        std::vector<float> out(static_cast<std::size_t>(element_count(out_shape)));
        std::size_t o = 0;
        for (std::int64_t b = 0; b < batch; ++b) {
          for (std::int64_t y = 0; y < oh; ++y) {
            for (std::int64_t xo = 0; xo < ow; ++xo) {
              const std::int64_t y0 = y * sh - pad_top;
              const std::int64_t x0 = xo * sw - pad_left;
              for (std::int64_t co = 0; co < cout; ++co) {
                double acc = 0.0;
                for (std::int64_t r = 0; r < kh; ++r) {
                  const std::int64_t yy = y0 + r;
                  if (yy < 0 || yy >= ih) continue;
                  for (std::int64_t c = 0; c < kw; ++c) {
                    const std::int64_t xx = x0 + c;
                    if (xx < 0 || xx >= iw) continue;
                    const std::size_t in_base =
                        static_cast<std::size_t>(((b * ih + yy) * iw + xx) * cin);
                    const std::size_t w_base =
                        static_cast<std::size_t>(((r * kw + c) * cin) * cout + co);
                    for (std::int64_t ci = 0; ci < cin; ++ci) {
                      const double prod =
                          rnd(static_cast<double>(x[in_base + static_cast<std::size_t>(ci)]) *
                              static_cast<double>(w[w_base + static_cast<std::size_t>(ci) *
                                                            static_cast<std::size_t>(cout)]));
                      acc = rnd(acc + prod);
                    }
                  }
                }
                if (bias) acc = rnd(acc + static_cast<double>((*bias)[static_cast<std::size_t>(co)]));
                out[o++] = static_cast<float>(acc);
              }
            }
          }
        }
        results.push_back(std::move(out));
        break;
      }
      case OpKind::Reshape: {
        results.push_back(value_of(n.inputs[0]));
        break;
      }
      case OpKind::Mean: {
        const std::vector<float>& x = value_of(n.inputs[0]);
        const Shape in_shape = g.tensor_info(n.inputs[0]).shape;
        std::set<std::int64_t> axes(n.attrs.axes.begin(), n.attrs.axes.end());
        // Map each input coordinate onto its output slot; accumulation thus
        // follows row-major input order per slot.
        std::vector<std::int64_t> out_stride_for_dim(in_shape.size(), 0);
        {
          std::int64_t acc = 1;
          for (std::size_t i = in_shape.size(); i-- > 0;) {
            if (!axes.count(static_cast<std::int64_t>(i))) {
              out_stride_for_dim[i] = acc;
              acc *= in_shape[i];
            }
          }
        }
        std::int64_t count = 1;
        for (auto a : axes) count *= in_shape[static_cast<std::size_t>(a)];
        std::vector<double> acc(static_cast<std::size_t>(element_count(out_shape)), 0.0);
        std::vector<std::int64_t> coord(in_shape.size(), 0);
        for (std::size_t i = 0; i < x.size(); ++i) {
          std::int64_t slot = 0;
          for (std::size_t d = 0; d < in_shape.size(); ++d) slot += coord[d] * out_stride_for_dim[d];
          acc[static_cast<std::size_t>(slot)] =
              rnd(acc[static_cast<std::size_t>(slot)] + static_cast<double>(x[i]));
          for (std::size_t d = in_shape.size(); d-- > 0;) {
            if (++coord[d] < in_shape[d]) break;
            coord[d] = 0;
          }
        }
        std::vector<float> out(acc.size());
        for (std::size_t i = 0; i < acc.size(); ++i)
          out[i] = static_cast<float>(rnd(acc[i] / static_cast<double>(count)));
        results.push_back(std::move(out));
        break;
      }
      case OpKind::SquaredDifference:
      case OpKind::Add:
      case OpKind::Sub:
      case OpKind::Mul:
      case OpKind::Minimum:
      case OpKind::Maximum: {
        const std::vector<float>& a = value_of(n.inputs[0]);
        const std::vector<float>& b = value_of(n.inputs[1]);
        const Shape a_shape = g.tensor_info(n.inputs[0]).shape;
        const Shape b_shape = g.tensor_info(n.inputs[1]).shape;
        const auto sa = detail::broadcast_strides(a_shape, out_shape);
        const auto sb = detail::broadcast_strides(b_shape, out_shape);
        std::vector<float> out(static_cast<std::size_t>(element_count(out_shape)));
        std::vector<std::int64_t> coord(out_shape.size(), 0);
        const OpKind k = n.op;
        for (std::size_t i = 0; i < out.size(); ++i) {
          std::int64_t ia = 0, ib = 0;
          for (std::size_t d = 0; d < out_shape.size(); ++d) {
            ia += coord[d] * sa[d];
            ib += coord[d] * sb[d];
          }
          const double va = a[static_cast<std::size_t>(ia)];
          const double vb = b[static_cast<std::size_t>(ib)];
          double r;
          switch (k) {
            case OpKind::Add: r = rnd(va + vb); break;
            case OpKind::Sub: r = rnd(va - vb); break;
            case OpKind::Mul: r = rnd(va * vb); break;
            case OpKind::Minimum: r = std::min(va, vb); break;
            case OpKind::Maximum: r = std::max(va, vb); break;
            case OpKind::SquaredDifference: {
              const double d0 = rnd(va - vb);
              r = rnd(d0 * d0);
              break;
            }
            default: r = 0; break;
          }
          out[i] = static_cast<float>(r);
          for (std::size_t d = out_shape.size(); d-- > 0;) {
            if (++coord[d] < out_shape[d]) break;
            coord[d] = 0;
          }
        }
        results.push_back(std::move(out));
        break;
      }
      case OpKind::Rsqrt:
      case OpKind::Tanh:
      case OpKind::Gelu: {
        const std::vector<float>& x = value_of(n.inputs[0]);
        std::vector<float> out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double v = x[i];
          double r;
          if (n.op == OpKind::Rsqrt) {
            r = rnd(1.0 / std::sqrt(v));
          } else if (n.op == OpKind::Tanh) {
            r = rnd(std::tanh(v));
          } else {
            // Exact GELU x * Phi(x): the ground truth for the lowered
            // approximations, evaluated in binary64 and rounded once.
            r = rnd(0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))));
          }
          out[i] = static_cast<float>(r);
        }
        results.push_back(std::move(out));
        break;
      }
      case OpKind::Concat: {
        const auto axis = static_cast<std::size_t>(n.attrs.axis);
        std::int64_t outer = 1, inner = 1;
        for (std::size_t d = 0; d < axis; ++d) outer *= out_shape[d];
        for (std::size_t d = axis + 1; d < out_shape.size(); ++d) inner *= out_shape[d];
        std::vector<float> out(static_cast<std::size_t>(element_count(out_shape)));
        const std::int64_t out_axis = out_shape[axis];
        std::int64_t offset = 0;
        for (const std::string& in_id : n.inputs) {
          const std::vector<float>& src = value_of(in_id);
          const std::int64_t in_axis = g.tensor_info(in_id).shape[axis];
          for (std::int64_t oidx = 0; oidx < outer; ++oidx) {
            for (std::int64_t aidx = 0; aidx < in_axis; ++aidx) {
              const std::size_t src_base = static_cast<std::size_t>((oidx * in_axis + aidx) * inner);
              const std::size_t dst_base =
                  static_cast<std::size_t>((oidx * out_axis + offset + aidx) * inner);
              for (std::int64_t k = 0; k < inner; ++k) out[dst_base + static_cast<std::size_t>(k)] = src[src_base + static_cast<std::size_t>(k)];
            }
          }
          offset += in_axis;
        }
        results.push_back(std::move(out));
        break;
      }
      case OpKind::Split: {
        const std::vector<float>& x = value_of(n.inputs[0]);
        const Shape in_shape = g.tensor_info(n.inputs[0]).shape;
        const auto axis = static_cast<std::size_t>(n.attrs.axis);
        std::int64_t outer = 1, inner = 1;
        for (std::size_t d = 0; d < axis; ++d) outer *= in_shape[d];
        for (std::size_t d = axis + 1; d < in_shape.size(); ++d) inner *= in_shape[d];
        const std::int64_t in_axis = in_shape[axis];
        const std::int64_t part = in_axis / n.attrs.parts;
        for (std::int64_t p = 0; p < n.attrs.parts; ++p) {
          std::vector<float> out(static_cast<std::size_t>(outer * part * inner));
          for (std::int64_t oidx = 0; oidx < outer; ++oidx) {
            for (std::int64_t aidx = 0; aidx < part; ++aidx) {
              const std::size_t src_base =
                  static_cast<std::size_t>((oidx * in_axis + p * part + aidx) * inner);
              const std::size_t dst_base = static_cast<std::size_t>((oidx * part + aidx) * inner);
              for (std::int64_t k = 0; k < inner; ++k) out[dst_base + static_cast<std::size_t>(k)] = x[src_base + static_cast<std::size_t>(k)];
            }
          }
          results.push_back(std::move(out));
        }
        break;
      }
      case OpKind::BroadcastTo: {
        const std::vector<float>& x = value_of(n.inputs[0]);
        const Shape in_shape = g.tensor_info(n.inputs[0]).shape;
        const auto strides = detail::broadcast_strides(in_shape, out_shape);
        std::vector<float> out(static_cast<std::size_t>(element_count(out_shape)));
        std::vector<std::int64_t> coord(out_shape.size(), 0);
        for (std::size_t i = 0; i < out.size(); ++i) {
          std::int64_t ix = 0;
          for (std::size_t d = 0; d < out_shape.size(); ++d) ix += coord[d] * strides[d];
          out[i] = x[static_cast<std::size_t>(ix)];
          for (std::size_t d = out_shape.size(); d-- > 0;) {
            if (++coord[d] < out_shape[d]) break;
            coord[d] = 0;
          }
        }
        results.push_back(std::move(out));
        break;
      }
      case OpKind::GroupNorm: {
        // Composite reference: two-pass mean/variance per (batch, group),
        // then (x - mean) * rsqrt(var + eps) * gamma + beta, with the same
        // per-step rounding and accumulation order the lowered graphs use.
        const std::vector<float>& x = value_of(n.inputs[0]);
        const Shape in_shape = g.tensor_info(n.inputs[0]).shape;
        const std::vector<float>& gamma = fetch_const(n.attrs.gamma);
        const std::vector<float>& beta = fetch_const(n.attrs.beta);
        const std::int64_t batch = in_shape[0], h = in_shape[1], w = in_shape[2], c = in_shape[3];
        const std::int64_t groups = n.attrs.groups;
        const std::int64_t cg = c / groups;
        const double eps = rnd(static_cast<double>(static_cast<float>(n.attrs.epsilon)));
        std::vector<float> out(x.size());
        const std::int64_t spatial = h * w;
        for (std::int64_t b = 0; b < batch; ++b) {
          for (std::int64_t grp = 0; grp < groups; ++grp) {
            const std::int64_t n_elems = spatial * cg;
            double mean = 0.0;
            for (std::int64_t s = 0; s < spatial; ++s) {
              const std::size_t base = static_cast<std::size_t>((b * spatial + s) * c + grp * cg);
              for (std::int64_t k = 0; k < cg; ++k)
                mean = rnd(mean + static_cast<double>(x[base + static_cast<std::size_t>(k)]));
            }
            mean = rnd(mean / static_cast<double>(n_elems));
            double var = 0.0;
            for (std::int64_t s = 0; s < spatial; ++s) {
              const std::size_t base = static_cast<std::size_t>((b * spatial + s) * c + grp * cg);
              for (std::int64_t k = 0; k < cg; ++k) {
                const double d0 = rnd(static_cast<double>(x[base + static_cast<std::size_t>(k)]) - mean);
                var = rnd(var + rnd(d0 * d0));
              }
            }
            var = rnd(var / static_cast<double>(n_elems));
            const double inv = rnd(1.0 / std::sqrt(rnd(var + eps)));
            for (std::int64_t s = 0; s < spatial; ++s) {
              const std::size_t base = static_cast<std::size_t>((b * spatial + s) * c + grp * cg);
              for (std::int64_t k = 0; k < cg; ++k) {
                const std::size_t ci = static_cast<std::size_t>(grp * cg + k);
                double t = rnd(static_cast<double>(x[base + static_cast<std::size_t>(k)]) - mean);
                t = rnd(t * inv);
                t = rnd(t * static_cast<double>(gamma[ci]));
                t = rnd(t + static_cast<double>(beta[ci]));
                out[base + static_cast<std::size_t>(k)] = static_cast<float>(t);
              }
            }
          }
        }
        results.push_back(std::move(out));
        break;
      }
    }

    for (std::size_t i = 0; i < n.outputs.size(); ++i) {
      scan_nonfinite(n, results[i]);
      live_elements += static_cast<std::int64_t>(results[i].size());
      env[n.outputs[i]] = std::move(results[i]);
    }
    peak_elements = std::max(peak_elements, live_elements);
    // `keep` holds graph inputs and outputs, so anything released here is a
    // node output and was counted toward the live footprint.
    for (const std::string& in : n.inputs) {
      if (g.is_initializer(in)) continue;
      auto it = remaining_uses.find(in);
      if (it != remaining_uses.end() && --it->second == 0 && !keep.count(in)) {
        auto ev = env.find(in);
        if (ev != env.end()) {
          live_elements -= static_cast<std::int64_t>(ev->second.size());
          env.erase(ev);
        }
      }
    }
  }

  for (const std::string& id : g.outputs) {
    auto it = env.find(id);
    if (it == env.end()) throw Error("graph output '" + id + "' was not produced");
    const TensorInfo& info = g.tensor_info(id);
    trace.outputs[id] = info.dtype == DType::F16 ? Tensor::f16(info.shape, it->second)
                                                 : Tensor::f32(info.shape, it->second);
  }
  trace.peak_intermediate_elements = peak_elements;
  return trace;
}

struct Tolerance {
  double max_abs = std::numeric_limits<double>::infinity();
  double max_rel = std::numeric_limits<double>::infinity();
};

struct OutputError {
  std::string id;
  double max_abs = 0.0;
  double max_rel = 0.0;
};

struct EquivalenceReport {
  std::vector<OutputError> per_output;
  double max_abs = 0.0;
  double max_rel = 0.0;
  bool pass = false;
};

// Executes both graphs on the same inputs and reports per-output maximum
// absolute error and maximum relative error. The relative denominator is
// max(||ref||_inf, 1e-6) per output tensor, with g1 as the reference.
inline EquivalenceReport compare_graphs(const Graph& g1, const Graph& g2,
                                        const std::map<std::string, Tensor>& inputs,
                                        ExecMode mode, const Tolerance& tol) {
  if (g1.inputs != g2.inputs || g1.outputs != g2.outputs)
    throw Error("compare_graphs: graphs do not share an input/output signature");
  const ExecTrace t1 = execute(g1, inputs, mode);
  const ExecTrace t2 = execute(g2, inputs, mode);
  EquivalenceReport rep;
  for (const std::string& id : g1.outputs) {
    const Tensor& a = t1.outputs.at(id);
    const Tensor& b = t2.outputs.at(id);
    if (a.shape != b.shape) throw Error("compare_graphs: output '" + id + "' changed shape");
    OutputError oe;
    oe.id = id;
    double ref_norm = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      const double d = std::fabs(static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]));
      oe.max_abs = std::max(oe.max_abs, d);
      ref_norm = std::max(ref_norm, std::fabs(static_cast<double>(a.values[i])));
    }
    oe.max_rel = oe.max_abs / std::max(ref_norm, 1e-6);
    rep.max_abs = std::max(rep.max_abs, oe.max_abs);
    rep.max_rel = std::max(rep.max_rel, oe.max_rel);
    rep.per_output.push_back(std::move(oe));
  }
  rep.pass = rep.max_abs <= tol.max_abs && rep.max_rel <= tol.max_rel;
  return rep;
}

// Deterministic input bindings: per graph input, a stream keyed by the
// input's id XORed into the seed, uniform in [lo, hi].
inline std::map<std::string, Tensor> seeded_inputs(const Graph& g, std::uint64_t seed,
                                                   float lo = -1.0f, float hi = 1.0f) {
  std::map<std::string, Tensor> bindings;
  for (const std::string& id : g.inputs) {
    const TensorInfo& info = g.tensor_info(id);
    Lcg rng(seed, "input:" + id);
    std::vector<float> vals(static_cast<std::size_t>(element_count(info.shape)));
    for (float& v : vals) v = rng.next_in(lo, hi);
    bindings[id] = info.dtype == DType::F16 ? Tensor::f16(info.shape, std::move(vals))
                                            : Tensor::f32(info.shape, std::move(vals));
  }
  return bindings;
}

}  // namespace squeezepass
