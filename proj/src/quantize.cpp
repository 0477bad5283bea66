// SPDX-License-Identifier: Apache-2.0

#include "fusegraph/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fusegraph {

QuantParams dynamic_qparams(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("cannot derive quant params from empty tensor");
  if (!all_finite(x)) throw NumericError("non-finite values in quantization input");
  float lo = 0.0f, hi = 0.0f;  // zero-inclusive range keeps 0.0 exactly representable
  for (float v : x.f32()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  QuantParams qp;
  qp.qmin = kActQmin;
  qp.qmax = kActQmax;
  if (hi == lo) {  // all zero
    qp.s = 1.0f;
    qp.z = 0;
    return qp;
  }
  qp.s = static_cast<float>(qp.qmax - qp.qmin) / (hi - lo);
  const float z = std::nearbyint(static_cast<float>(qp.qmin) - lo * qp.s);
  qp.z = static_cast<int32_t>(std::clamp(z, static_cast<float>(qp.qmin),
                                         static_cast<float>(qp.qmax)));
  return qp;
}

QuantParams symmetric_weight_qparams(const Tensor& w) {
  if (w.numel() == 0) throw ShapeError("cannot derive quant params from empty tensor");
  if (!all_finite(w)) throw NumericError("non-finite values in quantization input");
  float mx = 0.0f;
  for (float v : w.f32()) mx = std::max(mx, std::abs(v));
  QuantParams qp;
  qp.qmin = kWeightQmin;
  qp.qmax = kWeightQmax;
  qp.z = 0;
  qp.s = mx == 0.0f ? 1.0f : static_cast<float>(qp.qmax) / mx;
  return qp;
}

QuantTensor quantize(const Tensor& x, const QuantParams& qp) {
  QuantTensor out;
  out.qp = qp;
  out.original_shape = x.shape();
  out.data = Tensor::zeros(DType::I8, x.shape());
  auto q = out.data.i8();
  const auto in = x.f32();
  const float lo = static_cast<float>(qp.qmin);
  const float hi = static_cast<float>(qp.qmax);
  for (size_t i = 0; i < in.size(); ++i) {
    const float v = std::nearbyint(in[i] * qp.s + static_cast<float>(qp.z));
    q[i] = static_cast<int8_t>(std::clamp(v, lo, hi));
  }
  return out;
}

Tensor dequantize(const QuantTensor& q) {
  Tensor out = Tensor::zeros(DType::F32, q.original_shape);
  auto o = out.f32();
  const auto in = q.data.i8();
  const float inv = 1.0f / q.qp.s;
  for (size_t i = 0; i < in.size(); ++i) {
    o[i] = (static_cast<float>(in[i]) - static_cast<float>(q.qp.z)) * inv;
  }
  return out;
}

int64_t parameter_bytes(const Graph& g) {
  int64_t total = 0;
  for (const auto& [name, t] : g.initializers) {
    (void)name;
    total += t.byte_size();
  }
  total += kQuantParamBytes * static_cast<int64_t>(g.quant_params.size());
  return total;
}

namespace {

// Quantizes initializer `name` in place (F32 -> I8 payload + params entry).
void quantize_initializer(Graph& g, const std::string& name) {
  const Tensor& w = g.initializer(name);
  const QuantParams qp = symmetric_weight_qparams(w);
  QuantTensor qt = quantize(w, qp);
  g.initializers[name] = std::move(qt.data);
  g.quant_params[name] = qp;
}

bool is_plain_initializer(const Graph& g, const std::string& name) {
  return g.has_initializer(name) && g.quant_params.count(name) == 0 &&
         g.initializer(name).dtype() == DType::F32;
}

}  // namespace

std::pair<Graph, SizeReport> quantize_graph(const Graph& g) {
  SizeReport report;
  report.float_param_bytes = parameter_bytes(g);

  Graph out = g;
  const auto consumers = build_consumers(g);
  const std::set<std::string> graph_outputs(g.outputs.begin(), g.outputs.end());
  auto consumer_count = [&](const std::string& value) -> size_t {
    const auto it = consumers.find(value);
    return it == consumers.end() ? 0 : it->second.size();
  };

  std::set<std::string> absorbed;  // ids of bias Adds folded into a QMatMul
  std::vector<Node> nodes;
  nodes.reserve(out.nodes.size());

  for (const Node& n : out.nodes) {
    if (absorbed.count(n.id) > 0) continue;
    switch (n.kind) {
      case OpKind::MatMul: {
        const std::string& x = n.inputs[0];
        const std::string& w = n.inputs[1];
        if (out.has_initializer(x)) {
          report.skipped.emplace_back(n.id, "left operand is constant");
          nodes.push_back(n);
          continue;
        }
        if (!is_plain_initializer(out, w)) {
          report.skipped.emplace_back(n.id, "no constant f32 weight");
          nodes.push_back(n);
          continue;
        }
        if (out.initializer(w).rank() != 2) {
          report.skipped.emplace_back(n.id, "weight is not a matrix");
          nodes.push_back(n);
          continue;
        }
        if (consumer_count(w) != 1) {
          report.skipped.emplace_back(n.id, "weight shared by multiple nodes");
          nodes.push_back(n);
          continue;
        }
        Node q = n;
        q.kind = OpKind::QMatMul;
        // Fold a following constant bias Add so the float add happens after
        // dequantization inside one kernel.
        const std::string& y = n.outputs[0];
        if (graph_outputs.count(y) == 0 && consumer_count(y) == 1) {
          const Node* next = consumers.at(y)[0];
          if (next->kind == OpKind::Add && next->inputs.size() == 2) {
            const std::string& other =
                next->inputs[0] == y ? next->inputs[1] : next->inputs[0];
            if (is_plain_initializer(out, other) &&
                out.initializer(other).rank() == 1 &&
                out.initializer(other).numel() ==
                    out.initializer(w).dim(1)) {
              q.inputs = {x, w, other};
              q.outputs = next->outputs;
              absorbed.insert(next->id);
            }
          }
        }
        quantize_initializer(out, w);
        report.nodes_quantized++;
        nodes.push_back(std::move(q));
        break;
      }
      case OpKind::FusedAttention: {
        const std::string& w = n.inputs[1];
        if (!is_plain_initializer(out, w) || consumer_count(w) != 1) {
          report.skipped.emplace_back(n.id, "packed weight not exclusively owned");
          nodes.push_back(n);
          continue;
        }
        Node q = n;
        q.kind = OpKind::QAttention;
        quantize_initializer(out, w);
        report.nodes_quantized++;
        nodes.push_back(std::move(q));
        break;
      }
      case OpKind::FusedRelPosAttention: {
        const std::string& w_qkv = n.inputs[1];
        const std::string& w_r = n.inputs[3];
        if (!is_plain_initializer(out, w_qkv) || consumer_count(w_qkv) != 1 ||
            !is_plain_initializer(out, w_r) || consumer_count(w_r) != 1) {
          report.skipped.emplace_back(n.id, "packed weights not exclusively owned");
          nodes.push_back(n);
          continue;
        }
        Node q = n;
        q.kind = OpKind::QRelPosAttention;
        quantize_initializer(out, w_qkv);
        quantize_initializer(out, w_r);
        report.nodes_quantized++;
        nodes.push_back(std::move(q));
        break;
      }
      case OpKind::Conv1D:
        report.skipped.emplace_back(n.id, "convolution kept in float");
        nodes.push_back(n);
        break;
      case OpKind::QMatMul:
      case OpKind::QAttention:
      case OpKind::QRelPosAttention:
        report.skipped.emplace_back(n.id, "already quantized");
        nodes.push_back(n);
        break;
      default:
        nodes.push_back(n);
        break;
    }
  }
  out.nodes = std::move(nodes);
  out.value_info.clear();
  report.quant_param_bytes = parameter_bytes(out);
  return {std::move(out), report};
}

}  // namespace fusegraph
