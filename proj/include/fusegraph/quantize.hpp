// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fusegraph/graph.hpp"
#include "fusegraph/quant_params.hpp"
#include "fusegraph/tensor.hpp"

namespace fusegraph {

// Activations: asymmetric 8-bit over the full signed range (width 255, offset
// chosen per tensor). Weights: symmetric, z = 0, -128 excluded so negation
// stays in range.
inline constexpr int32_t kActQmin = -128;
inline constexpr int32_t kActQmax = 127;
inline constexpr int32_t kWeightQmin = -127;
inline constexpr int32_t kWeightQmax = 127;

// Manifest overhead per quantized initializer: s, z, qmin, qmax (4 x 4 bytes).
inline constexpr int64_t kQuantParamBytes = 16;

struct QuantTensor {
  Tensor data;  // I8, same element count as the source
  QuantParams qp;
  Shape original_shape;
};

// Per-tensor range estimation for activations, zero-inclusive:
// [lo, hi] = [min(min(x), 0), max(max(x), 0)], s = (qmax-qmin)/(hi-lo),
// z = round(qmin - lo*s) clamped. Degenerate all-zero input -> s=1, z=0.
QuantParams dynamic_qparams(const Tensor& x);

// Symmetric per-tensor weight params: s = qmax / max|w|, z = 0.
QuantParams symmetric_weight_qparams(const Tensor& w);

// q = clamp(round(x*s + z)) with round-half-to-even; x' = (q - z)/s.
QuantTensor quantize(const Tensor& x, const QuantParams& qp);
Tensor dequantize(const QuantTensor& q);

// Total parameter footprint: initializer payload bytes plus the fixed
// per-quantized-tensor parameter overhead.
int64_t parameter_bytes(const Graph& g);

struct SizeReport {
  int64_t float_param_bytes = 0;  // before the pass
  int64_t quant_param_bytes = 0;  // after the pass
  int64_t nodes_quantized = 0;
  std::vector<std::pair<std::string, std::string>> skipped;  // node id, reason

  double ratio() const {
    return float_param_bytes == 0
               ? 1.0
               : static_cast<double>(quant_param_bytes) /
                     static_cast<double>(float_param_bytes);
  }
};

// Rewrites weight-bearing matrix products to their quantized kinds:
// MatMul with a constant weight -> QMatMul (absorbing a following constant
// bias Add), FusedAttention -> QAttention, FusedRelPosAttention ->
// QRelPosAttention. Weights are quantized offline per tensor; biases stay
// F32; convolutions are never rewritten. Activation parameters are estimated
// at run time inside the quantized kernels.
std::pair<Graph, SizeReport> quantize_graph(const Graph& g);

}  // namespace fusegraph
