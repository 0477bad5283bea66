// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fusegraph/fusion.hpp"
#include "fusegraph/graph.hpp"
#include "fusegraph/quantize.hpp"
#include "fusegraph/tensor.hpp"

namespace fusegraph {

struct WorkerPolicy {
  int max_workers = 1;

  static WorkerPolicy sequential() { return WorkerPolicy{1}; }
  static WorkerPolicy parallel(int workers) {
    if (workers < 1) throw ConfigError("worker count must be >= 1");
    return WorkerPolicy{workers};
  }
};

// Runs fn(c) for c in [0, chunk_count). Chunk boundaries never depend on the
// worker count — worker t takes chunks t, t+W, ... — so any W produces
// bit-identical results; W = 1 runs inline.
void parallel_chunks(int64_t chunk_count, int max_workers,
                     const std::function<void(int64_t)>& fn);

struct RunStats {
  std::map<std::string, double> wall_by_kind;  // seconds, keyed by op name
  double total_seconds = 0.0;
  // High-water mark of live input/intermediate/output tensors. Initializers
  // are parameters, not values, and are excluded.
  int64_t peak_value_bytes = 0;
};

// Reference unfused computation: per-matrix projections, heads sequential.
// Mask, when present, is added to the logits ((L, L) or (H or 1, L, L)).
Tensor attention_forward(const Tensor& x, const AttentionParams& p,
                         const Tensor* mask);

// Packed projection (one (D, 3D) product, integer when p.w_qp is set), then
// per-head evaluation dispatched over up to `heads` workers. Bit-identical
// across worker counts.
Tensor fused_attention_forward(const Tensor& x, const AttentionParams& p,
                               const Tensor* mask, int max_workers = 1);

// out[h][i][j] = bd_flat[h][i][(L-1) + j - i]: maps the relative-offset axis
// of length 2L-1 onto an L x L matrix by pure index arithmetic.
Tensor skew_relative(const Tensor& bd_flat);

// Content term (q + u) k^T plus skewed position term (q + v) (R W_r)^T,
// scaled, softmaxed, applied to v. Heads parallel as in
// fused_attention_forward.
Tensor relpos_attention_forward(const Tensor& x, const RelPosParams& p,
                                const Tensor* mask, int max_workers = 1);

// Dynamic activation quantization, integer accumulation in I32, exact
// dequantization, float bias add.
Tensor qmatmul_forward(const Tensor& x, const Tensor& w_q8, const QuantParams& w_qp,
                       const Tensor* bias, int max_workers = 1);
Tensor qmatmul_forward(const Tensor& x, const QuantTensor& w, const Tensor* bias,
                       int max_workers = 1);

class Session {
 public:
  Session(Graph graph, WorkerPolicy policy);

  const Graph& graph() const { return graph_; }
  const WorkerPolicy& policy() const { return policy_; }

  // Executes the plan; inputs keyed by graph input name (symbolic dims bind
  // to whatever the tensors carry). Returns outputs by name.
  std::pair<std::map<std::string, Tensor>, RunStats> run(
      const std::map<std::string, Tensor>& inputs);

 private:
  std::vector<Tensor> eval_node(const Node& n,
                                const std::vector<const Tensor*>& in) const;

  Graph graph_;
  WorkerPolicy policy_;
  std::vector<const Node*> plan_;
  std::map<std::string, int> refcount_;  // uses per value, +1 for graph outputs
};

}  // namespace fusegraph
