// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fusegraph/graph.hpp"

namespace fusegraph {

// Non-owning view of a fused attention node's parameters. Weight layout is
// the packed (D, 3D) matrix with Q, K, V column blocks in that order;
// bias_qkv is the matching 3D vector. scale = d_k^(-1/2).
struct AttentionParams {
  int64_t heads = 1;
  int64_t d_k = 0;
  float scale = 0.0f;
  const Tensor* w_qkv = nullptr;
  const Tensor* bias_qkv = nullptr;
  const QuantParams* w_qp = nullptr;  // set when w_qkv is I8
};

// Relative-positional attention adds a position projection and the two
// content/position bias vectors. r_en holds embeddings for relative offsets
// -(L-1)..L-1; row L-1 is offset 0.
struct RelPosParams {
  AttentionParams attn;
  const Tensor* w_r = nullptr;  // (D, D), no bias
  const QuantParams* w_r_qp = nullptr;
  const Tensor* u = nullptr;  // H*d_k elements, added to queries for the content term
  const Tensor* v = nullptr;  // H*d_k elements, added to queries for the position term
  const Tensor* r_en = nullptr;  // (2L-1, D)
};

AttentionParams make_attention_params(int64_t heads, const Tensor& w_qkv,
                                      const Tensor& bias_qkv,
                                      const QuantParams* w_qp);
RelPosParams make_relpos_params(int64_t heads, const Tensor& w_qkv,
                                const Tensor& bias_qkv, const Tensor& w_r,
                                const Tensor& u, const Tensor& v,
                                const Tensor& r_en, const QuantParams* w_qkv_qp,
                                const QuantParams* w_r_qp);

struct FusionReport {
  std::string rule;
  int64_t matches = 0;
  int64_t nodes_removed = 0;
  int64_t nodes_added = 0;
  std::vector<std::string> match_outputs;  // preserved output value per match
  std::vector<std::string> diagnostics;    // partial matches left unrewritten
};

// Orders commutative Add/Mul operands so a constant initializer sits second.
// The matchers assume this form; generators emit it already.
Graph canonicalize_commutative(const Graph& g);

// Each pass replaces every exact occurrence of its canonical subgraph with
// one fused node, repacking weights where needed and garbage-collecting
// initializers that lose their last reference. Non-matching structure is
// untouched; output value names are preserved.
std::pair<Graph, FusionReport> fuse_layer_norm(const Graph& g);
std::pair<Graph, FusionReport> fuse_attention(const Graph& g);
std::pair<Graph, FusionReport> fuse_relpos_attention(const Graph& g);

const std::vector<std::string>& default_fusion_rules();

// Applies rules in order, revalidating after each; idempotent.
std::pair<Graph, std::vector<FusionReport>> fusion_pipeline(
    const Graph& g, const std::vector<std::string>& rules = default_fusion_rules());

}  // namespace fusegraph
