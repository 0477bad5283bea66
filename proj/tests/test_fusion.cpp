// SPDX-License-Identifier: Apache-2.0
//
// Fusion passes: exact-structure matching, weight repacking, equivalence.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fusegraph/executor.hpp"
#include "fusegraph/fusion.hpp"
#include "fusegraph/recipes.hpp"

using namespace fusegraph;

namespace {

Node node(std::string id, OpKind kind, std::vector<std::string> ins,
          std::vector<std::string> outs, AttrMap attrs = {}) {
  return Node{std::move(id), kind, std::move(ins), std::move(outs),
              std::move(attrs)};
}

Tensor random_f32(Rng& rng, Shape shape, float lo = -1.0f, float hi = 1.0f) {
  const int64_t n = shape.numel();
  return Tensor::from_f32(std::move(shape), rng.uniform_vec(n, lo, hi));
}

// The exact normalization chain the matcher recognizes, over a (?, d) input.
Graph layer_norm_chain(int64_t d, float eps, uint64_t seed) {
  Rng rng(seed);
  Graph g;
  g.name = "ln_chain";
  g.inputs.push_back(ValueInfo{"x", DType::F32, {Dim::sym(), Dim::concrete(d)}});
  g.initializers.emplace("two", Tensor::scalar_f32(2.0f));
  g.initializers.emplace("eps", Tensor::scalar_f32(eps));
  g.initializers.emplace("gamma", random_f32(rng, {d}, 0.9f, 1.1f));
  g.initializers.emplace("beta", random_f32(rng, {d}, -0.1f, 0.1f));
  const AttrMap rm{{"axes", std::vector<int64_t>{-1}}, {"keepdims", int64_t{1}}};
  g.nodes = {
      node("mean", OpKind::ReduceMean, {"x"}, {"m"}, rm),
      node("center", OpKind::Sub, {"x", "m"}, {"c"}),
      node("sq", OpKind::Pow, {"c", "two"}, {"p"}),
      node("var", OpKind::ReduceMean, {"p"}, {"v"}, rm),
      node("var_eps", OpKind::Add, {"v", "eps"}, {"ve"}),
      node("std", OpKind::Sqrt, {"ve"}, {"s"}),
      node("norm", OpKind::Div, {"c", "s"}, {"n"}),
      node("scaled", OpKind::Mul, {"n", "gamma"}, {"sc"}),
      node("out", OpKind::Add, {"sc", "beta"}, {"y"}),
  };
  g.outputs = {"y"};
  return g;
}

int64_t count_kind(const Graph& g, OpKind k) {
  return std::count_if(g.nodes.begin(), g.nodes.end(),
                       [&](const Node& n) { return n.kind == k; });
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.f32().size() == b.f32().size());
  float worst = 0.0f;
  for (size_t i = 0; i < a.f32().size(); ++i)
    worst = std::max(worst, std::abs(a.f32()[i] - b.f32()[i]));
  return worst;
}

// Runs both graphs on the same inputs and returns the worst output mismatch.
float compare_graphs(const Graph& a, const Graph& b,
                     const std::map<std::string, Tensor>& inputs) {
  Session sa(a, WorkerPolicy::sequential());
  Session sb(b, WorkerPolicy::sequential());
  const auto [oa, stats_a] = sa.run(inputs);
  const auto [ob, stats_b] = sb.run(inputs);
  REQUIRE(oa.size() == ob.size());
  float worst = 0.0f;
  for (const auto& [name, ta] : oa)
    worst = std::max(worst, max_abs_diff(ta, ob.at(name)));
  return worst;
}

const FusionReport& report_for(const std::vector<FusionReport>& reports,
                               const std::string& rule) {
  for (const FusionReport& r : reports)
    if (r.rule == rule) return r;
  REQUIRE_MESSAGE(false, "no report for rule ", rule);
  static FusionReport dummy;
  return dummy;
}

}  // namespace

TEST_CASE("canonicalize_commutative puts the constant operand second") {
  Graph g;
  g.inputs.push_back(ValueInfo{"x", DType::F32, {Dim::concrete(4)}});
  g.initializers.emplace("c", Tensor::from_f32({4}, {1, 2, 3, 4}));
  g.nodes = {
      node("a", OpKind::Add, {"c", "x"}, {"s"}),
      node("m", OpKind::Mul, {"c", "s"}, {"p"}),
      node("d", OpKind::Sub, {"c", "p"}, {"q"}),  // not commutative: keep
      node("b", OpKind::Add, {"q", "s"}, {"y"}),  // no constant: keep
  };
  g.outputs = {"y"};
  const Graph canon = canonicalize_commutative(g);
  CHECK(canon.nodes[0].inputs == std::vector<std::string>{"x", "c"});
  CHECK(canon.nodes[1].inputs == std::vector<std::string>{"s", "c"});
  CHECK(canon.nodes[2].inputs == std::vector<std::string>{"c", "p"});
  CHECK(canon.nodes[3].inputs == std::vector<std::string>{"q", "s"});
  // Swapping operands must not change results.
  Rng rng(3);
  const std::map<std::string, Tensor> in{{"x", random_f32(rng, {4})}};
  CHECK(compare_graphs(g, canon, in) == 0.0f);
}

TEST_CASE("nine-node normalization chain collapses to one LayerNorm") {
  const Graph g = layer_norm_chain(8, 1e-5f, 21);
  const auto [fused, report] = fuse_layer_norm(g);

  CHECK(report.rule == "layer_norm");
  CHECK(report.matches == 1);
  CHECK(report.nodes_removed == 9);
  CHECK(report.nodes_added == 1);
  REQUIRE(report.match_outputs.size() == 1);
  CHECK(report.match_outputs[0] == "y");
  CHECK(report.diagnostics.empty());

  REQUIRE(fused.nodes.size() == 1);
  const Node& ln = fused.nodes[0];
  CHECK(ln.kind == OpKind::LayerNorm);
  CHECK(ln.inputs == std::vector<std::string>{"x", "gamma", "beta"});
  CHECK(ln.outputs == std::vector<std::string>{"y"});
  CHECK(ln.attr_float("eps") == doctest::Approx(1e-5).epsilon(1e-9));
  CHECK(fused.outputs == std::vector<std::string>{"y"});

  // Scalar constants lost their last reference; affine params survive.
  CHECK(!fused.has_initializer("two"));
  CHECK(!fused.has_initializer("eps"));
  CHECK(fused.has_initializer("gamma"));
  CHECK(fused.has_initializer("beta"));
  CHECK(validate(fused).empty());

  Rng rng(5);
  const std::map<std::string, Tensor> in{{"x", random_f32(rng, {6, 8})}};
  CHECK(compare_graphs(g, fused, in) <= 1e-6f);
}

TEST_CASE("near-miss normalization chains are left alone") {
  SUBCASE("wrong exponent") {
    Graph g = layer_norm_chain(8, 1e-5f, 21);
    g.initializers.at("two").f32()[0] = 3.0f;
    const auto [fused, report] = fuse_layer_norm(g);
    CHECK(report.matches == 0);
    CHECK(graphs_identical(fused, g));
  }
  SUBCASE("keepdims off") {
    Graph g = layer_norm_chain(8, 1e-5f, 21);
    for (Node& n : g.nodes)
      if (n.id == "var") n.attrs["keepdims"] = int64_t{0};
    CHECK(fuse_layer_norm(g).second.matches == 0);
  }
  SUBCASE("reduction over the wrong axis") {
    Graph g = layer_norm_chain(8, 1e-5f, 21);
    for (Node& n : g.nodes)
      if (n.id == "mean") n.attrs["axes"] = std::vector<int64_t>{0};
    CHECK(fuse_layer_norm(g).second.matches == 0);
  }
  SUBCASE("gamma is not a vector") {
    Graph g = layer_norm_chain(8, 1e-5f, 21);
    g.initializers.at("gamma") = Tensor::zeros(DType::F32, {8, 1});
    CHECK(fuse_layer_norm(g).second.matches == 0);
  }
  SUBCASE("non-positive eps is diagnosed, not rewritten") {
    Graph g = layer_norm_chain(8, -1e-5f, 21);
    const auto [fused, report] = fuse_layer_norm(g);
    CHECK(report.matches == 0);
    REQUIRE(report.diagnostics.size() == 1);
    CHECK(report.diagnostics[0].find("eps is not positive") != std::string::npos);
    CHECK(graphs_identical(fused, g));
  }
  SUBCASE("escaping intermediate blocks the rewrite") {
    Graph g = layer_norm_chain(8, 1e-5f, 21);
    g.outputs.push_back("c");  // centered value now visible outside
    const auto [fused, report] = fuse_layer_norm(g);
    CHECK(report.matches == 0);
    REQUIRE(report.diagnostics.size() == 1);
    CHECK(report.diagnostics[0].find("escapes pattern") != std::string::npos);
  }
}

TEST_CASE("transformer encoder fuses every norm and attention block") {
  const ModelRecipe recipe{Architecture::TransformerEncoder, 2, 32, 4, 8, 0, 9};
  const Graph g = build_transformer_encoder(recipe);
  const auto [fused, reports] = fusion_pipeline(g);

  const FusionReport& ln = report_for(reports, "layer_norm");
  CHECK(ln.matches == 4);  // two per block
  CHECK(ln.nodes_removed == 4 * 9);
  CHECK(ln.nodes_added == 4);
  const FusionReport& attn = report_for(reports, "attention");
  CHECK(attn.matches == 2);
  CHECK(attn.nodes_removed == 2 * 19);
  CHECK(attn.nodes_added == 2);
  CHECK(report_for(reports, "relpos_attention").matches == 0);

  CHECK(count_kind(fused, OpKind::LayerNorm) == 4);
  CHECK(count_kind(fused, OpKind::FusedAttention) == 2);
  CHECK(count_kind(fused, OpKind::Softmax) == 0);
  CHECK(fused.nodes.size() == g.nodes.size() - 4 * 8 - 2 * 18);
  CHECK(fused.nodes.size() < g.nodes.size());
  CHECK(validate(fused).empty());

  // Packed projection weights: Q block columns must equal the original W_Q.
  const Tensor& w_q = g.initializer("b0.attn.q.w");
  const Tensor& packed = fused.initializer("b0.attn.merged_w_qkv");
  REQUIRE(packed.dim(0) == 32);
  REQUIRE(packed.dim(1) == 96);
  for (int64_t i = 0; i < 32; ++i)
    for (int64_t j = 0; j < 32; ++j)
      CHECK(packed.f32()[i * 96 + j] == w_q.f32()[i * 32 + j]);
  const Tensor& w_v = g.initializer("b0.attn.v.w");
  for (int64_t i = 0; i < 32; ++i)
    for (int64_t j = 0; j < 32; ++j)
      CHECK(packed.f32()[i * 96 + 64 + j] == w_v.f32()[i * 32 + j]);
  const Tensor& bias = fused.initializer("b0.attn.merged_bias_qkv");
  const Tensor& b_k = g.initializer("b0.attn.k.b");
  for (int64_t j = 0; j < 32; ++j)
    CHECK(bias.f32()[32 + j] == b_k.f32()[j]);

  // Per-projection weights and biases lost their last reference.
  for (const char* name : {"b0.attn.q.w", "b0.attn.k.w", "b0.attn.v.w",
                           "b0.attn.q.b", "b0.attn.k.b", "b0.attn.v.b"})
    CHECK(!fused.has_initializer(name));

  Rng rng(17);
  const std::map<std::string, Tensor> in{{"feats", random_f32(rng, {16, 32})}};
  CHECK(compare_graphs(g, fused, in) <= 1e-5f);
}

TEST_CASE("conformer encoder fuses relative-positional attention") {
  const ModelRecipe recipe{Architecture::ConformerEncoder, 2, 32, 4, 12, 0, 13};
  const Graph g = build_conformer_encoder(recipe);
  const auto [fused, reports] = fusion_pipeline(g);

  CHECK(report_for(reports, "layer_norm").matches == 6);  // three per block
  CHECK(report_for(reports, "relpos_attention").matches == 2);
  CHECK(report_for(reports, "attention").matches == 0);

  CHECK(count_kind(fused, OpKind::FusedRelPosAttention) == 2);
  CHECK(count_kind(fused, OpKind::Softmax) == 0);
  CHECK(count_kind(fused, OpKind::Pad) == 0);  // the shift chain is gone
  CHECK(count_kind(fused, OpKind::Conv1D) == 2);  // conv sublayers untouched
  CHECK(validate(fused).empty());
  CHECK(fused.nodes.size() < g.nodes.size());

  const FusionReport& rp = report_for(reports, "relpos_attention");
  CHECK(rp.nodes_removed >= rp.nodes_added);
  CHECK(static_cast<int64_t>(rp.match_outputs.size()) == rp.matches);

  Rng rng(29);
  const std::map<std::string, Tensor> in{{"feats", random_f32(rng, {12, 32})}};
  CHECK(compare_graphs(g, fused, in) <= 1e-5f);
}

TEST_CASE("fusion pipeline is idempotent") {
  const ModelRecipe recipe{Architecture::ConformerEncoder, 1, 16, 2, 8, 0, 31};
  const Graph g = build_conformer_encoder(recipe);
  const auto [once, first] = fusion_pipeline(g);
  const auto [twice, second] = fusion_pipeline(once);
  for (const FusionReport& r : second) CHECK(r.matches == 0);
  CHECK(graphs_identical(once, twice));
}

TEST_CASE("wrong scale constant is diagnosed and blocks the match") {
  const ModelRecipe recipe{Architecture::TransformerEncoder, 1, 16, 2, 8, 0, 7};
  Graph g = build_transformer_encoder(recipe);
  // The logits divisor must be sqrt(d_k) = sqrt(8); nudge it off.
  REQUIRE(g.has_initializer("c.sqrt8"));
  g.initializers.at("c.sqrt8").f32()[0] += 0.1f;
  const auto [fused, report] = fuse_attention(g);
  CHECK(report.matches == 0);
  REQUIRE(!report.diagnostics.empty());
  CHECK(report.diagnostics[0].find("scale constant") != std::string::npos);
  CHECK(graphs_identical(fused, g));
}

TEST_CASE("explicit rule subsets run in the order given") {
  const ModelRecipe recipe{Architecture::TransformerEncoder, 1, 16, 2, 8, 0, 7};
  const Graph g = build_transformer_encoder(recipe);
  const auto [ln_only, reports] =
      fusion_pipeline(g, std::vector<std::string>{"layer_norm"});
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].rule == "layer_norm");
  CHECK(reports[0].matches == 2);
  CHECK(count_kind(ln_only, OpKind::LayerNorm) == 2);
  CHECK(count_kind(ln_only, OpKind::Softmax) == 1);  // attention untouched

  CHECK_THROWS_AS(fusion_pipeline(g, std::vector<std::string>{"no_such_rule"}),
                  ConfigError);
}

TEST_CASE("default rule order runs layer_norm before attention rules") {
  const auto& rules = default_fusion_rules();
  REQUIRE(rules.size() == 3);
  CHECK(rules[0] == "layer_norm");
  CHECK(rules[1] == "relpos_attention");
  CHECK(rules[2] == "attention");
}

TEST_CASE("attention params view validates the packed layout") {
  Rng rng(41);
  const Tensor w = random_f32(rng, {8, 24});
  const Tensor b = random_f32(rng, {24});
  const AttentionParams p = make_attention_params(2, w, b, nullptr);
  CHECK(p.heads == 2);
  CHECK(p.d_k == 4);
  CHECK(p.scale == doctest::Approx(1.0 / std::sqrt(4.0)));
  CHECK(p.w_qkv == &w);

  const Tensor w_bad = random_f32(rng, {8, 16});  // not (D, 3D)
  CHECK_THROWS_AS(make_attention_params(2, w_bad, b, nullptr), ShapeError);
  CHECK_THROWS_AS(make_attention_params(3, w, b, nullptr), ConfigError);
}
