// SPDX-License-Identifier: Apache-2.0
//
// Quantization: parameter estimation, rounding, graph rewrite, byte accounting.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "fusegraph/executor.hpp"
#include "fusegraph/fusion.hpp"
#include "fusegraph/quantize.hpp"
#include "fusegraph/recipes.hpp"

using namespace fusegraph;

namespace {

Tensor random_f32(Rng& rng, Shape shape, float lo = -1.0f, float hi = 1.0f) {
  const int64_t n = shape.numel();
  return Tensor::from_f32(std::move(shape), rng.uniform_vec(n, lo, hi));
}

int64_t count_kind(const Graph& g, OpKind k) {
  return std::count_if(g.nodes.begin(), g.nodes.end(),
                       [&](const Node& n) { return n.kind == k; });
}

// Bytes an initializer map occupies, recomputed from scratch.
int64_t recount_bytes(const Graph& g) {
  int64_t total = 0;
  for (const auto& [name, t] : g.initializers) {
    const int64_t elem = t.dtype() == DType::F32   ? 4
                         : t.dtype() == DType::I32 ? 4
                                                   : 1;
    total += t.numel() * elem;
    if (g.quant_params.count(name) > 0) total += kQuantParamBytes;
  }
  return total;
}

}  // namespace

TEST_CASE("activation params cover a zero-inclusive range") {
  // Non-negative span [0, 2.55]: one quantization step is exactly 0.01.
  const Tensor x = Tensor::from_f32({3}, {0.0f, 1.0f, 2.55f});
  const QuantParams qp = dynamic_qparams(x);
  CHECK(qp.s == doctest::Approx(100.0f));
  CHECK(qp.z == kActQmin);
  CHECK(qp.qmin == kActQmin);
  CHECK(qp.qmax == kActQmax);

  // Extremes land on the integer endpoints and invert exactly.
  const QuantTensor q = quantize(x, qp);
  CHECK(q.data.i8()[0] == static_cast<int8_t>(kActQmin));
  CHECK(q.data.i8()[2] == static_cast<int8_t>(kActQmax));
  const Tensor back = dequantize(q);
  CHECK(back.f32()[0] == doctest::Approx(0.0f).epsilon(1e-9));
  CHECK(back.f32()[2] == doctest::Approx(2.55f));
}

TEST_CASE("activation params for a symmetric range center the zero point") {
  const Tensor x = Tensor::from_f32({2}, {-1.0f, 1.0f});
  const QuantParams qp = dynamic_qparams(x);
  CHECK(qp.s == doctest::Approx(127.5f));
  CHECK(qp.z == 0);  // round(-128 - (-1)*127.5) = round(-0.5) -> 0, half-even
}

TEST_CASE("negative-only values still include zero in the range") {
  const Tensor x = Tensor::from_f32({2}, {-4.0f, -1.0f});
  const QuantParams qp = dynamic_qparams(x);
  // Range [-4, 0]: s = 255/4, zero maps to qmax exactly.
  CHECK(qp.s == doctest::Approx(255.0f / 4.0f));
  CHECK(qp.z == kActQmax);
  const QuantTensor q = quantize(x, qp);
  CHECK(q.data.i8()[0] == static_cast<int8_t>(kActQmin));  // -4*63.75 + 127
  // Half a step is 0.5/63.75; the -1.0 reconstruction stays inside it.
  CHECK(dequantize(q).f32()[1] == doctest::Approx(-1.0f).epsilon(1e-2));
}

TEST_CASE("degenerate and non-finite inputs") {
  const QuantParams qp = dynamic_qparams(Tensor::zeros(DType::F32, {4}));
  CHECK(qp.s == 1.0f);
  CHECK(qp.z == 0);

  Tensor bad = Tensor::from_f32({2}, {1.0f, std::numeric_limits<float>::quiet_NaN()});
  CHECK_THROWS_AS(dynamic_qparams(bad), NumericError);
  Tensor inf = Tensor::from_f32({2}, {1.0f, std::numeric_limits<float>::infinity()});
  CHECK_THROWS_AS(dynamic_qparams(inf), NumericError);
}

TEST_CASE("rounding is half-to-even") {
  // s=1, z=0 makes q = round(x) directly observable.
  const QuantParams qp{1.0f, 0, -128, 127};
  const Tensor x = Tensor::from_f32({6}, {0.5f, 1.5f, 2.5f, -0.5f, -1.5f, 3.5f});
  const QuantTensor q = quantize(x, qp);
  CHECK(q.data.i8()[0] == 0);
  CHECK(q.data.i8()[1] == 2);
  CHECK(q.data.i8()[2] == 2);
  CHECK(q.data.i8()[3] == 0);
  CHECK(q.data.i8()[4] == -2);
  CHECK(q.data.i8()[5] == 4);
}

TEST_CASE("quantize clamps to the integer range") {
  const QuantParams qp{1.0f, 0, -128, 127};
  const Tensor x = Tensor::from_f32({2}, {1000.0f, -1000.0f});
  const QuantTensor q = quantize(x, qp);
  CHECK(q.data.i8()[0] == 127);
  CHECK(q.data.i8()[1] == -128);
}

TEST_CASE("float zero is always exact") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_f32(rng, {32}, -3.0f, 5.0f);
    x.f32()[7] = 0.0f;
    const QuantParams qp = dynamic_qparams(x);
    const QuantTensor q = quantize(x, qp);
    CHECK(q.data.i8()[7] == qp.z);
    CHECK(dequantize(q).f32()[7] == 0.0f);
  }
}

TEST_CASE("round trip error is bounded by half a step") {
  Rng rng(123);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = random_f32(rng, {257}, -2.0f, 3.0f);
    const QuantParams qp = dynamic_qparams(x);
    const QuantTensor q = quantize(x, qp);
    const Tensor back = dequantize(q);
    // Half a quantization step, plus float rounding slack.
    const float bound = (0.5f + 1e-3f) / qp.s;
    for (int64_t i = 0; i < x.numel(); ++i)
      CHECK(std::abs(back.f32()[i] - x.f32()[i]) <= bound);
  }
}

TEST_CASE("weight params are symmetric with zero offset") {
  const Tensor w = Tensor::from_f32({4}, {-0.5f, 0.25f, 0.1f, 0.4f});
  const QuantParams qp = symmetric_weight_qparams(w);
  CHECK(qp.z == 0);
  CHECK(qp.qmin == kWeightQmin);
  CHECK(qp.qmax == kWeightQmax);
  CHECK(qp.s == doctest::Approx(127.0f / 0.5f));
  // The magnitude extreme maps to exactly -127.
  const QuantTensor q = quantize(w, qp);
  CHECK(q.data.i8()[0] == -127);

  const QuantParams flat = symmetric_weight_qparams(Tensor::zeros(DType::F32, {3}));
  CHECK(flat.s == 1.0f);
  CHECK(flat.z == 0);
}

TEST_CASE("unfused encoder rewrite quantizes projections, skips attention internals") {
  const ModelRecipe recipe{Architecture::TransformerEncoder, 2, 32, 4, 8, 0, 19};
  const Graph g = build_transformer_encoder(recipe);
  const auto [q, report] = quantize_graph(g);

  // Per block: q/k/v/out projections + two feed-forward layers.
  CHECK(report.nodes_quantized == 2 * 6);
  // Logits and context products have no constant weight operand.
  CHECK(report.skipped.size() == 2 * 2);
  for (const auto& [id, reason] : report.skipped)
    CHECK(reason.find("weight") != std::string::npos);

  CHECK(count_kind(q, OpKind::QMatMul) == 12);
  // Bias adds were absorbed into the quantized products.
  CHECK(count_kind(q, OpKind::MatMul) == 2 * 2);
  CHECK(validate(q).empty());

  CHECK(report.float_param_bytes == parameter_bytes(g));
  CHECK(report.quant_param_bytes == parameter_bytes(q));
  CHECK(report.quant_param_bytes == recount_bytes(q));
  CHECK(report.ratio() < 0.5);

  // Each quantized weight byte count is a quarter of its float source.
  for (const auto& [name, qp] : q.quant_params) {
    const Tensor& wq = q.initializer(name);
    CHECK(wq.dtype() == DType::I8);
    const Tensor& wf = g.initializer(name);
    CHECK(wf.dtype() == DType::F32);
    CHECK(wq.numel() == wf.numel());
  }
}

TEST_CASE("fused kinds rewrite to their quantized counterparts") {
  const ModelRecipe recipe{Architecture::ConformerEncoder, 1, 32, 4, 12, 0, 23};
  const Graph g = build_conformer_encoder(recipe);
  const auto [fused, reports] = fusion_pipeline(g);
  REQUIRE(count_kind(fused, OpKind::FusedRelPosAttention) == 1);

  const auto [q, report] = quantize_graph(fused);
  CHECK(count_kind(q, OpKind::QRelPosAttention) == 1);
  CHECK(count_kind(q, OpKind::FusedRelPosAttention) == 0);
  // Depthwise convolutions stay in float.
  CHECK(count_kind(q, OpKind::Conv1D) == 1);
  CHECK(validate(q).empty());
  CHECK(report.ratio() < 0.5);

  // The packed attention weight is now I8 with params; its bias is still F32.
  bool saw_attention = false;
  for (const Node& n : q.nodes) {
    if (n.kind != OpKind::QRelPosAttention) continue;
    saw_attention = true;
    CHECK(q.initializer(n.inputs[1]).dtype() == DType::I8);
    CHECK(q.quant_params.count(n.inputs[1]) == 1);
    CHECK(q.quant_params.at(n.inputs[1]).z == 0);
    CHECK(q.initializer(n.inputs[2]).dtype() == DType::F32);
  }
  CHECK(saw_attention);

  const ModelRecipe plain{Architecture::TransformerEncoder, 1, 16, 2, 8, 0, 23};
  const auto [tf, tf_reports] = fusion_pipeline(build_transformer_encoder(plain));
  const auto [tq, tq_report] = quantize_graph(tf);
  CHECK(count_kind(tq, OpKind::QAttention) == 1);
  CHECK(count_kind(tq, OpKind::FusedAttention) == 0);
}

TEST_CASE("an all-convolution graph is reported unquantizable") {
  const ModelRecipe recipe{Architecture::ArTts, 1, 16, 2, 8, 0, 3};
  const StagedModel model = build_tts_model(recipe);
  const Graph& post = model.role(kRolePostDecoder);
  const auto [q, report] = quantize_graph(post);
  CHECK(report.nodes_quantized == 0);
  CHECK(report.ratio() == 1.0);
  CHECK(graphs_identical(q, post));
  CHECK(!report.skipped.empty());
}

TEST_CASE("quantized product tracks the float product within two percent") {
  Rng rng(57);
  for (int trial = 0; trial < 8; ++trial) {
    const Tensor x = random_f32(rng, {5, 24}, -2.0f, 2.0f);
    const Tensor w = random_f32(rng, {24, 16}, -0.6f, 0.6f);
    const Tensor bias = random_f32(rng, {16}, -0.2f, 0.2f);

    Graph f;
    f.inputs.push_back(
        ValueInfo{"x", DType::F32, {Dim::sym(), Dim::concrete(24)}});
    f.initializers.emplace("w", w);
    f.initializers.emplace("b", bias);
    f.nodes = {Node{"mm", OpKind::MatMul, {"x", "w"}, {"p"}, {}},
               Node{"out", OpKind::Add, {"p", "b"}, {"y"}, {}}};
    f.outputs = {"y"};

    const auto [q, report] = quantize_graph(f);
    REQUIRE(report.nodes_quantized == 1);
    REQUIRE(q.nodes.size() == 1);
    CHECK(q.nodes[0].kind == OpKind::QMatMul);
    REQUIRE(q.nodes[0].inputs.size() == 3);  // x, quantized w, float bias

    Session sf(f, WorkerPolicy::sequential());
    Session sq(q, WorkerPolicy::sequential());
    const std::map<std::string, Tensor> in{{"x", x}};
    const Tensor yf = sf.run(in).first.at("y");
    const Tensor yq = sq.run(in).first.at("y");

    float worst = 0.0f, scale = 0.0f;
    for (size_t i = 0; i < yf.f32().size(); ++i) {
      worst = std::max(worst, std::abs(yf.f32()[i] - yq.f32()[i]));
      scale = std::max(scale, std::abs(yf.f32()[i]));
    }
    CHECK(worst <= 0.02f * std::max(scale, 1.0f));
  }
}

TEST_CASE("quantization is idempotent on already-quantized graphs") {
  const ModelRecipe recipe{Architecture::TransformerEncoder, 1, 16, 2, 8, 0, 37};
  const auto [q1, r1] = quantize_graph(build_transformer_encoder(recipe));
  const auto [q2, r2] = quantize_graph(q1);
  CHECK(r2.nodes_quantized == 0);
  CHECK(graphs_identical(q1, q2));
  CHECK(r2.ratio() == 1.0);
}
