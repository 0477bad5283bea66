// SPDX-License-Identifier: Apache-2.0

#include "fusegraph/recipes.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace fusegraph {

std::vector<float> Rng::uniform_vec(int64_t n, float lo, float hi) {
  std::vector<float> out(static_cast<size_t>(n));
  for (float& v : out) v = uniform(lo, hi);
  return out;
}

int64_t Rng::below(int64_t n) {
  if (n < 1) throw ConfigError("below() needs a positive bound");
  return static_cast<int64_t>(next() % static_cast<uint64_t>(n));
}

const char* architecture_name(Architecture a) {
  switch (a) {
    case Architecture::TransformerEncoder: return "transformer_encoder";
    case Architecture::ConformerEncoder: return "conformer_encoder";
    case Architecture::EncoderDecoderAsr: return "encoder_decoder_asr";
    case Architecture::ArTts: return "ar_tts";
  }
  return "?";
}

std::optional<Architecture> architecture_from_name(const std::string& name) {
  for (Architecture a :
       {Architecture::TransformerEncoder, Architecture::ConformerEncoder,
        Architecture::EncoderDecoderAsr, Architecture::ArTts}) {
    if (name == architecture_name(a)) return a;
  }
  return std::nullopt;
}

void validate_recipe(const ModelRecipe& r) {
  if (r.blocks < 1) throw ConfigError("recipe needs blocks >= 1");
  if (r.heads < 1) throw ConfigError("recipe needs heads >= 1");
  if (r.d_model < 1) throw ConfigError("recipe needs d_model >= 1");
  if (r.d_model % r.heads != 0)
    throw ConfigError("d_model " + std::to_string(r.d_model) +
                      " not divisible by heads " + std::to_string(r.heads));
  if (r.seq_len < 1) throw ConfigError("recipe needs seq_len >= 1");
}

namespace {

using Ints = std::vector<int64_t>;

struct Builder {
  Graph g;
  Rng& rng;

  Builder(std::string name, Rng& r) : rng(r) { g.name = std::move(name); }

  std::string input(const std::string& name, DType dt, std::vector<Dim> dims) {
    g.inputs.push_back(ValueInfo{name, dt, std::move(dims)});
    return name;
  }
  std::string emit(const std::string& id, OpKind kind,
                   std::vector<std::string> inputs, AttrMap attrs = {}) {
    g.nodes.push_back(Node{id, kind, std::move(inputs), {id}, std::move(attrs)});
    return id;
  }
  std::string init(const std::string& name, Tensor t) {
    g.initializers.emplace(name, std::move(t));
    return name;
  }
  std::string weight(const std::string& name, int64_t rows, int64_t cols,
                     float gain = 1.0f) {
    const float s = gain / std::sqrt(static_cast<float>(rows));
    return init(name,
                Tensor::from_f32(Shape{rows, cols},
                                 rng.uniform_vec(rows * cols, -s, s)));
  }
  std::string bias(const std::string& name, int64_t n) {
    return init(name, Tensor::from_f32(Shape{n}, rng.uniform_vec(n, -0.05f, 0.05f)));
  }
  // Shared scalar constants; the name encodes the value, so re-requests are
  // idempotent.
  std::string scalar(const std::string& name, float v) {
    if (!g.has_initializer(name)) g.initializers.emplace(name, Tensor::scalar_f32(v));
    return name;
  }
  std::string sqrt_scalar(int64_t d) {
    return scalar("c.sqrt" + std::to_string(d),
                  std::sqrt(static_cast<float>(d)));
  }
};

std::string emit_layer_norm(Builder& b, const std::string& p,
                            const std::string& x, int64_t d) {
  const std::string gamma =
      b.init(p + ".gamma", Tensor::from_f32(Shape{d}, b.rng.uniform_vec(d, 0.9f, 1.1f)));
  const std::string beta =
      b.init(p + ".beta", Tensor::from_f32(Shape{d}, b.rng.uniform_vec(d, -0.1f, 0.1f)));
  const std::string two = b.scalar("c.two", 2.0f);
  const std::string eps = b.scalar("c.eps", 1e-5f);
  const std::string mean = b.emit(p + ".mean", OpKind::ReduceMean, {x},
                                  {{"axes", Ints{-1}}, {"keepdims", int64_t{1}}});
  const std::string center = b.emit(p + ".center", OpKind::Sub, {x, mean});
  const std::string sq = b.emit(p + ".sq", OpKind::Pow, {center, two});
  const std::string var = b.emit(p + ".var", OpKind::ReduceMean, {sq},
                                 {{"axes", Ints{-1}}, {"keepdims", int64_t{1}}});
  const std::string var_eps = b.emit(p + ".var_eps", OpKind::Add, {var, eps});
  const std::string stdev = b.emit(p + ".std", OpKind::Sqrt, {var_eps});
  const std::string norm = b.emit(p + ".norm", OpKind::Div, {center, stdev});
  const std::string scaled = b.emit(p + ".scaled", OpKind::Mul, {norm, gamma});
  return b.emit(p + ".out", OpKind::Add, {scaled, beta});
}

// MatMul -> Add(bias) -> Reshape(0, H, d_k) -> Transpose(1, 0, 2).
std::string emit_projection(Builder& b, const std::string& p,
                            const std::string& x, int64_t d, int64_t heads) {
  const int64_t dk = d / heads;
  const std::string w = b.weight(p + ".w", d, d);
  const std::string bi = b.bias(p + ".b", d);
  const std::string mm = b.emit(p + ".mm", OpKind::MatMul, {x, w});
  const std::string ba = b.emit(p + ".bias", OpKind::Add, {mm, bi});
  const std::string rs = b.emit(p + ".heads", OpKind::Reshape, {ba},
                                {{"shape", Ints{0, heads, dk}}});
  return b.emit(p + ".t", OpKind::Transpose, {rs}, {{"perm", Ints{1, 0, 2}}});
}

std::string emit_attention(Builder& b, const std::string& p,
                           const std::string& x, int64_t d, int64_t heads) {
  const int64_t dk = d / heads;
  const std::string q = emit_projection(b, p + ".q", x, d, heads);
  const std::string k = emit_projection(b, p + ".k", x, d, heads);
  const std::string v = emit_projection(b, p + ".v", x, d, heads);
  const std::string kt =
      b.emit(p + ".k_inner", OpKind::Transpose, {k}, {{"perm", Ints{0, 2, 1}}});
  const std::string logits = b.emit(p + ".logits", OpKind::MatMul, {q, kt});
  const std::string sc =
      b.emit(p + ".scaled", OpKind::Div, {logits, b.sqrt_scalar(dk)});
  const std::string probs = b.emit(p + ".probs", OpKind::Softmax, {sc});
  const std::string ctx = b.emit(p + ".ctx", OpKind::MatMul, {probs, v});
  const std::string mt =
      b.emit(p + ".merge_t", OpKind::Transpose, {ctx}, {{"perm", Ints{1, 0, 2}}});
  return b.emit(p + ".merged", OpKind::Reshape, {mt}, {{"shape", Ints{0, d}}});
}

std::string emit_relpos_attention(Builder& b, const std::string& p,
                                  const std::string& x, const std::string& r_en,
                                  int64_t d, int64_t heads, int64_t len) {
  const int64_t dk = d / heads;
  const std::string q = emit_projection(b, p + ".q", x, d, heads);
  const std::string k = emit_projection(b, p + ".k", x, d, heads);
  const std::string v = emit_projection(b, p + ".v", x, d, heads);
  const std::string w_r = b.weight(p + ".w_r", d, d);
  const std::string u = b.init(
      p + ".u", Tensor::from_f32(Shape{heads, 1, dk}, b.rng.uniform_vec(d, -0.1f, 0.1f)));
  const std::string vbias = b.init(
      p + ".v", Tensor::from_f32(Shape{heads, 1, dk}, b.rng.uniform_vec(d, -0.1f, 0.1f)));

  const std::string pmm = b.emit(p + ".p_mm", OpKind::MatMul, {r_en, w_r});
  const std::string prs = b.emit(p + ".p_heads", OpKind::Reshape, {pmm},
                                 {{"shape", Ints{0, heads, dk}}});
  const std::string ptp =
      b.emit(p + ".p_t", OpKind::Transpose, {prs}, {{"perm", Ints{1, 0, 2}}});
  const std::string pt =
      b.emit(p + ".p_inner", OpKind::Transpose, {ptp}, {{"perm", Ints{0, 2, 1}}});

  const std::string qu = b.emit(p + ".q_u", OpKind::Add, {q, u});
  const std::string qv = b.emit(p + ".q_v", OpKind::Add, {q, vbias});
  const std::string kt =
      b.emit(p + ".k_inner", OpKind::Transpose, {k}, {{"perm", Ints{0, 2, 1}}});
  const std::string ac = b.emit(p + ".ac", OpKind::MatMul, {qu, kt});
  const std::string bd = b.emit(p + ".bd", OpKind::MatMul, {qv, pt});

  // Relative-offset axis to (L, L): pad one zero column at the front, fold,
  // drop the first folded row, unfold, keep the first L columns.
  const std::string pad = b.emit(p + ".shift_pad", OpKind::Pad, {bd},
                                 {{"pads_begin", Ints{0, 0, 1}}, {"pads_end", Ints{0, 0, 0}}});
  const std::string rs1 = b.emit(p + ".shift_fold", OpKind::Reshape, {pad},
                                 {{"shape", Ints{0, 2 * len, len}}});
  const std::string sl1 = b.emit(p + ".shift_drop", OpKind::Slice, {rs1},
                                 {{"axis", int64_t{1}}, {"start", int64_t{1}}, {"end", 2 * len}});
  const std::string rs2 = b.emit(p + ".shift_unfold", OpKind::Reshape, {sl1},
                                 {{"shape", Ints{0, len, 2 * len - 1}}});
  const std::string sl2 = b.emit(p + ".shift_keep", OpKind::Slice, {rs2},
                                 {{"axis", int64_t{2}}, {"start", int64_t{0}}, {"end", len}});

  const std::string sum = b.emit(p + ".sum", OpKind::Add, {ac, sl2});
  const std::string sc =
      b.emit(p + ".scaled", OpKind::Div, {sum, b.sqrt_scalar(dk)});
  const std::string probs = b.emit(p + ".probs", OpKind::Softmax, {sc});
  const std::string ctx = b.emit(p + ".ctx", OpKind::MatMul, {probs, v});
  const std::string mt =
      b.emit(p + ".merge_t", OpKind::Transpose, {ctx}, {{"perm", Ints{1, 0, 2}}});
  return b.emit(p + ".merged", OpKind::Reshape, {mt}, {{"shape", Ints{0, d}}});
}

std::string emit_out_proj(Builder& b, const std::string& p, const std::string& x,
                          int64_t d) {
  const std::string w = b.weight(p + ".w_out", d, d);
  const std::string bi = b.bias(p + ".b_out", d);
  const std::string mm = b.emit(p + ".out_mm", OpKind::MatMul, {x, w});
  return b.emit(p + ".out_bias", OpKind::Add, {mm, bi});
}

std::string emit_ffn(Builder& b, const std::string& p, const std::string& x,
                     int64_t d) {
  const int64_t hidden = 2 * d;
  const std::string w1 = b.weight(p + ".w1", d, hidden);
  const std::string b1 = b.bias(p + ".b1", hidden);
  const std::string w2 = b.weight(p + ".w2", hidden, d);
  const std::string b2 = b.bias(p + ".b2", d);
  const std::string mm1 = b.emit(p + ".mm1", OpKind::MatMul, {x, w1});
  const std::string a1 = b.emit(p + ".bias1", OpKind::Add, {mm1, b1});
  const std::string r = b.emit(p + ".relu", OpKind::Relu, {a1});
  const std::string mm2 = b.emit(p + ".mm2", OpKind::MatMul, {r, w2});
  return b.emit(p + ".bias2", OpKind::Add, {mm2, b2});
}

// Single-head attention from q_src rows over kv_src rows, with an output
// projection. Rank-2 throughout, so the fusion matchers never touch it.
std::string emit_row_attention(Builder& b, const std::string& p,
                               const std::string& q_src, const std::string& kv_src,
                               int64_t d) {
  const std::string wq = b.weight(p + ".wq", d, d);
  const std::string bq = b.bias(p + ".bq", d);
  const std::string wk = b.weight(p + ".wk", d, d);
  const std::string bk = b.bias(p + ".bk", d);
  const std::string wv = b.weight(p + ".wv", d, d);
  const std::string bv = b.bias(p + ".bv", d);
  const std::string q =
      b.emit(p + ".q", OpKind::Add, {b.emit(p + ".q_mm", OpKind::MatMul, {q_src, wq}), bq});
  const std::string k =
      b.emit(p + ".k", OpKind::Add, {b.emit(p + ".k_mm", OpKind::MatMul, {kv_src, wk}), bk});
  const std::string v =
      b.emit(p + ".v", OpKind::Add, {b.emit(p + ".v_mm", OpKind::MatMul, {kv_src, wv}), bv});
  const std::string kt =
      b.emit(p + ".k_t", OpKind::Transpose, {k}, {{"perm", Ints{1, 0}}});
  const std::string logits = b.emit(p + ".logits", OpKind::MatMul, {q, kt});
  const std::string sc =
      b.emit(p + ".scaled", OpKind::Div, {logits, b.sqrt_scalar(d)});
  const std::string probs = b.emit(p + ".probs", OpKind::Softmax, {sc});
  const std::string ctx = b.emit(p + ".ctx", OpKind::MatMul, {probs, v});
  const std::string wo = b.weight(p + ".wo", d, d);
  const std::string bo = b.bias(p + ".bo", d);
  return b.emit(p + ".out", OpKind::Add,
                {b.emit(p + ".out_mm", OpKind::MatMul, {ctx, wo}), bo});
}

Graph make_transformer_graph(Rng& rng, const ModelRecipe& r, const std::string& name) {
  Builder b(name, rng);
  const int64_t d = r.d_model;
  std::string x = b.input("feats", DType::F32, {Dim::sym(), Dim::concrete(d)});
  for (int64_t i = 0; i < r.blocks; ++i) {
    const std::string p = "b" + std::to_string(i);
    const std::string ln1 = emit_layer_norm(b, p + ".ln1", x, d);
    const std::string att = emit_attention(b, p + ".attn", ln1, d, r.heads);
    const std::string proj = emit_out_proj(b, p + ".attn", att, d);
    const std::string res1 = b.emit(p + ".res1", OpKind::Add, {x, proj});
    const std::string ln2 = emit_layer_norm(b, p + ".ln2", res1, d);
    const std::string ff = emit_ffn(b, p + ".ffn", ln2, d);
    x = b.emit(p + ".res2", OpKind::Add, {res1, ff});
  }
  b.g.outputs = {x};
  return std::move(b.g);
}

// Sinusoidal embeddings for relative offsets -(L-1)..L-1; row L-1 is offset 0.
Tensor position_table(int64_t len, int64_t d) {
  const int64_t rows = 2 * len - 1;
  std::vector<float> data(static_cast<size_t>(rows * d));
  for (int64_t row = 0; row < rows; ++row) {
    const double pos = static_cast<double>(row - (len - 1));
    for (int64_t j = 0; j < d; ++j) {
      const double freq =
          std::pow(10000.0, static_cast<double>(j - (j % 2)) / static_cast<double>(d));
      const double angle = pos / freq;
      data[static_cast<size_t>(row * d + j)] =
          static_cast<float>(j % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return Tensor::from_f32(Shape{rows, d}, std::move(data));
}

Graph make_conformer_graph(Rng& rng, const ModelRecipe& r, const std::string& name) {
  Builder b(name, rng);
  const int64_t d = r.d_model;
  const int64_t len = r.seq_len;
  const std::string r_en = b.init("pos.table", position_table(len, d));
  std::string x = b.input("feats", DType::F32,
                          {Dim::concrete(len), Dim::concrete(d)});
  for (int64_t i = 0; i < r.blocks; ++i) {
    const std::string p = "b" + std::to_string(i);
    const std::string ln1 = emit_layer_norm(b, p + ".ln1", x, d);
    const std::string att =
        emit_relpos_attention(b, p + ".attn", ln1, r_en, d, r.heads, len);
    const std::string proj = emit_out_proj(b, p + ".attn", att, d);
    const std::string res1 = b.emit(p + ".res1", OpKind::Add, {x, proj});
    const std::string ln2 = emit_layer_norm(b, p + ".ln2", res1, d);
    const std::string wc = b.init(
        p + ".conv.w", Tensor::from_f32(Shape{d, 1, 3}, b.rng.uniform_vec(3 * d, -0.3f, 0.3f)));
    const std::string bc = b.bias(p + ".conv.b", d);
    const std::string cv = b.emit(p + ".conv", OpKind::Conv1D, {ln2, wc, bc},
                                  {{"pad", int64_t{1}}, {"groups", d}});
    const std::string ca = b.emit(p + ".conv_act", OpKind::Relu, {cv});
    const std::string res2 = b.emit(p + ".res2", OpKind::Add, {res1, ca});
    const std::string ln3 = emit_layer_norm(b, p + ".ln3", res2, d);
    const std::string ff = emit_ffn(b, p + ".ffn", ln3, d);
    x = b.emit(p + ".res3", OpKind::Add, {res2, ff});
  }
  b.g.outputs = {x};
  return std::move(b.g);
}

Graph make_decoder_step_graph(Rng& rng, const ModelRecipe& r) {
  Builder b("asr_decoder_step", rng);
  const int64_t d = r.d_model;
  const int64_t vocab = r.vocab;
  const std::string memory =
      b.input("memory", DType::F32, {Dim::sym(), Dim::concrete(d)});
  const std::string token = b.input("token", DType::I32, {Dim::concrete(1)});
  std::vector<std::string> caches;
  for (int64_t i = 0; i < r.blocks; ++i)
    caches.push_back(b.input("cache_" + std::to_string(i), DType::F32,
                             {Dim::sym(), Dim::concrete(d)}));

  const std::string embed = b.init(
      "dec.embed", Tensor::from_f32(Shape{vocab, d},
                                    rng.uniform_vec(vocab * d, -0.5f, 0.5f)));
  std::string h = b.emit("dec.embed_row", OpKind::Gather, {embed, token});
  std::vector<std::string> new_caches;
  for (int64_t i = 0; i < r.blocks; ++i) {
    const std::string p = "dec.l" + std::to_string(i);
    const std::string ln_a = emit_layer_norm(b, p + ".ln_self", h, d);
    const std::string kv = b.emit(p + ".kv", OpKind::Concat, {caches[static_cast<size_t>(i)], ln_a},
                                  {{"axis", int64_t{0}}});
    new_caches.push_back(kv);
    const std::string sa = emit_row_attention(b, p + ".self", ln_a, kv, d);
    h = b.emit(p + ".res_self", OpKind::Add, {h, sa});
    const std::string ln_b = emit_layer_norm(b, p + ".ln_cross", h, d);
    const std::string ca = emit_row_attention(b, p + ".cross", ln_b, memory, d);
    h = b.emit(p + ".res_cross", OpKind::Add, {h, ca});
    const std::string ln_c = emit_layer_norm(b, p + ".ln_ffn", h, d);
    const std::string ff = emit_ffn(b, p + ".ffn", ln_c, d);
    h = b.emit(p + ".res_ffn", OpKind::Add, {h, ff});
  }
  const std::string ln_f = emit_layer_norm(b, "dec.ln_out", h, d);
  const std::string w_head = b.weight("dec.head_w", d, vocab);
  const std::string b_head = b.bias("dec.head_b", vocab);
  const std::string logits = b.emit("dec.head_mm", OpKind::MatMul, {ln_f, w_head});
  const std::string shifted = b.emit("dec.head_bias", OpKind::Add, {logits, b_head});
  const std::string logp = b.emit("dec.logp", OpKind::LogSoftmax, {shifted});
  b.g.outputs.push_back(logp);
  for (const std::string& c : new_caches) b.g.outputs.push_back(c);
  return std::move(b.g);
}

Graph make_ctc_graph(Rng& rng, const ModelRecipe& r) {
  Builder b("asr_ctc", rng);
  const int64_t d = r.d_model;
  const std::string memory =
      b.input("memory", DType::F32, {Dim::sym(), Dim::concrete(d)});
  const std::string w = b.weight("ctc.w", d, r.vocab);
  const std::string bi = b.bias("ctc.b", r.vocab);
  const std::string mm = b.emit("ctc.mm", OpKind::MatMul, {memory, w});
  const std::string shifted = b.emit("ctc.bias", OpKind::Add, {mm, bi});
  b.g.outputs = {b.emit("ctc.logp", OpKind::LogSoftmax, {shifted})};
  return std::move(b.g);
}

Graph make_ar_step_graph(Rng& rng, const ModelRecipe& r) {
  Builder b("tts_ar_step", rng);
  const int64_t d = r.d_model;
  const int64_t f = d;  // frame width
  const std::string memory =
      b.input("memory", DType::F32, {Dim::sym(), Dim::concrete(d)});
  const std::string prev =
      b.input("prev", DType::F32, {Dim::concrete(1), Dim::concrete(f)});
  const std::string hist =
      b.input("hist", DType::F32, {Dim::sym(), Dim::concrete(f)});

  const std::string w_pre = b.weight("ar.pre.w", f, d, 0.5f);
  const std::string b_pre = b.bias("ar.pre.b", d);
  const std::string pre = b.emit(
      "ar.pre.relu", OpKind::Relu,
      {b.emit("ar.pre.bias", OpKind::Add,
              {b.emit("ar.pre.mm", OpKind::MatMul, {prev, w_pre}), b_pre})});
  const std::string ctx = emit_row_attention(b, "ar.attn", pre, memory, d);
  const std::string w_g = b.weight("ar.gate.w", d, d, 0.5f);
  const std::string b_g = b.bias("ar.gate.b", d);
  const std::string gate = b.emit(
      "ar.gate.relu", OpKind::Relu,
      {b.emit("ar.gate.bias", OpKind::Add,
              {b.emit("ar.gate.mm", OpKind::MatMul, {ctx, w_g}), b_g})});
  const std::string w_f = b.weight("ar.frame.w", d, f, 0.25f);
  const std::string b_f = b.bias("ar.frame.b", f);
  const std::string frame =
      b.emit("ar.frame", OpKind::Add,
             {b.emit("ar.frame.mm", OpKind::MatMul, {gate, w_f}), b_f});

  const std::string new_hist =
      b.emit("ar.hist", OpKind::Concat, {hist, frame}, {{"axis", int64_t{0}}});
  const std::string pooled = b.emit("ar.pool", OpKind::ReduceMean, {new_hist},
                                    {{"axes", Ints{0}}, {"keepdims", int64_t{1}}});
  const std::string stop_in =
      b.emit("ar.stop_in", OpKind::Concat, {gate, pooled}, {{"axis", int64_t{1}}});
  const std::string w_s = b.weight("ar.stop.w", d + f, 1);
  const std::string b_s =
      b.init("ar.stop.b", Tensor::from_f32(Shape{1}, {rng.uniform(-0.5f, 0.5f)}));
  const std::string stop = b.emit(
      "ar.stop", OpKind::Sigmoid,
      {b.emit("ar.stop.bias", OpKind::Add,
              {b.emit("ar.stop.mm", OpKind::MatMul, {stop_in, w_s}), b_s})});
  b.g.outputs = {frame, stop, new_hist};
  return std::move(b.g);
}

Graph make_postnet_graph(Rng& rng, const ModelRecipe& r) {
  Builder b("tts_postnet", rng);
  const int64_t f = r.d_model;
  const std::string frames =
      b.input("frames", DType::F32, {Dim::sym(), Dim::concrete(f)});
  const float s = 1.0f / std::sqrt(static_cast<float>(3 * f));
  const std::string w1 = b.init(
      "post.w1", Tensor::from_f32(Shape{f, f, 3}, rng.uniform_vec(3 * f * f, -s, s)));
  const std::string b1 = b.bias("post.b1", f);
  const std::string w2 = b.init(
      "post.w2", Tensor::from_f32(Shape{f, f, 3}, rng.uniform_vec(3 * f * f, -s, s)));
  const std::string b2 = b.bias("post.b2", f);
  const std::string c1 = b.emit("post.conv1", OpKind::Conv1D, {frames, w1, b1},
                                {{"pad", int64_t{1}}, {"groups", int64_t{1}}});
  const std::string a1 = b.emit("post.relu", OpKind::Relu, {c1});
  const std::string c2 = b.emit("post.conv2", OpKind::Conv1D, {a1, w2, b2},
                                {{"pad", int64_t{1}}, {"groups", int64_t{1}}});
  b.g.outputs = {b.emit("post.res", OpKind::Add, {frames, c2})};
  return std::move(b.g);
}

}  // namespace

Graph build_transformer_encoder(const ModelRecipe& r) {
  validate_recipe(r);
  Rng rng(r.seed);
  return make_transformer_graph(rng, r, "transformer_encoder");
}

Graph build_conformer_encoder(const ModelRecipe& r) {
  validate_recipe(r);
  Rng rng(r.seed);
  return make_conformer_graph(rng, r, "conformer_encoder");
}

StagedModel build_asr_model(const ModelRecipe& r) {
  validate_recipe(r);
  if (r.vocab < 3)
    throw ConfigError("asr recipe needs vocab >= 3 (blank, token, sos/eos)");
  Rng rng(r.seed);
  StagedModel m;
  m.vocab_size = r.vocab;
  m.blank = 0;
  m.sos = r.vocab - 1;
  m.eos = r.vocab - 1;
  m.max_steps = 64;
  m.roles.emplace(kRoleEncoder, make_transformer_graph(rng, r, "asr_encoder"));
  m.roles.emplace(kRoleDecoderStep, make_decoder_step_graph(rng, r));
  m.roles.emplace(kRoleCtcPosterior, make_ctc_graph(rng, r));
  return m;
}

StagedModel build_tts_model(const ModelRecipe& r) {
  validate_recipe(r);
  Rng rng(r.seed);
  StagedModel m;
  m.max_steps = 16;
  m.roles.emplace(kRoleEncoder, make_transformer_graph(rng, r, "tts_encoder"));
  m.roles.emplace(kRoleArStep, make_ar_step_graph(rng, r));
  m.roles.emplace(kRolePostDecoder, make_postnet_graph(rng, r));
  return m;
}

void generate_model_file(const ModelRecipe& r, const std::string& path) {
  switch (r.architecture) {
    case Architecture::TransformerEncoder:
      save_graphpack(build_transformer_encoder(r), path);
      return;
    case Architecture::ConformerEncoder:
      save_graphpack(build_conformer_encoder(r), path);
      return;
    case Architecture::EncoderDecoderAsr:
      save_staged(build_asr_model(r), path);
      return;
    case Architecture::ArTts:
      save_staged(build_tts_model(r), path);
      return;
  }
  throw ConfigError("unknown architecture");
}

std::map<std::string, Tensor> make_random_inputs(const Graph& g, Rng& rng,
                                                 int64_t default_len,
                                                 int64_t vocab) {
  if (default_len < 0) throw ConfigError("default length must be >= 0");
  std::map<std::string, Tensor> out;
  for (const ValueInfo& vi : g.inputs) {
    std::vector<int64_t> dims;
    dims.reserve(vi.dims.size());
    for (const Dim& d : vi.dims)
      dims.push_back(d.symbolic ? default_len : d.value);
    Shape shape(std::move(dims));
    if (vi.dtype == DType::F32) {
      out.emplace(vi.name,
                  Tensor::from_f32(shape, rng.uniform_vec(shape.numel(), -1.0f, 1.0f)));
    } else if (vi.dtype == DType::I32) {
      int64_t high = vocab;
      if (high <= 0) {
        for (const Node& n : g.nodes) {
          if (n.kind == OpKind::Gather && n.inputs.size() == 2 &&
              n.inputs[1] == vi.name && g.has_initializer(n.inputs[0])) {
            high = g.initializer(n.inputs[0]).dim(0);
            break;
          }
        }
      }
      if (high <= 0) high = 2;
      std::vector<int32_t> vals(static_cast<size_t>(shape.numel()));
      for (int32_t& v : vals) v = static_cast<int32_t>(rng.below(high));
      out.emplace(vi.name, Tensor::from_i32(shape, std::move(vals)));
    } else {
      throw ConfigError("cannot synthesize a random '" + vi.name + "' input");
    }
  }
  return out;
}

}  // namespace fusegraph
