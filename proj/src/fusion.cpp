// SPDX-License-Identifier: Apache-2.0

#include "fusegraph/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <set>

namespace fusegraph {

AttentionParams make_attention_params(int64_t heads, const Tensor& w_qkv,
                                      const Tensor& bias_qkv,
                                      const QuantParams* w_qp) {
  if (w_qkv.rank() != 2 || w_qkv.dim(1) != 3 * w_qkv.dim(0)) {
    throw ShapeError("packed attention weight must be (D, 3D), got " +
                     w_qkv.shape().to_string());
  }
  const int64_t d = w_qkv.dim(0);
  if (heads < 1 || d % heads != 0) {
    throw ConfigError("width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (bias_qkv.numel() != 3 * d) {
    throw ShapeError("packed attention bias must have 3D elements");
  }
  AttentionParams p;
  p.heads = heads;
  p.d_k = d / heads;
  p.scale = 1.0f / std::sqrt(static_cast<float>(p.d_k));
  p.w_qkv = &w_qkv;
  p.bias_qkv = &bias_qkv;
  p.w_qp = w_qp;
  return p;
}

RelPosParams make_relpos_params(int64_t heads, const Tensor& w_qkv,
                                const Tensor& bias_qkv, const Tensor& w_r,
                                const Tensor& u, const Tensor& v,
                                const Tensor& r_en, const QuantParams* w_qkv_qp,
                                const QuantParams* w_r_qp) {
  RelPosParams p;
  p.attn = make_attention_params(heads, w_qkv, bias_qkv, w_qkv_qp);
  const int64_t d = w_qkv.dim(0);
  if (w_r.rank() != 2 || w_r.dim(0) != d || w_r.dim(1) != d) {
    throw ShapeError("position projection must be (D, D)");
  }
  if (u.numel() != d || v.numel() != d) {
    throw ShapeError("position bias vectors must have H*d_k elements");
  }
  if (r_en.rank() != 2 || r_en.dim(1) != d || r_en.dim(0) % 2 != 1) {
    throw ShapeError("position table must be (2L-1, D), got " +
                     r_en.shape().to_string());
  }
  p.w_r = &w_r;
  p.w_r_qp = w_r_qp;
  p.u = &u;
  p.v = &v;
  p.r_en = &r_en;
  return p;
}

Graph canonicalize_commutative(const Graph& g) {
  Graph out = g;
  for (Node& n : out.nodes) {
    if ((n.kind == OpKind::Add || n.kind == OpKind::Mul) && n.inputs.size() == 2 &&
        out.has_initializer(n.inputs[0]) && !out.has_initializer(n.inputs[1])) {
      std::swap(n.inputs[0], n.inputs[1]);
    }
  }
  return out;
}

namespace {

struct PatternCtx {
  const Graph& g;
  std::map<std::string, const Node*> producer;
  std::map<std::string, std::vector<const Node*>> consumers;
  std::set<std::string> graph_outputs;

  explicit PatternCtx(const Graph& graph)
      : g(graph),
        consumers(build_consumers(graph)),
        graph_outputs(graph.outputs.begin(), graph.outputs.end()) {
    for (const Node& n : g.nodes) {
      for (const std::string& out : n.outputs) producer[out] = &n;
    }
  }

  // Producer of `value` if it has the expected kind, else nullptr.
  const Node* prod(const std::string& value, OpKind kind) const {
    const auto it = producer.find(value);
    if (it == producer.end() || it->second->kind != kind) return nullptr;
    return it->second;
  }
  bool is_init(const std::string& name) const { return g.has_initializer(name); }
  const Tensor* init(const std::string& name) const {
    return is_init(name) ? &g.initializer(name) : nullptr;
  }
  // F32 scalar initializer's value, if it is one.
  std::optional<float> scalar_init(const std::string& name) const {
    const Tensor* t = init(name);
    if (t == nullptr || t->dtype() != DType::F32 || t->numel() != 1) {
      return std::nullopt;
    }
    return t->f32()[0];
  }
  // Sole consumer of `value`, provided it is not also a graph output.
  const Node* sole_consumer(const std::string& value) const {
    if (graph_outputs.count(value) > 0) return nullptr;
    const auto it = consumers.find(value);
    if (it == consumers.end() || it->second.size() != 1) return nullptr;
    return it->second[0];
  }
};

struct Match {
  std::vector<const Node*> nodes;  // every node the rewrite removes
  Node replacement;
  std::map<std::string, Tensor> new_initializers;
};

bool ints_are(const Node& n, const char* key, std::initializer_list<int64_t> want) {
  if (!n.has_attr(key) ||
      !std::holds_alternative<std::vector<int64_t>>(n.attrs.at(key))) {
    return false;
  }
  const auto& got = std::get<std::vector<int64_t>>(n.attrs.at(key));
  return std::equal(got.begin(), got.end(), want.begin(), want.end()) &&
         got.size() == want.size();
}

// Intermediate values of a match must stay internal: consumed only by match
// members and never exported as graph outputs. The final node's outputs are
// the preserved boundary.
bool internals_contained(const PatternCtx& ctx, const std::vector<const Node*>& nodes,
                         const Node* last) {
  const std::set<const Node*> members(nodes.begin(), nodes.end());
  for (const Node* n : nodes) {
    if (n == last) continue;
    for (const std::string& out : n->outputs) {
      if (ctx.graph_outputs.count(out) > 0) return false;
      const auto it = ctx.consumers.find(out);
      if (it == ctx.consumers.end()) return false;
      for (const Node* c : it->second) {
        if (members.count(c) == 0) return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// layer norm: ReduceMean, Sub, Pow(2), ReduceMean, Add(eps), Sqrt, Div,
// Mul(gamma), Add(beta) -> LayerNorm
// ---------------------------------------------------------------------------

std::optional<Match> match_layer_norm(const PatternCtx& ctx, const Node& anchor,
                                      std::vector<std::string>& diags) {
  if (anchor.kind != OpKind::Add || anchor.inputs.size() != 2) return std::nullopt;
  const std::string& beta_name = anchor.inputs[1];
  const Tensor* beta = ctx.init(beta_name);
  if (beta == nullptr || beta->rank() != 1) return std::nullopt;

  const Node* mul = ctx.prod(anchor.inputs[0], OpKind::Mul);
  if (mul == nullptr) return std::nullopt;
  const std::string& gamma_name = mul->inputs[1];
  const Tensor* gamma = ctx.init(gamma_name);
  if (gamma == nullptr || gamma->rank() != 1) return std::nullopt;

  const Node* div = ctx.prod(mul->inputs[0], OpKind::Div);
  if (div == nullptr) return std::nullopt;
  const Node* sqrt_n = ctx.prod(div->inputs[1], OpKind::Sqrt);
  if (sqrt_n == nullptr) return std::nullopt;
  const Node* add_eps = ctx.prod(sqrt_n->inputs[0], OpKind::Add);
  if (add_eps == nullptr) return std::nullopt;
  const auto eps = ctx.scalar_init(add_eps->inputs[1]);
  if (!eps) return std::nullopt;
  const Node* var = ctx.prod(add_eps->inputs[0], OpKind::ReduceMean);
  if (var == nullptr || !ints_are(*var, "axes", {-1}) || var->attr_int("keepdims") != 1) {
    return std::nullopt;
  }
  const Node* pow_n = ctx.prod(var->inputs[0], OpKind::Pow);
  if (pow_n == nullptr) return std::nullopt;
  const auto exponent = ctx.scalar_init(pow_n->inputs[1]);
  if (!exponent || *exponent != 2.0f) return std::nullopt;
  const Node* sub = ctx.prod(pow_n->inputs[0], OpKind::Sub);
  if (sub == nullptr || sub->outputs[0] != div->inputs[0]) return std::nullopt;
  const Node* mean = ctx.prod(sub->inputs[1], OpKind::ReduceMean);
  if (mean == nullptr || !ints_are(*mean, "axes", {-1}) ||
      mean->attr_int("keepdims") != 1) {
    return std::nullopt;
  }
  const std::string& x = sub->inputs[0];
  if (mean->inputs[0] != x) return std::nullopt;

  Match m;
  m.nodes = {mean, sub, pow_n, var, add_eps, sqrt_n, div, mul, &anchor};
  if (*eps <= 0.0f) {
    diags.push_back("anchor " + anchor.id + ": eps is not positive");
    return std::nullopt;
  }
  if (gamma->numel() != beta->numel()) {
    diags.push_back("anchor " + anchor.id + ": gamma/beta length mismatch");
    return std::nullopt;
  }
  if (!internals_contained(ctx, m.nodes, &anchor)) {
    diags.push_back("anchor " + anchor.id + ": intermediate value escapes pattern");
    return std::nullopt;
  }
  m.replacement = Node{anchor.id,
                       OpKind::LayerNorm,
                       {x, gamma_name, beta_name},
                       anchor.outputs,
                       {{"eps", static_cast<double>(*eps)}}};
  return m;
}

// ---------------------------------------------------------------------------
// attention helpers
// ---------------------------------------------------------------------------

// MatMul(x, W) -> Add(., b) -> Reshape [0, H, d_k] -> Transpose [1, 0, 2]
struct ProjPath {
  const Node* mm;
  const Node* add;
  const Node* rs;
  const Node* tp;
  std::string x, w, b;
  int64_t heads = 0, d_k = 0;
};

std::optional<ProjPath> match_projection(const PatternCtx& ctx,
                                         const std::string& head_value) {
  ProjPath p;
  p.tp = ctx.prod(head_value, OpKind::Transpose);
  if (p.tp == nullptr || !ints_are(*p.tp, "perm", {1, 0, 2})) return std::nullopt;
  p.rs = ctx.prod(p.tp->inputs[0], OpKind::Reshape);
  if (p.rs == nullptr) return std::nullopt;
  const auto& shape = std::get<std::vector<int64_t>>(p.rs->attrs.at("shape"));
  if (shape.size() != 3 || shape[0] != 0 || shape[1] < 1 || shape[2] < 1) {
    return std::nullopt;
  }
  p.heads = shape[1];
  p.d_k = shape[2];
  p.add = ctx.prod(p.rs->inputs[0], OpKind::Add);
  if (p.add == nullptr) return std::nullopt;
  p.b = p.add->inputs[1];
  const Tensor* bias = ctx.init(p.b);
  if (bias == nullptr || bias->rank() != 1) return std::nullopt;
  p.mm = ctx.prod(p.add->inputs[0], OpKind::MatMul);
  if (p.mm == nullptr) return std::nullopt;
  p.x = p.mm->inputs[0];
  p.w = p.mm->inputs[1];
  if (ctx.is_init(p.x)) return std::nullopt;
  const Tensor* w = ctx.init(p.w);
  if (w == nullptr || w->rank() != 2) return std::nullopt;
  return p;
}

// Head merge below the context matmul: Transpose [1,0,2] -> Reshape [0, D].
struct MergePath {
  const Node* tp;
  const Node* rs;
};

std::optional<MergePath> match_merge(const PatternCtx& ctx, const std::string& ctx_value,
                                     int64_t d) {
  MergePath m;
  m.tp = ctx.sole_consumer(ctx_value);
  if (m.tp == nullptr || m.tp->kind != OpKind::Transpose ||
      !ints_are(*m.tp, "perm", {1, 0, 2})) {
    return std::nullopt;
  }
  m.rs = ctx.sole_consumer(m.tp->outputs[0]);
  if (m.rs == nullptr || m.rs->kind != OpKind::Reshape ||
      !ints_are(*m.rs, "shape", {0, d})) {
    return std::nullopt;
  }
  return m;
}

// Copies W into the given column block of the packed (D, 3D) matrix.
void pack_block(Tensor& packed, const Tensor& w, int64_t block) {
  const int64_t d = w.dim(0);
  float* dst = packed.f32().data();
  const float* src = w.f32().data();
  for (int64_t i = 0; i < d; ++i) {
    std::copy(src + i * d, src + (i + 1) * d, dst + i * 3 * d + block * d);
  }
}

// Unique name for a pass-created initializer.
std::string fresh_name(const PatternCtx& ctx, std::string base) {
  auto taken = [&](const std::string& name) {
    if (ctx.g.has_initializer(name) || ctx.producer.count(name) > 0) return true;
    return ctx.g.find_input(name) != nullptr;
  };
  while (taken(base)) base += "_";
  return base;
}

bool projections_consistent(const PatternCtx& ctx, const ProjPath& q,
                            const ProjPath& k, const ProjPath& v,
                            const std::string& anchor_id,
                            std::vector<std::string>& diags) {
  if (q.x != k.x || q.x != v.x) {
    diags.push_back("anchor " + anchor_id + ": projections read different sources");
    return false;
  }
  if (q.heads != k.heads || q.heads != v.heads || q.d_k != k.d_k || q.d_k != v.d_k) {
    diags.push_back("anchor " + anchor_id + ": head layouts disagree");
    return false;
  }
  const int64_t d = q.heads * q.d_k;
  for (const ProjPath* p : {&q, &k, &v}) {
    const Tensor& w = *ctx.init(p->w);
    if (w.dim(0) != d || w.dim(1) != d || ctx.init(p->b)->numel() != d) {
      diags.push_back("anchor " + anchor_id + ": projection " + p->mm->id +
                      " has inconsistent width");
      return false;
    }
  }
  return true;
}

bool scale_matches(const PatternCtx& ctx, const std::string& scalar_name, int64_t d_k) {
  const auto val = ctx.scalar_init(scalar_name);
  if (!val) return false;
  const float want = std::sqrt(static_cast<float>(d_k));
  return std::abs(*val - want) <= 1e-5f * std::max(1.0f, want);
}

Match build_packed_match(const PatternCtx& ctx, OpKind kind,
                         std::vector<const Node*> nodes, const Node* last,
                         const ProjPath& q, const ProjPath& k, const ProjPath& v,
                         std::vector<std::string> extra_inputs) {
  const int64_t d = q.heads * q.d_k;
  Tensor w_qkv = Tensor::zeros(DType::F32, Shape{d, 3 * d});
  pack_block(w_qkv, *ctx.init(q.w), 0);
  pack_block(w_qkv, *ctx.init(k.w), 1);
  pack_block(w_qkv, *ctx.init(v.w), 2);
  Tensor bias_qkv = Tensor::zeros(DType::F32, Shape{3 * d});
  float* bp = bias_qkv.f32().data();
  std::copy_n(ctx.init(q.b)->f32().data(), d, bp);
  std::copy_n(ctx.init(k.b)->f32().data(), d, bp + d);
  std::copy_n(ctx.init(v.b)->f32().data(), d, bp + 2 * d);

  Match m;
  m.nodes = std::move(nodes);
  const std::string w_name = fresh_name(ctx, last->id + "_w_qkv");
  const std::string b_name = fresh_name(ctx, last->id + "_bias_qkv");
  std::vector<std::string> inputs = {q.x, w_name, b_name};
  inputs.insert(inputs.end(), extra_inputs.begin(), extra_inputs.end());
  m.replacement = Node{last->id, kind, std::move(inputs), last->outputs,
                       {{"heads", q.heads}}};
  m.new_initializers.emplace(w_name, std::move(w_qkv));
  m.new_initializers.emplace(b_name, std::move(bias_qkv));
  return m;
}

// ---------------------------------------------------------------------------
// plain attention, anchored at Softmax
// ---------------------------------------------------------------------------

std::optional<Match> match_attention(const PatternCtx& ctx, const Node& anchor,
                                     std::vector<std::string>& diags) {
  if (anchor.kind != OpKind::Softmax) return std::nullopt;
  const Node* div = ctx.prod(anchor.inputs[0], OpKind::Div);
  if (div == nullptr) return std::nullopt;
  const Node* logits = ctx.prod(div->inputs[0], OpKind::MatMul);
  if (logits == nullptr) return std::nullopt;
  const auto q = match_projection(ctx, logits->inputs[0]);
  if (!q) return std::nullopt;
  const Node* kt = ctx.prod(logits->inputs[1], OpKind::Transpose);
  if (kt == nullptr || !ints_are(*kt, "perm", {0, 2, 1})) return std::nullopt;
  const auto k = match_projection(ctx, kt->inputs[0]);
  if (!k) return std::nullopt;
  const Node* ctx_mm = ctx.sole_consumer(anchor.outputs[0]);
  if (ctx_mm == nullptr || ctx_mm->kind != OpKind::MatMul ||
      ctx_mm->inputs[0] != anchor.outputs[0]) {
    return std::nullopt;
  }
  const auto v = match_projection(ctx, ctx_mm->inputs[1]);
  if (!v) return std::nullopt;

  if (!projections_consistent(ctx, *q, *k, *v, anchor.id, diags)) return std::nullopt;
  if (!scale_matches(ctx, div->inputs[1], q->d_k)) {
    diags.push_back("anchor " + anchor.id + ": scale constant is not sqrt(d_k)");
    return std::nullopt;
  }
  const auto merge = match_merge(ctx, ctx_mm->outputs[0], q->heads * q->d_k);
  if (!merge) return std::nullopt;

  std::vector<const Node*> nodes = {
      q->mm, q->add, q->rs, q->tp, k->mm, k->add, k->rs, k->tp,
      v->mm, v->add, v->rs, v->tp, kt,    logits, div,   &anchor,
      ctx_mm, merge->tp, merge->rs};
  if (!internals_contained(ctx, nodes, merge->rs)) {
    diags.push_back("anchor " + anchor.id + ": intermediate value escapes pattern");
    return std::nullopt;
  }
  return build_packed_match(ctx, OpKind::FusedAttention, std::move(nodes),
                            merge->rs, *q, *k, *v, {});
}

// ---------------------------------------------------------------------------
// relative-positional attention, anchored at Softmax
// ---------------------------------------------------------------------------

std::optional<Match> match_relpos_attention(const PatternCtx& ctx, const Node& anchor,
                                            std::vector<std::string>& diags) {
  if (anchor.kind != OpKind::Softmax) return std::nullopt;
  const Node* div = ctx.prod(anchor.inputs[0], OpKind::Div);
  if (div == nullptr) return std::nullopt;
  const Node* sum = ctx.prod(div->inputs[0], OpKind::Add);
  if (sum == nullptr) return std::nullopt;

  // Content term: MatMul(Add(q_heads, u), k_heads^T).
  const Node* ac = ctx.prod(sum->inputs[0], OpKind::MatMul);
  if (ac == nullptr) return std::nullopt;
  const Node* q_u = ctx.prod(ac->inputs[0], OpKind::Add);
  if (q_u == nullptr) return std::nullopt;
  const std::string& u_name = q_u->inputs[1];
  if (!ctx.is_init(u_name)) return std::nullopt;
  const auto q = match_projection(ctx, q_u->inputs[0]);
  if (!q) return std::nullopt;
  const Node* k_t = ctx.prod(ac->inputs[1], OpKind::Transpose);
  if (k_t == nullptr || !ints_are(*k_t, "perm", {0, 2, 1})) return std::nullopt;
  const auto k = match_projection(ctx, k_t->inputs[0]);
  if (!k) return std::nullopt;

  // Position term: MatMul(Add(q_heads, v), p_heads^T) skewed by the explicit
  // pad / reshape / slice / reshape / slice chain.
  const Node* skew_slice2 = ctx.prod(sum->inputs[1], OpKind::Slice);
  if (skew_slice2 == nullptr || skew_slice2->attr_int("axis") != 2 ||
      skew_slice2->attr_int("start") != 0) {
    return std::nullopt;
  }
  const int64_t seq = skew_slice2->attr_int("end");
  if (seq < 1) return std::nullopt;
  const Node* skew_rs2 = ctx.prod(skew_slice2->inputs[0], OpKind::Reshape);
  if (skew_rs2 == nullptr || !ints_are(*skew_rs2, "shape", {0, seq, 2 * seq - 1})) {
    return std::nullopt;
  }
  const Node* skew_slice1 = ctx.prod(skew_rs2->inputs[0], OpKind::Slice);
  if (skew_slice1 == nullptr || skew_slice1->attr_int("axis") != 1 ||
      skew_slice1->attr_int("start") != 1 || skew_slice1->attr_int("end") != 2 * seq) {
    return std::nullopt;
  }
  const Node* skew_rs1 = ctx.prod(skew_slice1->inputs[0], OpKind::Reshape);
  if (skew_rs1 == nullptr || !ints_are(*skew_rs1, "shape", {0, 2 * seq, seq})) {
    return std::nullopt;
  }
  const Node* pad = ctx.prod(skew_rs1->inputs[0], OpKind::Pad);
  if (pad == nullptr || !ints_are(*pad, "pads_begin", {0, 0, 1}) ||
      !ints_are(*pad, "pads_end", {0, 0, 0}) ||
      pad->attr_float_or("value", 0.0) != 0.0) {
    return std::nullopt;
  }
  const Node* bd_mm = ctx.prod(pad->inputs[0], OpKind::MatMul);
  if (bd_mm == nullptr) return std::nullopt;
  const Node* q_v = ctx.prod(bd_mm->inputs[0], OpKind::Add);
  if (q_v == nullptr || q_v->inputs[0] != q_u->inputs[0]) return std::nullopt;
  const std::string& v_name = q_v->inputs[1];
  if (!ctx.is_init(v_name)) return std::nullopt;
  const Node* p_t = ctx.prod(bd_mm->inputs[1], OpKind::Transpose);
  if (p_t == nullptr || !ints_are(*p_t, "perm", {0, 2, 1})) return std::nullopt;
  const Node* p_tp = ctx.prod(p_t->inputs[0], OpKind::Transpose);
  if (p_tp == nullptr || !ints_are(*p_tp, "perm", {1, 0, 2})) return std::nullopt;
  const Node* p_rs = ctx.prod(p_tp->inputs[0], OpKind::Reshape);
  if (p_rs == nullptr || !ints_are(*p_rs, "shape", {0, q->heads, q->d_k})) {
    return std::nullopt;
  }
  const Node* p_mm = ctx.prod(p_rs->inputs[0], OpKind::MatMul);
  if (p_mm == nullptr) return std::nullopt;
  const std::string& r_en_name = p_mm->inputs[0];
  const std::string& w_r_name = p_mm->inputs[1];
  // The embedding table may be a graph input or an initializer, but never an
  // intermediate value.
  if (ctx.producer.count(r_en_name) > 0) return std::nullopt;
  const Tensor* w_r = ctx.init(w_r_name);
  if (w_r == nullptr || w_r->rank() != 2) return std::nullopt;

  // Value path below the softmax.
  const Node* ctx_mm = ctx.sole_consumer(anchor.outputs[0]);
  if (ctx_mm == nullptr || ctx_mm->kind != OpKind::MatMul ||
      ctx_mm->inputs[0] != anchor.outputs[0]) {
    return std::nullopt;
  }
  const auto v = match_projection(ctx, ctx_mm->inputs[1]);
  if (!v) return std::nullopt;

  if (!projections_consistent(ctx, *q, *k, *v, anchor.id, diags)) return std::nullopt;
  const int64_t d = q->heads * q->d_k;
  if (w_r->dim(0) != d || w_r->dim(1) != d) {
    diags.push_back("anchor " + anchor.id + ": position projection width mismatch");
    return std::nullopt;
  }
  const Tensor* u_t = ctx.init(u_name);
  const Tensor* v_t = ctx.init(v_name);
  if (u_t->numel() != d || v_t->numel() != d) {
    diags.push_back("anchor " + anchor.id + ": position bias size mismatch");
    return std::nullopt;
  }
  const Tensor* r_en = ctx.init(r_en_name);
  if (r_en != nullptr && (r_en->rank() != 2 || r_en->dim(0) != 2 * seq - 1 ||
                          r_en->dim(1) != d)) {
    diags.push_back("anchor " + anchor.id + ": position table is not (2L-1, D)");
    return std::nullopt;
  }
  if (!scale_matches(ctx, div->inputs[1], q->d_k)) {
    diags.push_back("anchor " + anchor.id + ": scale constant is not sqrt(d_k)");
    return std::nullopt;
  }
  const auto merge = match_merge(ctx, ctx_mm->outputs[0], d);
  if (!merge) return std::nullopt;

  std::vector<const Node*> nodes = {
      q->mm, q->add, q->rs, q->tp, k->mm, k->add, k->rs, k->tp,
      v->mm, v->add, v->rs, v->tp, p_mm,  p_rs,   p_tp,  p_t,
      q_u,   q_v,    k_t,   ac,    bd_mm, pad,    skew_rs1, skew_slice1,
      skew_rs2, skew_slice2, sum,  div,   &anchor, ctx_mm, merge->tp, merge->rs};
  if (!internals_contained(ctx, nodes, merge->rs)) {
    diags.push_back("anchor " + anchor.id + ": intermediate value escapes pattern");
    return std::nullopt;
  }
  return build_packed_match(ctx, OpKind::FusedRelPosAttention, std::move(nodes),
                            merge->rs, *q, *k, *v,
                            {w_r_name, u_name, v_name, r_en_name});
}

// ---------------------------------------------------------------------------
// shared rewrite driver
// ---------------------------------------------------------------------------

void gc_initializers(Graph& g) {
  std::set<std::string> referenced;
  for (const Node& n : g.nodes) {
    for (const std::string& in : n.inputs) referenced.insert(in);
  }
  for (const std::string& out : g.outputs) referenced.insert(out);
  for (auto it = g.initializers.begin(); it != g.initializers.end();) {
    if (referenced.count(it->first) == 0) {
      g.quant_params.erase(it->first);
      it = g.initializers.erase(it);
    } else {
      ++it;
    }
  }
}

using MatchFn = std::function<std::optional<Match>(
    const PatternCtx&, const Node&, std::vector<std::string>&)>;

std::pair<Graph, FusionReport> apply_rule(const Graph& g, const std::string& rule,
                                          const MatchFn& matcher) {
  Graph canon = canonicalize_commutative(g);
  const PatternCtx ctx(canon);
  FusionReport report;
  report.rule = rule;

  std::set<const Node*> claimed;
  std::vector<Match> matches;
  for (const Node& n : canon.nodes) {
    auto m = matcher(ctx, n, report.diagnostics);
    if (!m) continue;
    const bool overlap = std::any_of(m->nodes.begin(), m->nodes.end(),
                                     [&](const Node* p) { return claimed.count(p) > 0; });
    if (overlap) {
      report.diagnostics.push_back("anchor " + n.id + ": overlaps an earlier match");
      continue;
    }
    claimed.insert(m->nodes.begin(), m->nodes.end());
    matches.push_back(std::move(*m));
  }

  Graph out;
  out.name = canon.name;
  out.inputs = canon.inputs;
  out.outputs = canon.outputs;
  out.initializers = canon.initializers;
  out.quant_params = canon.quant_params;

  std::map<const Node*, const Match*> replace_at;
  for (const Match& m : matches) {
    for (const Node* n : m.nodes) {
      if (n->id == m.replacement.id) replace_at[n] = &m;
    }
    report.matches++;
    report.nodes_removed += static_cast<int64_t>(m.nodes.size());
    report.nodes_added++;
    report.match_outputs.push_back(m.replacement.outputs[0]);
    for (const auto& [name, t] : m.new_initializers) {
      out.initializers.emplace(name, t);
    }
  }
  for (const Node& n : canon.nodes) {
    const auto rit = replace_at.find(&n);
    if (rit != replace_at.end()) {
      out.nodes.push_back(rit->second->replacement);
    } else if (claimed.count(&n) == 0) {
      out.nodes.push_back(n);
    }
  }
  gc_initializers(out);
  return {std::move(out), std::move(report)};
}

}  // namespace

std::pair<Graph, FusionReport> fuse_layer_norm(const Graph& g) {
  return apply_rule(g, "layer_norm", match_layer_norm);
}

std::pair<Graph, FusionReport> fuse_attention(const Graph& g) {
  return apply_rule(g, "attention", match_attention);
}

std::pair<Graph, FusionReport> fuse_relpos_attention(const Graph& g) {
  return apply_rule(g, "relpos_attention", match_relpos_attention);
}

const std::vector<std::string>& default_fusion_rules() {
  static const std::vector<std::string> rules = {"layer_norm", "relpos_attention",
                                                 "attention"};
  return rules;
}

std::pair<Graph, std::vector<FusionReport>> fusion_pipeline(
    const Graph& g, const std::vector<std::string>& rules) {
  validate_or_throw(g);
  Graph cur = g;
  std::vector<FusionReport> reports;
  for (const std::string& rule : rules) {
    std::pair<Graph, FusionReport> step;
    if (rule == "layer_norm") {
      step = fuse_layer_norm(cur);
    } else if (rule == "relpos_attention") {
      step = fuse_relpos_attention(cur);
    } else if (rule == "attention") {
      step = fuse_attention(cur);
    } else {
      throw ConfigError("unknown fusion rule '" + rule + "'");
    }
    validate_or_throw(step.first);
    cur = std::move(step.first);
    reports.push_back(std::move(step.second));
  }
  return {std::move(cur), std::move(reports)};
}

}  // namespace fusegraph
