// SPDX-License-Identifier: Apache-2.0

#include "fusegraph/executor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>

namespace fusegraph {

void parallel_chunks(int64_t chunk_count, int max_workers,
                     const std::function<void(int64_t)>& fn) {
  if (chunk_count <= 0) return;
  const int workers = static_cast<int>(
      std::min<int64_t>(std::max(max_workers, 1), chunk_count));
  if (workers == 1) {
    for (int64_t c = 0; c < chunk_count; ++c) fn(c);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  std::exception_ptr first_error;
  std::mutex error_mu;
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int64_t c = t; c < chunk_count; c += workers) fn(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

using RowMatrixi = Eigen::Matrix<int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixi8 = Eigen::Matrix<int8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedConst = Eigen::Map<const RowMatrixf, 0, Eigen::OuterStride<>>;
using Strided = Eigen::Map<RowMatrixf, 0, Eigen::OuterStride<>>;
using RowVecConst = Eigen::Map<const Eigen::RowVectorXf>;

int64_t leading_rows(const Tensor& x) {
  if (x.rank() < 1) throw ShapeError("matrix product needs rank >= 1");
  return x.numel() / x.dim(x.rank() - 1);
}

// out(..., N) = x(..., K) * w(K, N) (+ bias). Leading dims flatten to rows;
// the fixed row chunking keeps bits independent of the worker count.
Tensor fgemm_bias(const Tensor& x, const Tensor& w, const Tensor* bias,
                  int max_workers) {
  if (w.rank() != 2 || w.dtype() != DType::F32)
    throw ShapeError("projection weight must be a rank-2 F32 tensor");
  const int64_t k = x.dim(x.rank() - 1);
  const int64_t n = w.dim(1);
  if (w.dim(0) != k)
    throw ShapeError("projection inner dims disagree: " + std::to_string(k) +
                     " vs " + std::to_string(w.dim(0)));
  if (bias != nullptr && bias->numel() != n)
    throw ShapeError("projection bias length mismatch");
  const int64_t m = leading_rows(x);
  std::vector<int64_t> out_dims(x.shape().dims());
  out_dims.back() = n;
  Tensor out = Tensor::zeros(DType::F32, Shape(std::move(out_dims)));
  const float* a = x.f32().data();
  const float* b = w.f32().data();
  float* c = out.f32().data();
  const float* bias_ptr = bias == nullptr ? nullptr : bias->f32().data();
  const int64_t chunks = (m + kGemmRowChunk - 1) / kGemmRowChunk;
  parallel_chunks(chunks, max_workers, [&](int64_t chunk) {
    const int64_t r0 = chunk * kGemmRowChunk;
    const int64_t r1 = std::min(m, r0 + kGemmRowChunk);
    matmul_row_range(a, b, c, k, n, r0, r1);
    if (bias_ptr != nullptr)
      MatMap(c + r0 * n, r1 - r0, n).rowwise() += RowVecConst(bias_ptr, n);
  });
  return out;
}

// Integer product with run-time activation parameters:
// out = (acc - z_a * colsum) / (s_a * s_w) + bias. I32 accumulation is exact,
// so any chunk schedule yields the same bits.
Tensor qgemm_dequant(const Tensor& x, const Tensor& w_q8,
                     const QuantParams& w_qp, const Tensor* bias,
                     int max_workers) {
  if (w_q8.rank() != 2 || w_q8.dtype() != DType::I8)
    throw ShapeError("quantized weight must be a rank-2 I8 tensor");
  if (x.dtype() != DType::F32)
    throw ShapeError("quantized product input must be F32");
  const int64_t k = x.dim(x.rank() - 1);
  const int64_t n = w_q8.dim(1);
  if (w_q8.dim(0) != k)
    throw ShapeError("quantized product inner dims disagree: " +
                     std::to_string(k) + " vs " + std::to_string(w_q8.dim(0)));
  if (bias != nullptr && bias->numel() != n)
    throw ShapeError("quantized product bias length mismatch");
  const int64_t m = leading_rows(x);
  std::vector<int64_t> out_dims(x.shape().dims());
  out_dims.back() = n;
  Tensor out = Tensor::zeros(DType::F32, Shape(std::move(out_dims)));
  if (m == 0) return out;

  const QuantParams aq = dynamic_qparams(x);
  const QuantTensor qx = quantize(x, aq);
  const RowMatrixi qa =
      Eigen::Map<const RowMatrixi8>(qx.data.i8().data(), m, k).cast<int32_t>();
  const RowMatrixi qw =
      Eigen::Map<const RowMatrixi8>(w_q8.i8().data(), k, n).cast<int32_t>();
  const Eigen::Matrix<int32_t, 1, Eigen::Dynamic> colsum = qw.colwise().sum();

  const float inv_scale = 1.0f / (aq.s * w_qp.s);
  const int64_t za = aq.z;
  const float* bias_ptr = bias == nullptr ? nullptr : bias->f32().data();
  float* c = out.f32().data();
  const int64_t chunks = (m + kGemmRowChunk - 1) / kGemmRowChunk;
  parallel_chunks(chunks, max_workers, [&](int64_t chunk) {
    const int64_t r0 = chunk * kGemmRowChunk;
    const int64_t r1 = std::min(m, r0 + kGemmRowChunk);
    const RowMatrixi acc = qa.middleRows(r0, r1 - r0) * qw;
    for (int64_t i = 0; i < r1 - r0; ++i) {
      float* dst = c + (r0 + i) * n;
      for (int64_t j = 0; j < n; ++j) {
        const int64_t centered = static_cast<int64_t>(acc(i, j)) - za * colsum(j);
        dst[j] = static_cast<float>(centered) * inv_scale +
                 (bias_ptr == nullptr ? 0.0f : bias_ptr[j]);
      }
    }
  });
  return out;
}

// Additive mask resolved to a per-head (L, L) base pointer.
struct MaskView {
  const float* base = nullptr;
  int64_t head_stride = 0;  // 0 = one mask shared by every head
};

MaskView make_mask_view(const Tensor* mask, int64_t heads, int64_t L) {
  if (mask == nullptr) return {};
  if (mask->dtype() != DType::F32) throw ShapeError("mask must be F32");
  if (mask->rank() == 2) {
    if (mask->dim(0) != L || mask->dim(1) != L)
      throw ShapeError("mask must be (L, L), got " + mask->shape().to_string());
    return {mask->f32().data(), 0};
  }
  if (mask->rank() == 3) {
    if (mask->dim(1) != L || mask->dim(2) != L)
      throw ShapeError("mask must be (1 or heads, L, L), got " +
                       mask->shape().to_string());
    if (mask->dim(0) == 1) return {mask->f32().data(), 0};
    if (mask->dim(0) == heads) return {mask->f32().data(), L * L};
    throw ShapeError("mask head dim must be 1 or the head count");
  }
  throw ShapeError("mask must be rank 2 or 3");
}

void softmax_rows_inplace(RowMatrixf& logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const float mx = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - mx).exp();
    logits.row(i) /= logits.row(i).sum();  // >= exp(0), never zero
  }
}

// Scaled dot-product over head column blocks of row-major buffers. q/k/v
// point at the first head column; one chunk per head.
void attention_core(const float* q, const float* k, const float* v,
                    int64_t in_stride, int64_t L, int64_t heads, int64_t dk,
                    float scale, const MaskView& mask, float* out,
                    int64_t out_stride, int max_workers) {
  parallel_chunks(heads, max_workers, [&](int64_t h) {
    const Eigen::OuterStride<> stride(in_stride);
    StridedConst qb(q + h * dk, L, dk, stride);
    StridedConst kb(k + h * dk, L, dk, stride);
    StridedConst vb(v + h * dk, L, dk, stride);
    RowMatrixf logits = qb * kb.transpose();
    logits *= scale;
    if (mask.base != nullptr)
      logits += ConstMatMap(mask.base + h * mask.head_stride, L, L);
    softmax_rows_inplace(logits);
    Strided ob(out + h * dk, L, dk, Eigen::OuterStride<>(out_stride));
    ob.noalias() = logits * vb;
  });
}

void check_attention_input(const Tensor& x, const AttentionParams& p) {
  if (x.rank() != 2 || x.dtype() != DType::F32)
    throw ShapeError("attention input must be a rank-2 F32 tensor");
  if (x.dim(1) != p.heads * p.d_k)
    throw ShapeError("attention input width " + std::to_string(x.dim(1)) +
                     " != heads * d_k = " + std::to_string(p.heads * p.d_k));
}

Tensor project_qkv(const Tensor& x, const AttentionParams& p, int max_workers) {
  return p.w_qp != nullptr
             ? qgemm_dequant(x, *p.w_qkv, *p.w_qp, p.bias_qkv, max_workers)
             : fgemm_bias(x, *p.w_qkv, p.bias_qkv, max_workers);
}

}  // namespace

Tensor attention_forward(const Tensor& x, const AttentionParams& p,
                         const Tensor* mask) {
  check_attention_input(x, p);
  if (p.w_qp != nullptr || p.w_qkv->dtype() != DType::F32)
    throw ShapeError("reference attention path requires float weights");
  const int64_t d = p.heads * p.d_k;
  Tensor proj[3];
  for (int64_t b = 0; b < 3; ++b) {
    Tensor wb = slice(*p.w_qkv, 1, b * d, (b + 1) * d);
    proj[b] = matmul(x, wb);
    if (p.bias_qkv != nullptr)
      proj[b] = add(proj[b], slice(*p.bias_qkv, 0, b * d, (b + 1) * d));
  }
  Tensor qh = split_heads(proj[0], p.heads);
  Tensor kh = split_heads(proj[1], p.heads);
  Tensor vh = split_heads(proj[2], p.heads);
  Tensor logits = matmul(qh, transpose(kh, {0, 2, 1}));
  logits = mul(logits, Tensor::scalar_f32(p.scale));
  if (mask != nullptr) logits = add(logits, *mask);
  Tensor ctx = matmul(softmax_last_axis(logits), vh);
  return concat_heads(ctx);
}

Tensor fused_attention_forward(const Tensor& x, const AttentionParams& p,
                               const Tensor* mask, int max_workers) {
  check_attention_input(x, p);
  const int64_t d = p.heads * p.d_k;
  const int64_t L = x.dim(0);
  Tensor qkv = project_qkv(x, p, max_workers);
  const MaskView mv = make_mask_view(mask, p.heads, L);
  Tensor out = Tensor::zeros(DType::F32, Shape{L, d});
  const float* base = qkv.f32().data();
  attention_core(base, base + d, base + 2 * d, 3 * d, L, p.heads, p.d_k,
                 p.scale, mv, out.f32().data(), d, max_workers);
  return out;
}

Tensor skew_relative(const Tensor& bd_flat) {
  if (bd_flat.rank() != 3 || bd_flat.dtype() != DType::F32)
    throw ShapeError("skew input must be a rank-3 F32 tensor");
  const int64_t heads = bd_flat.dim(0);
  const int64_t L = bd_flat.dim(1);
  const int64_t w = bd_flat.dim(2);
  if (w != 2 * L - 1)
    throw ShapeError("skew last axis must have extent 2L-1, got " +
                     bd_flat.shape().to_string());
  Tensor out = Tensor::zeros(DType::F32, Shape{heads, L, L});
  const float* src = bd_flat.f32().data();
  float* dst = out.f32().data();
  for (int64_t h = 0; h < heads; ++h)
    for (int64_t i = 0; i < L; ++i)
      for (int64_t j = 0; j < L; ++j)
        dst[(h * L + i) * L + j] = src[(h * L + i) * w + (L - 1) + j - i];
  return out;
}

Tensor relpos_attention_forward(const Tensor& x, const RelPosParams& p,
                                const Tensor* mask, int max_workers) {
  const AttentionParams& a = p.attn;
  check_attention_input(x, a);
  const int64_t d = a.heads * a.d_k;
  const int64_t L = x.dim(0);
  const int64_t w = 2 * L - 1;
  if (p.r_en->rank() != 2 || p.r_en->dim(0) != w || p.r_en->dim(1) != d)
    throw ShapeError("relative embedding must be (2L-1, D), got " +
                     p.r_en->shape().to_string());
  if (p.u->numel() != d || p.v->numel() != d)
    throw ShapeError("content/position bias vectors must have D elements");

  Tensor qkv = project_qkv(x, a, max_workers);
  Tensor pe = p.w_r_qp != nullptr
                  ? qgemm_dequant(*p.r_en, *p.w_r, *p.w_r_qp, nullptr, max_workers)
                  : fgemm_bias(*p.r_en, *p.w_r, nullptr, max_workers);

  const MaskView mv = make_mask_view(mask, a.heads, L);
  Tensor out = Tensor::zeros(DType::F32, Shape{L, d});
  const float* qkv_base = qkv.f32().data();
  const float* pe_base = pe.f32().data();
  const float* u_base = p.u->f32().data();
  const float* v_base = p.v->f32().data();
  float* out_base = out.f32().data();
  const int64_t dk = a.d_k;
  parallel_chunks(a.heads, max_workers, [&](int64_t h) {
    const Eigen::OuterStride<> qkv_stride(3 * d);
    StridedConst qb(qkv_base + h * dk, L, dk, qkv_stride);
    StridedConst kb(qkv_base + d + h * dk, L, dk, qkv_stride);
    StridedConst vb(qkv_base + 2 * d + h * dk, L, dk, qkv_stride);
    StridedConst pb(pe_base + h * dk, w, dk, Eigen::OuterStride<>(d));
    RowMatrixf qu = qb;
    qu.rowwise() += RowVecConst(u_base + h * dk, dk);
    RowMatrixf qv = qb;
    qv.rowwise() += RowVecConst(v_base + h * dk, dk);
    const RowMatrixf ac = qu * kb.transpose();   // (L, L)
    const RowMatrixf bdf = qv * pb.transpose();  // (L, 2L-1)
    RowMatrixf logits(L, L);
    for (int64_t i = 0; i < L; ++i)
      for (int64_t j = 0; j < L; ++j)
        logits(i, j) = (ac(i, j) + bdf(i, (L - 1) + j - i)) * a.scale;
    if (mv.base != nullptr)
      logits += ConstMatMap(mv.base + h * mv.head_stride, L, L);
    softmax_rows_inplace(logits);
    Strided ob(out_base + h * dk, L, dk, Eigen::OuterStride<>(d));
    ob.noalias() = logits * vb;
  });
  return out;
}

Tensor qmatmul_forward(const Tensor& x, const Tensor& w_q8,
                       const QuantParams& w_qp, const Tensor* bias,
                       int max_workers) {
  return qgemm_dequant(x, w_q8, w_qp, bias, max_workers);
}

Tensor qmatmul_forward(const Tensor& x, const QuantTensor& w, const Tensor* bias,
                       int max_workers) {
  return qgemm_dequant(x, w.data, w.qp, bias, max_workers);
}

namespace {

const QuantParams* quant_lookup(const Graph& g, const Node& n,
                                size_t input_index, bool required) {
  const std::string& name = n.inputs[input_index];
  auto it = g.quant_params.find(name);
  if (it != g.quant_params.end()) return &it->second;
  if (required)
    throw ExecError("no quantization parameters for '" + name + "'");
  return nullptr;
}

Shape resolve_reshape(const Node& n, const Tensor& x) {
  std::vector<int64_t> dims = n.attr_ints("shape");
  int64_t infer_at = -1;
  int64_t known = 1;
  for (size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] == 0) {
      if (static_cast<int64_t>(i) >= x.rank())
        throw ShapeError("reshape copies an axis the input does not have");
      dims[i] = x.dim(static_cast<int64_t>(i));
    } else if (dims[i] == -1) {
      if (infer_at >= 0) throw ShapeError("reshape allows a single -1 entry");
      infer_at = static_cast<int64_t>(i);
      continue;
    } else if (dims[i] < 0) {
      throw ShapeError("reshape entries must be -1, 0, or positive");
    }
    known *= dims[i];
  }
  if (infer_at >= 0) {
    if (known == 0 || x.numel() % known != 0)
      throw ShapeError("reshape cannot infer the open axis");
    dims[static_cast<size_t>(infer_at)] = x.numel() / known;
  }
  return Shape(std::move(dims));
}

}  // namespace

Session::Session(Graph graph, WorkerPolicy policy)
    : graph_(std::move(graph)), policy_(policy) {
  validate_or_throw(graph_);
  infer_shapes(graph_);
  plan_ = topo_order(graph_);
  for (const Node* n : plan_)
    for (const std::string& name : n->inputs)
      if (!graph_.has_initializer(name)) refcount_[name] += 1;
  for (const std::string& name : graph_.outputs) refcount_[name] += 1;
}

std::vector<Tensor> Session::eval_node(const Node& n,
                                       const std::vector<const Tensor*>& in) const {
  const int workers = policy_.max_workers;
  switch (n.kind) {
    case OpKind::MatMul:
      return {matmul(*in[0], *in[1])};
    case OpKind::Add:
      return {add(*in[0], *in[1])};
    case OpKind::Sub:
      return {sub(*in[0], *in[1])};
    case OpKind::Mul:
      return {mul(*in[0], *in[1])};
    case OpKind::Div:
      return {div(*in[0], *in[1])};
    case OpKind::Softmax:
      return {softmax_last_axis(*in[0])};
    case OpKind::LogSoftmax:
      return {log_softmax_last_axis(*in[0])};
    case OpKind::Transpose:
      return {transpose(*in[0], n.attr_ints("perm"))};
    case OpKind::Reshape:
      return {in[0]->reshaped(resolve_reshape(n, *in[0]))};
    case OpKind::Concat:
      return {concat(in, n.attr_int("axis"))};
    case OpKind::Split:
      return split_equal(*in[0], n.attr_int("axis"), n.attr_int("parts"));
    case OpKind::Slice:
      return {slice(*in[0], n.attr_int("axis"), n.attr_int("start"),
                    n.attr_int("end"))};
    case OpKind::Pad:
      return {pad_constant(*in[0], n.attr_ints("pads_begin"),
                           n.attr_ints("pads_end"),
                           static_cast<float>(n.attr_float_or("value", 0.0)))};
    case OpKind::ReduceMean:
      return {reduce_mean(*in[0], n.attr_ints("axes"),
                          n.attr_int_or("keepdims", 1) != 0)};
    case OpKind::Sqrt:
      return {elem_sqrt(*in[0])};
    case OpKind::Pow:
      return {elem_pow(*in[0], *in[1])};
    case OpKind::Relu:
      return {relu(*in[0])};
    case OpKind::Sigmoid:
      return {sigmoid(*in[0])};
    case OpKind::Gather:
      return {gather_rows(*in[0], *in[1])};
    case OpKind::Conv1D:
      return {conv1d(*in[0], *in[1], in.size() > 2 ? in[2] : nullptr,
                     n.attr_int("pad"), n.attr_int("groups"))};
    case OpKind::LayerNorm:
      return {layer_norm(*in[0], *in[1], *in[2],
                         static_cast<float>(n.attr_float("eps")))};
    case OpKind::FusedAttention:
    case OpKind::QAttention: {
      const QuantParams* qp =
          quant_lookup(graph_, n, 1, n.kind == OpKind::QAttention);
      AttentionParams p =
          make_attention_params(n.attr_int("heads"), *in[1], *in[2], qp);
      return {fused_attention_forward(*in[0], p, nullptr, workers)};
    }
    case OpKind::FusedRelPosAttention:
    case OpKind::QRelPosAttention: {
      const bool quantized = n.kind == OpKind::QRelPosAttention;
      RelPosParams p = make_relpos_params(
          n.attr_int("heads"), *in[1], *in[2], *in[3], *in[4], *in[5], *in[6],
          quant_lookup(graph_, n, 1, quantized),
          quant_lookup(graph_, n, 3, quantized));
      return {relpos_attention_forward(*in[0], p, nullptr, workers)};
    }
    case OpKind::QMatMul:
      return {qmatmul_forward(*in[0], *in[1], *quant_lookup(graph_, n, 1, true),
                              in.size() > 2 ? in[2] : nullptr, workers)};
  }
  throw ExecError("node " + n.id + ": unhandled operator kind");
}

std::pair<std::map<std::string, Tensor>, RunStats> Session::run(
    const std::map<std::string, Tensor>& inputs) {
  for (const ValueInfo& vi : graph_.inputs) {
    auto it = inputs.find(vi.name);
    if (it == inputs.end())
      throw ConfigError("missing graph input '" + vi.name + "'");
    const Tensor& t = it->second;
    if (t.dtype() != vi.dtype)
      throw ConfigError("input '" + vi.name + "' must be " +
                        dtype_name(vi.dtype) + ", got " + dtype_name(t.dtype()));
    if (t.rank() != static_cast<int64_t>(vi.dims.size()))
      throw ConfigError("input '" + vi.name + "' rank mismatch");
    for (size_t i = 0; i < vi.dims.size(); ++i)
      if (!vi.dims[i].symbolic && vi.dims[i].value != t.dim(static_cast<int64_t>(i)))
        throw ConfigError("input '" + vi.name + "' extent mismatch at axis " +
                          std::to_string(i) + ": expected " +
                          vi.dims[i].to_string() + ", got " +
                          std::to_string(t.dim(static_cast<int64_t>(i))));
  }
  for (const auto& [name, t] : inputs) {
    (void)t;
    if (graph_.find_input(name) == nullptr)
      throw ConfigError("unexpected input '" + name + "'");
  }

  RunStats stats;
  std::map<std::string, Tensor> table;
  std::map<std::string, int> refs = refcount_;
  int64_t live = 0;

  auto insert_value = [&](const std::string& name, Tensor t) {
    const int64_t bytes = t.byte_size();
    live += bytes;
    stats.peak_value_bytes = std::max(stats.peak_value_bytes, live);
    auto it = refs.find(name);
    if (it == refs.end() || it->second == 0) {
      live -= bytes;  // unconsumed value, dropped immediately
      return;
    }
    table.insert_or_assign(name, std::move(t));
  };
  auto release = [&](const std::string& name) {
    if (graph_.has_initializer(name)) return;
    auto rit = refs.find(name);
    if (rit == refs.end() || rit->second == 0) return;
    if (--rit->second == 0) {
      auto it = table.find(name);
      live -= it->second.byte_size();
      table.erase(it);
    }
  };

  for (const ValueInfo& vi : graph_.inputs)
    insert_value(vi.name, inputs.at(vi.name));

  for (const Node* n : plan_) {
    std::vector<const Tensor*> ins;
    ins.reserve(n->inputs.size());
    for (const std::string& name : n->inputs) {
      if (graph_.has_initializer(name)) {
        ins.push_back(&graph_.initializer(name));
        continue;
      }
      auto it = table.find(name);
      if (it == table.end())
        throw ExecError("node " + n->id + ": value '" + name + "' is not live");
      ins.push_back(&it->second);
    }
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Tensor> outs;
    try {
      outs = eval_node(*n, ins);
    } catch (const Error& e) {
      throw ExecError("node " + n->id + " (" + op_name(n->kind) +
                      "): " + e.what());
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    stats.wall_by_kind[op_name(n->kind)] += dt;
    stats.total_seconds += dt;
    if (outs.size() != n->outputs.size())
      throw ExecError("node " + n->id + ": output arity mismatch");
    for (size_t i = 0; i < outs.size(); ++i)
      insert_value(n->outputs[i], std::move(outs[i]));
    for (const std::string& name : n->inputs) release(name);
  }

  std::map<std::string, Tensor> result;
  for (const std::string& name : graph_.outputs) {
    if (auto it = table.find(name); it != table.end()) {
      result.insert_or_assign(name, it->second);
    } else if (graph_.has_initializer(name)) {
      result.insert_or_assign(name, graph_.initializer(name));
    } else {
      throw ExecError("graph output '" + name + "' was never produced");
    }
  }
  return {std::move(result), stats};
}

}  // namespace fusegraph
