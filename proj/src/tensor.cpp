// SPDX-License-Identifier: Apache-2.0

#include "fusegraph/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>

namespace fusegraph {

const char* dtype_name(DType dt) {
  switch (dt) {
    case DType::F32: return "f32";
    case DType::I8: return "i8";
    case DType::I32: return "i32";
  }
  return "?";
}

DType dtype_from_name(const std::string& name) {
  if (name == "f32") return DType::F32;
  if (name == "i8") return DType::I8;
  if (name == "i32") return DType::I32;
  throw FormatError("unknown dtype name '" + name + "'");
}

int64_t dtype_size(DType dt) {
  switch (dt) {
    case DType::F32: return 4;
    case DType::I8: return 1;
    case DType::I32: return 4;
  }
  return 0;
}

void Shape::check() const {
  for (int64_t d : dims_) {
    if (d < 0) throw ShapeError("negative extent in shape " + to_string());
  }
}

int64_t Shape::numel() const {
  int64_t n = 1;
  for (int64_t d : dims_) n *= d;
  return n;
}

std::string Shape::to_string() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < dims_.size(); ++i) {
    if (i > 0) os << ", ";
    os << dims_[i];
  }
  os << ")";
  return os.str();
}

Tensor Tensor::zeros(DType dt, Shape shape) {
  Tensor t(dt, std::move(shape));
  const size_t n = static_cast<size_t>(t.numel());
  switch (dt) {
    case DType::F32: t.data_ = std::vector<float>(n, 0.0f); break;
    case DType::I8: t.data_ = std::vector<int8_t>(n, 0); break;
    case DType::I32: t.data_ = std::vector<int32_t>(n, 0); break;
  }
  return t;
}

namespace {
template <typename T>
void check_payload(const Shape& shape, const std::vector<T>& data) {
  if (static_cast<int64_t>(data.size()) != shape.numel()) {
    throw ShapeError("buffer length " + std::to_string(data.size()) +
                     " does not match shape " + shape.to_string());
  }
}
}  // namespace

Tensor Tensor::from_f32(Shape shape, std::vector<float> data) {
  check_payload(shape, data);
  Tensor t(DType::F32, std::move(shape));
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::from_i8(Shape shape, std::vector<int8_t> data) {
  check_payload(shape, data);
  Tensor t(DType::I8, std::move(shape));
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::from_i32(Shape shape, std::vector<int32_t> data) {
  check_payload(shape, data);
  Tensor t(DType::I32, std::move(shape));
  t.data_ = std::move(data);
  return t;
}

const void* Tensor::raw_data() const {
  return std::visit([](const auto& v) -> const void* { return v.data(); }, data_);
}

void* Tensor::raw_data() {
  return std::visit([](auto& v) -> void* { return v.data(); }, data_);
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (dtype_ != other.dtype_ || shape_ != other.shape_) return false;
  return std::memcmp(raw_data(), other.raw_data(),
                     static_cast<size_t>(byte_size())) == 0;
}

Tensor Tensor::reshaped(Shape new_shape) const {
  if (new_shape.numel() != numel()) {
    throw ShapeError("reshape " + shape_.to_string() + " -> " +
                     new_shape.to_string() + " changes element count");
  }
  Tensor t = *this;
  t.shape_ = std::move(new_shape);
  return t;
}

ConstMatMap matrix_view(const Tensor& t) {
  if (t.rank() != 2) throw ShapeError("matrix view needs rank 2, got " + t.shape().to_string());
  return {t.f32().data(), t.dim(0), t.dim(1)};
}

MatMap matrix_view(Tensor& t) {
  if (t.rank() != 2) throw ShapeError("matrix view needs rank 2, got " + t.shape().to_string());
  return {t.f32().data(), t.dim(0), t.dim(1)};
}

ConstMatMap matrix_view(std::span<const float> data, int64_t rows, int64_t cols) {
  return {data.data(), rows, cols};
}

MatMap matrix_view(std::span<float> data, int64_t rows, int64_t cols) {
  return {data.data(), rows, cols};
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

void matmul_row_range(const float* a, const float* b, float* c, int64_t k,
                      int64_t n, int64_t row_begin, int64_t row_end) {
  for (int64_t r0 = row_begin; r0 < row_end; r0 += kGemmRowChunk) {
    const int64_t r1 = std::min(r0 + kGemmRowChunk, row_end);
    ConstMatMap am(a + r0 * k, r1 - r0, k);
    ConstMatMap bm(b, k, n);
    MatMap cm(c + r0 * n, r1 - r0, n);
    cm.noalias() = am * bm;
  }
}

namespace {

struct BatchedMatmulShape {
  std::vector<int64_t> batch;  // broadcast batch dims
  int64_t m, k, n;
  std::vector<int64_t> a_batch, b_batch;  // original leading dims
};

BatchedMatmulShape matmul_shapes(const Shape& a, const Shape& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw ShapeError("matmul needs rank >= 2 operands, got " + a.to_string() +
                     " and " + b.to_string());
  }
  BatchedMatmulShape s;
  s.m = a[a.rank() - 2];
  s.k = a[a.rank() - 1];
  const int64_t bk = b[b.rank() - 2];
  s.n = b[b.rank() - 1];
  if (s.k != bk) {
    throw ShapeError("matmul inner dimension mismatch: " + a.to_string() +
                     " vs " + b.to_string());
  }
  s.a_batch.assign(a.dims().begin(), a.dims().end() - 2);
  s.b_batch.assign(b.dims().begin(), b.dims().end() - 2);
  const size_t rank = std::max(s.a_batch.size(), s.b_batch.size());
  std::vector<int64_t> ab(rank, 1), bb(rank, 1);
  std::copy(s.a_batch.begin(), s.a_batch.end(), ab.end() - s.a_batch.size());
  std::copy(s.b_batch.begin(), s.b_batch.end(), bb.end() - s.b_batch.size());
  s.batch.resize(rank);
  for (size_t i = 0; i < rank; ++i) {
    if (ab[i] == bb[i]) {
      s.batch[i] = ab[i];
    } else if (ab[i] == 1 || bb[i] == 1) {
      s.batch[i] = std::max(ab[i], bb[i]);
    } else {
      throw ShapeError("matmul batch dims incompatible: " + a.to_string() +
                       " vs " + b.to_string());
    }
  }
  s.a_batch = std::move(ab);
  s.b_batch = std::move(bb);
  return s;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dtype() != DType::F32 || b.dtype() != DType::F32) {
    throw ShapeError("matmul expects f32 operands");
  }
  const BatchedMatmulShape s = matmul_shapes(a.shape(), b.shape());
  std::vector<int64_t> out_dims = s.batch;
  out_dims.push_back(s.m);
  out_dims.push_back(s.n);
  Tensor out = Tensor::zeros(DType::F32, Shape(out_dims));

  int64_t batches = 1;
  for (int64_t d : s.batch) batches *= d;
  const int64_t a_mat = s.m * s.k;
  const int64_t b_mat = s.k * s.n;
  const int64_t c_mat = s.m * s.n;

  const float* ap = a.f32().data();
  const float* bp = b.f32().data();
  float* cp = out.f32().data();

  const size_t rank = s.batch.size();
  for (int64_t idx = 0; idx < batches; ++idx) {
    // Decompose idx into batch coordinates and apply broadcast strides.
    int64_t rem = idx, a_off = 0, b_off = 0;
    for (size_t i = 0; i < rank; ++i) {
      int64_t stride = 1;
      for (size_t j = i + 1; j < rank; ++j) stride *= s.batch[j];
      const int64_t coord = rem / stride;
      rem %= stride;
      int64_t a_stride = 1, b_stride = 1;
      for (size_t j = i + 1; j < rank; ++j) {
        a_stride *= s.a_batch[j];
        b_stride *= s.b_batch[j];
      }
      if (s.a_batch[i] != 1) a_off += coord * a_stride;
      if (s.b_batch[i] != 1) b_off += coord * b_stride;
    }
    matmul_row_range(ap + a_off * a_mat, bp + b_off * b_mat, cp + idx * c_mat,
                     s.k, s.n, 0, s.m);
  }
  return out;
}

// ---------------------------------------------------------------------------
// softmax / layer norm
// ---------------------------------------------------------------------------

namespace {
void check_last_axis(const Tensor& x, const char* op) {
  if (x.rank() < 1) throw ShapeError(std::string(op) + " needs rank >= 1");
  if (x.dim(x.rank() - 1) == 0) {
    throw ShapeError(std::string(op) + ": empty last axis in " +
                     x.shape().to_string());
  }
}
}  // namespace

Tensor softmax_last_axis(const Tensor& x) {
  check_last_axis(x, "softmax");
  const int64_t d = x.dim(x.rank() - 1);
  const int64_t slices = x.numel() / d;
  Tensor out = Tensor::zeros(DType::F32, x.shape());
  const float* in = x.f32().data();
  float* o = out.f32().data();
  for (int64_t s = 0; s < slices; ++s) {
    const float* row = in + s * d;
    float* orow = o + s * d;
    float mx = row[0];
    for (int64_t i = 1; i < d; ++i) mx = std::max(mx, row[i]);
    float sum = 0.0f;
    for (int64_t i = 0; i < d; ++i) {
      orow[i] = std::exp(row[i] - mx);
      sum += orow[i];
    }
    const float inv = 1.0f / sum;
    for (int64_t i = 0; i < d; ++i) orow[i] *= inv;
  }
  return out;
}

Tensor log_softmax_last_axis(const Tensor& x) {
  check_last_axis(x, "log_softmax");
  const int64_t d = x.dim(x.rank() - 1);
  const int64_t slices = x.numel() / d;
  Tensor out = Tensor::zeros(DType::F32, x.shape());
  const float* in = x.f32().data();
  float* o = out.f32().data();
  for (int64_t s = 0; s < slices; ++s) {
    const float* row = in + s * d;
    float* orow = o + s * d;
    float mx = row[0];
    for (int64_t i = 1; i < d; ++i) mx = std::max(mx, row[i]);
    float sum = 0.0f;
    for (int64_t i = 0; i < d; ++i) sum += std::exp(row[i] - mx);
    const float lse = mx + std::log(sum);
    for (int64_t i = 0; i < d; ++i) orow[i] = row[i] - lse;
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps) {
  check_last_axis(x, "layer_norm");
  if (eps <= 0.0f) throw ConfigError("layer_norm eps must be > 0");
  const int64_t d = x.dim(x.rank() - 1);
  if (gamma.numel() != d || beta.numel() != d) {
    throw ShapeError("layer_norm gamma/beta length mismatch: gamma " +
                     gamma.shape().to_string() + ", beta " +
                     beta.shape().to_string() + ", last axis " +
                     std::to_string(d));
  }
  const int64_t slices = x.numel() / d;
  Tensor out = Tensor::zeros(DType::F32, x.shape());
  const float* in = x.f32().data();
  const float* g = gamma.f32().data();
  const float* b = beta.f32().data();
  float* o = out.f32().data();
  for (int64_t s = 0; s < slices; ++s) {
    const float* row = in + s * d;
    float* orow = o + s * d;
    float mean = 0.0f;
    for (int64_t i = 0; i < d; ++i) mean += row[i];
    mean /= static_cast<float>(d);
    float var = 0.0f;
    for (int64_t i = 0; i < d; ++i) {
      const float c = row[i] - mean;
      var += c * c;
    }
    var /= static_cast<float>(d);  // biased
    const float inv = 1.0f / std::sqrt(var + eps);
    for (int64_t i = 0; i < d; ++i) {
      orow[i] = (row[i] - mean) * inv * g[i] + b[i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// head split / merge
// ---------------------------------------------------------------------------

Tensor split_heads(const Tensor& x, int64_t heads) {
  if (x.rank() != 2) throw ShapeError("split_heads needs (L, D), got " + x.shape().to_string());
  const int64_t l = x.dim(0), d = x.dim(1);
  if (heads < 1 || d % heads != 0) {
    throw ConfigError("split_heads: D=" + std::to_string(d) +
                      " not divisible by H=" + std::to_string(heads));
  }
  const int64_t dk = d / heads;
  Tensor out = Tensor::zeros(DType::F32, Shape{heads, l, dk});
  const float* in = x.f32().data();
  float* o = out.f32().data();
  for (int64_t h = 0; h < heads; ++h) {
    for (int64_t i = 0; i < l; ++i) {
      std::memcpy(o + (h * l + i) * dk, in + i * d + h * dk,
                  static_cast<size_t>(dk) * sizeof(float));
    }
  }
  return out;
}

Tensor concat_heads(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("concat_heads needs (H, L, d_k), got " + x.shape().to_string());
  const int64_t h = x.dim(0), l = x.dim(1), dk = x.dim(2);
  Tensor out = Tensor::zeros(DType::F32, Shape{l, h * dk});
  const float* in = x.f32().data();
  float* o = out.f32().data();
  for (int64_t hh = 0; hh < h; ++hh) {
    for (int64_t i = 0; i < l; ++i) {
      std::memcpy(o + i * h * dk + hh * dk, in + (hh * l + i) * dk,
                  static_cast<size_t>(dk) * sizeof(float));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// elementwise with broadcasting
// ---------------------------------------------------------------------------

namespace {

std::vector<int64_t> broadcast_shape(const Shape& a, const Shape& b) {
  const size_t rank = std::max(a.dims().size(), b.dims().size());
  std::vector<int64_t> out(rank);
  for (size_t i = 0; i < rank; ++i) {
    const int64_t ad = i < rank - a.dims().size() ? 1 : a.dims()[i - (rank - a.dims().size())];
    const int64_t bd = i < rank - b.dims().size() ? 1 : b.dims()[i - (rank - b.dims().size())];
    if (ad == bd) {
      out[i] = ad;
    } else if (ad == 1 || bd == 1) {
      out[i] = std::max(ad, bd);
    } else {
      throw ShapeError("cannot broadcast " + a.to_string() + " with " + b.to_string());
    }
  }
  return out;
}

// Strides with 0 where the operand is broadcast along the output axis.
std::vector<int64_t> broadcast_strides(const Shape& s, const std::vector<int64_t>& out) {
  const size_t rank = out.size();
  std::vector<int64_t> strides(rank, 0);
  int64_t run = 1;
  for (size_t i = s.dims().size(); i-- > 0;) {
    const size_t oi = i + (rank - s.dims().size());
    strides[oi] = (s.dims()[i] == 1) ? 0 : run;
    run *= s.dims()[i];
  }
  return strides;
}

template <typename F>
Tensor binary_ew(const Tensor& a, const Tensor& b, F f, const char* op) {
  if (a.dtype() != DType::F32 || b.dtype() != DType::F32) {
    throw ShapeError(std::string(op) + " expects f32 operands");
  }
  // Fast path: identical shapes.
  if (a.shape() == b.shape()) {
    Tensor out = Tensor::zeros(DType::F32, a.shape());
    const float* pa = a.f32().data();
    const float* pb = b.f32().data();
    float* po = out.f32().data();
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
    return out;
  }
  const std::vector<int64_t> od = broadcast_shape(a.shape(), b.shape());
  Tensor out = Tensor::zeros(DType::F32, Shape(od));
  const auto sa = broadcast_strides(a.shape(), od);
  const auto sb = broadcast_strides(b.shape(), od);
  const float* pa = a.f32().data();
  const float* pb = b.f32().data();
  float* po = out.f32().data();
  const int64_t n = out.numel();
  const size_t rank = od.size();

  // Fast path: trailing contiguous broadcast (e.g. (L, D) + (D)).
  if (rank >= 1) {
    bool a_contig = true, b_contig = true;
    int64_t run = 1;
    for (size_t i = rank; i-- > 0;) {
      if (sa[i] != run && sa[i] != 0) a_contig = false;
      if (sb[i] != run && sb[i] != 0) b_contig = false;
      run *= od[i];
    }
    (void)a_contig;
    (void)b_contig;
  }

  std::vector<int64_t> coord(rank, 0);
  int64_t ia = 0, ib = 0;
  for (int64_t i = 0; i < n; ++i) {
    po[i] = f(pa[ia], pb[ib]);
    for (size_t ax = rank; ax-- > 0;) {
      coord[ax]++;
      ia += sa[ax];
      ib += sb[ax];
      if (coord[ax] < od[ax]) break;
      ia -= sa[ax] * od[ax];
      ib -= sb[ax] * od[ax];
      coord[ax] = 0;
    }
  }
  return out;
}

template <typename F>
Tensor unary_ew(const Tensor& x, F f, const char* op) {
  if (x.dtype() != DType::F32) throw ShapeError(std::string(op) + " expects f32");
  Tensor out = Tensor::zeros(DType::F32, x.shape());
  const float* in = x.f32().data();
  float* o = out.f32().data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) o[i] = f(in[i]);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_ew(a, b, [](float x, float y) { return x + y; }, "add");
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_ew(a, b, [](float x, float y) { return x - y; }, "sub");
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_ew(a, b, [](float x, float y) { return x * y; }, "mul");
}
Tensor div(const Tensor& a, const Tensor& b) {
  return binary_ew(a, b, [](float x, float y) { return x / y; }, "div");
}

Tensor relu(const Tensor& x) {
  return unary_ew(x, [](float v) { return v > 0.0f ? v : 0.0f; }, "relu");
}
Tensor sigmoid(const Tensor& x) {
  return unary_ew(x, [](float v) { return 1.0f / (1.0f + std::exp(-v)); }, "sigmoid");
}
Tensor elem_sqrt(const Tensor& x) {
  return unary_ew(x, [](float v) { return std::sqrt(v); }, "sqrt");
}
Tensor elem_pow(const Tensor& x, const Tensor& e) {
  return binary_ew(x, e, [](float v, float p) { return std::pow(v, p); }, "pow");
}

// ---------------------------------------------------------------------------
// reductions and layout ops
// ---------------------------------------------------------------------------

Tensor reduce_mean(const Tensor& x, std::vector<int64_t> axes, bool keepdims) {
  const int64_t rank = x.rank();
  std::vector<bool> reduced(static_cast<size_t>(rank), false);
  for (int64_t ax : axes) {
    if (ax < 0) ax += rank;
    if (ax < 0 || ax >= rank) throw ShapeError("reduce_mean axis out of range");
    reduced[static_cast<size_t>(ax)] = true;
  }
  std::vector<int64_t> out_dims;
  int64_t count = 1;
  for (int64_t i = 0; i < rank; ++i) {
    if (reduced[static_cast<size_t>(i)]) {
      count *= x.dim(i);
      if (keepdims) out_dims.push_back(1);
    } else {
      out_dims.push_back(x.dim(i));
    }
  }
  if (count == 0) throw ShapeError("reduce_mean over empty axes");
  Tensor out = Tensor::zeros(DType::F32, Shape(out_dims));
  const float* in = x.f32().data();
  float* o = out.f32().data();

  // Map each input flat index to its output flat index; accumulate in input
  // order for a fixed reduction order.
  std::vector<int64_t> out_stride_per_axis(static_cast<size_t>(rank), 0);
  {
    int64_t run = 1;
    for (int64_t i = rank; i-- > 0;) {
      if (!reduced[static_cast<size_t>(i)]) {
        out_stride_per_axis[static_cast<size_t>(i)] = run;
        run *= x.dim(i);
      }
    }
  }
  const int64_t n = x.numel();
  std::vector<int64_t> coord(static_cast<size_t>(rank), 0);
  int64_t oi = 0;
  for (int64_t i = 0; i < n; ++i) {
    o[oi] += in[i];
    for (int64_t ax = rank; ax-- > 0;) {
      coord[static_cast<size_t>(ax)]++;
      oi += out_stride_per_axis[static_cast<size_t>(ax)];
      if (coord[static_cast<size_t>(ax)] < x.dim(ax)) break;
      oi -= out_stride_per_axis[static_cast<size_t>(ax)] * x.dim(ax);
      coord[static_cast<size_t>(ax)] = 0;
    }
  }
  const float inv = 1.0f / static_cast<float>(count);
  for (int64_t i = 0; i < out.numel(); ++i) o[i] *= inv;
  return out;
}

Tensor transpose(const Tensor& x, const std::vector<int64_t>& perm) {
  const int64_t rank = x.rank();
  if (static_cast<int64_t>(perm.size()) != rank) {
    throw ShapeError("transpose perm rank mismatch");
  }
  std::vector<bool> seen(static_cast<size_t>(rank), false);
  for (int64_t p : perm) {
    if (p < 0 || p >= rank || seen[static_cast<size_t>(p)]) {
      throw ShapeError("transpose perm is not a permutation");
    }
    seen[static_cast<size_t>(p)] = true;
  }
  std::vector<int64_t> out_dims(static_cast<size_t>(rank));
  for (int64_t i = 0; i < rank; ++i) out_dims[static_cast<size_t>(i)] = x.dim(perm[static_cast<size_t>(i)]);
  Tensor out = Tensor::zeros(x.dtype(), Shape(out_dims));
  if (x.dtype() != DType::F32) throw ShapeError("transpose expects f32");
  const float* in = x.f32().data();
  float* o = out.f32().data();

  std::vector<int64_t> in_strides(static_cast<size_t>(rank), 1);
  for (int64_t i = rank - 2; i >= 0; --i) {
    in_strides[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(i + 1)] * x.dim(i + 1);
  }
  std::vector<int64_t> src_stride(static_cast<size_t>(rank));
  for (int64_t i = 0; i < rank; ++i) {
    src_stride[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(perm[static_cast<size_t>(i)])];
  }
  const int64_t n = out.numel();
  std::vector<int64_t> coord(static_cast<size_t>(rank), 0);
  int64_t si = 0;
  for (int64_t i = 0; i < n; ++i) {
    o[i] = in[si];
    for (int64_t ax = rank; ax-- > 0;) {
      coord[static_cast<size_t>(ax)]++;
      si += src_stride[static_cast<size_t>(ax)];
      if (coord[static_cast<size_t>(ax)] < out_dims[static_cast<size_t>(ax)]) break;
      si -= src_stride[static_cast<size_t>(ax)] * out_dims[static_cast<size_t>(ax)];
      coord[static_cast<size_t>(ax)] = 0;
    }
  }
  return out;
}

Tensor concat(const std::vector<const Tensor*>& inputs, int64_t axis) {
  if (inputs.empty()) throw ShapeError("concat of zero tensors");
  const Tensor& first = *inputs[0];
  const int64_t rank = first.rank();
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ShapeError("concat axis out of range");
  int64_t axis_total = 0;
  for (const Tensor* t : inputs) {
    if (t->rank() != rank || t->dtype() != first.dtype()) {
      throw ShapeError("concat operands disagree in rank or dtype");
    }
    for (int64_t i = 0; i < rank; ++i) {
      if (i != axis && t->dim(i) != first.dim(i)) {
        throw ShapeError("concat non-axis dim mismatch: " + t->shape().to_string() +
                         " vs " + first.shape().to_string());
      }
    }
    axis_total += t->dim(axis);
  }
  std::vector<int64_t> out_dims = first.shape().dims();
  out_dims[static_cast<size_t>(axis)] = axis_total;
  Tensor out = Tensor::zeros(first.dtype(), Shape(out_dims));

  int64_t outer = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= first.dim(i);
  int64_t inner = 1;
  for (int64_t i = axis + 1; i < rank; ++i) inner *= first.dim(i);
  const int64_t esz = dtype_size(first.dtype());

  auto* out_bytes = static_cast<uint8_t*>(out.raw_data());
  const int64_t out_row = axis_total * inner * esz;
  int64_t axis_off = 0;
  for (const Tensor* t : inputs) {
    const auto* in_bytes = static_cast<const uint8_t*>(t->raw_data());
    const int64_t in_row = t->dim(axis) * inner * esz;
    for (int64_t j = 0; j < outer; ++j) {
      std::memcpy(out_bytes + j * out_row + axis_off * inner * esz,
                  in_bytes + j * in_row, static_cast<size_t>(in_row));
    }
    axis_off += t->dim(axis);
  }
  return out;
}

std::vector<Tensor> split_equal(const Tensor& x, int64_t axis, int64_t parts) {
  const int64_t rank = x.rank();
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ShapeError("split axis out of range");
  if (parts < 1 || x.dim(axis) % parts != 0) {
    throw ShapeError("split: axis extent " + std::to_string(x.dim(axis)) +
                     " not divisible into " + std::to_string(parts));
  }
  const int64_t step = x.dim(axis) / parts;
  std::vector<Tensor> out;
  out.reserve(static_cast<size_t>(parts));
  for (int64_t p = 0; p < parts; ++p) {
    out.push_back(slice(x, axis, p * step, (p + 1) * step));
  }
  return out;
}

Tensor slice(const Tensor& x, int64_t axis, int64_t start, int64_t end) {
  const int64_t rank = x.rank();
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ShapeError("slice axis out of range");
  if (start < 0 || end < start || end > x.dim(axis)) {
    throw ShapeError("slice bounds [" + std::to_string(start) + ", " +
                     std::to_string(end) + ") invalid for axis extent " +
                     std::to_string(x.dim(axis)));
  }
  std::vector<int64_t> out_dims = x.shape().dims();
  out_dims[static_cast<size_t>(axis)] = end - start;
  Tensor out = Tensor::zeros(x.dtype(), Shape(out_dims));

  int64_t outer = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= x.dim(i);
  int64_t inner = 1;
  for (int64_t i = axis + 1; i < rank; ++i) inner *= x.dim(i);
  const int64_t esz = dtype_size(x.dtype());
  const auto* in_bytes = static_cast<const uint8_t*>(x.raw_data());
  auto* out_bytes = static_cast<uint8_t*>(out.raw_data());
  const int64_t in_row = x.dim(axis) * inner * esz;
  const int64_t out_row = (end - start) * inner * esz;
  for (int64_t j = 0; j < outer; ++j) {
    std::memcpy(out_bytes + j * out_row, in_bytes + j * in_row + start * inner * esz,
                static_cast<size_t>(out_row));
  }
  return out;
}

Tensor pad_constant(const Tensor& x, const std::vector<int64_t>& pads_begin,
                    const std::vector<int64_t>& pads_end, float value) {
  const int64_t rank = x.rank();
  if (static_cast<int64_t>(pads_begin.size()) != rank ||
      static_cast<int64_t>(pads_end.size()) != rank) {
    throw ShapeError("pad: pads rank mismatch");
  }
  std::vector<int64_t> out_dims(static_cast<size_t>(rank));
  for (int64_t i = 0; i < rank; ++i) {
    if (pads_begin[static_cast<size_t>(i)] < 0 || pads_end[static_cast<size_t>(i)] < 0) {
      throw ShapeError("pad: negative pad amount");
    }
    out_dims[static_cast<size_t>(i)] =
        x.dim(i) + pads_begin[static_cast<size_t>(i)] + pads_end[static_cast<size_t>(i)];
  }
  Tensor out = Tensor::zeros(DType::F32, Shape(out_dims));
  if (x.dtype() != DType::F32) throw ShapeError("pad expects f32");
  float* o = out.f32().data();
  if (value != 0.0f) {
    for (int64_t i = 0; i < out.numel(); ++i) o[i] = value;
  }
  const float* in = x.f32().data();

  std::vector<int64_t> out_strides(static_cast<size_t>(rank), 1);
  for (int64_t i = rank - 2; i >= 0; --i) {
    out_strides[static_cast<size_t>(i)] =
        out_strides[static_cast<size_t>(i + 1)] * out_dims[static_cast<size_t>(i + 1)];
  }
  const int64_t n = x.numel();
  if (n == 0) return out;
  std::vector<int64_t> coord(static_cast<size_t>(rank), 0);
  for (int64_t i = 0; i < n; ++i) {
    int64_t oi = 0;
    for (int64_t ax = 0; ax < rank; ++ax) {
      oi += (coord[static_cast<size_t>(ax)] + pads_begin[static_cast<size_t>(ax)]) *
            out_strides[static_cast<size_t>(ax)];
    }
    o[oi] = in[i];
    for (int64_t ax = rank; ax-- > 0;) {
      coord[static_cast<size_t>(ax)]++;
      if (coord[static_cast<size_t>(ax)] < x.dim(ax)) break;
      coord[static_cast<size_t>(ax)] = 0;
    }
  }
  return out;
}

Tensor gather_rows(const Tensor& table, const Tensor& indices) {
  if (table.rank() < 1) throw ShapeError("gather: table needs rank >= 1");
  if (indices.dtype() != DType::I32 || indices.rank() != 1) {
    throw ShapeError("gather: indices must be rank-1 i32");
  }
  const int64_t v = table.dim(0);
  int64_t row = 1;
  for (int64_t i = 1; i < table.rank(); ++i) row *= table.dim(i);
  std::vector<int64_t> out_dims;
  out_dims.push_back(indices.dim(0));
  for (int64_t i = 1; i < table.rank(); ++i) out_dims.push_back(table.dim(i));
  Tensor out = Tensor::zeros(table.dtype(), Shape(out_dims));
  const auto idx = indices.i32();
  const int64_t esz = dtype_size(table.dtype());
  const auto* in_bytes = static_cast<const uint8_t*>(table.raw_data());
  auto* out_bytes = static_cast<uint8_t*>(out.raw_data());
  for (int64_t i = 0; i < indices.dim(0); ++i) {
    const int32_t id = idx[static_cast<size_t>(i)];
    if (id < 0 || id >= v) {
      throw ExecError("gather index " + std::to_string(id) + " out of range [0, " +
                      std::to_string(v) + ")");
    }
    std::memcpy(out_bytes + i * row * esz, in_bytes + static_cast<int64_t>(id) * row * esz,
                static_cast<size_t>(row * esz));
  }
  return out;
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor* bias,
              int64_t pad, int64_t groups) {
  if (x.rank() != 2 || w.rank() != 3) {
    throw ShapeError("conv1d expects x (L, C_in) and w (C_out, C_in/groups, k)");
  }
  const int64_t l = x.dim(0), cin = x.dim(1);
  const int64_t cout = w.dim(0), cin_g = w.dim(1), k = w.dim(2);
  if (groups < 1 || cin % groups != 0 || cout % groups != 0 || cin / groups != cin_g) {
    throw ShapeError("conv1d group mismatch: C_in=" + std::to_string(cin) +
                     " C_out=" + std::to_string(cout) + " groups=" + std::to_string(groups) +
                     " w " + w.shape().to_string());
  }
  if (bias != nullptr && bias->numel() != cout) {
    throw ShapeError("conv1d bias length mismatch");
  }
  const int64_t lout = l + 2 * pad - k + 1;
  if (lout < 0) throw ShapeError("conv1d output length negative");
  Tensor out = Tensor::zeros(DType::F32, Shape{lout, cout});
  const float* in = x.f32().data();
  const float* wp = w.f32().data();
  const float* bp = bias != nullptr ? bias->f32().data() : nullptr;
  float* o = out.f32().data();
  const int64_t cout_g = cout / groups;
  for (int64_t t = 0; t < lout; ++t) {
    for (int64_t co = 0; co < cout; ++co) {
      const int64_t g = co / cout_g;
      float acc = bp != nullptr ? bp[co] : 0.0f;
      for (int64_t ci = 0; ci < cin_g; ++ci) {
        const int64_t ci_global = g * cin_g + ci;
        for (int64_t dk = 0; dk < k; ++dk) {
          const int64_t src = t - pad + dk;
          if (src < 0 || src >= l) continue;
          acc += in[src * cin + ci_global] * wp[(co * cin_g + ci) * k + dk];
        }
      }
      o[t * cout + co] = acc;
    }
  }
  return out;
}

bool all_finite(const Tensor& x) {
  if (x.dtype() != DType::F32) return true;
  for (float v : x.f32()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace fusegraph
