// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "fusegraph/error.hpp"

namespace fusegraph {

enum class DType : uint8_t { F32, I8, I32 };

const char* dtype_name(DType dt);
DType dtype_from_name(const std::string& name);
int64_t dtype_size(DType dt);

class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<int64_t> dims) : dims_(dims) { check(); }
  explicit Shape(std::vector<int64_t> dims) : dims_(std::move(dims)) { check(); }

  int64_t rank() const { return static_cast<int64_t>(dims_.size()); }
  int64_t numel() const;
  int64_t operator[](int64_t i) const { return dims_[static_cast<size_t>(i)]; }
  const std::vector<int64_t>& dims() const { return dims_; }
  bool operator==(const Shape& other) const = default;
  std::string to_string() const;

 private:
  void check() const;
  std::vector<int64_t> dims_;
};

// Dense row-major tensor. The buffer type is fixed by dtype; views are typed
// spans and Eigen maps over the flat storage.
class Tensor {
 public:
  Tensor() : dtype_(DType::F32), shape_({0}), data_(std::vector<float>{}) {}

  static Tensor zeros(DType dt, Shape shape);
  static Tensor from_f32(Shape shape, std::vector<float> data);
  static Tensor from_i8(Shape shape, std::vector<int8_t> data);
  static Tensor from_i32(Shape shape, std::vector<int32_t> data);
  static Tensor scalar_f32(float value) { return from_f32(Shape{1}, {value}); }

  DType dtype() const { return dtype_; }
  const Shape& shape() const { return shape_; }
  int64_t rank() const { return shape_.rank(); }
  int64_t dim(int64_t i) const { return shape_[i]; }
  int64_t numel() const { return shape_.numel(); }
  int64_t byte_size() const { return numel() * dtype_size(dtype_); }

  template <typename T>
  std::span<const T> view() const {
    const auto* vec = std::get_if<std::vector<T>>(&data_);
    if (vec == nullptr) throw ShapeError("tensor dtype mismatch in typed view");
    return {vec->data(), vec->size()};
  }
  template <typename T>
  std::span<T> view() {
    auto* vec = std::get_if<std::vector<T>>(&data_);
    if (vec == nullptr) throw ShapeError("tensor dtype mismatch in typed view");
    return {vec->data(), vec->size()};
  }

  std::span<const float> f32() const { return view<float>(); }
  std::span<float> f32() { return view<float>(); }
  std::span<const int8_t> i8() const { return view<int8_t>(); }
  std::span<int8_t> i8() { return view<int8_t>(); }
  std::span<const int32_t> i32() const { return view<int32_t>(); }
  std::span<int32_t> i32() { return view<int32_t>(); }

  const void* raw_data() const;
  void* raw_data();

  // Same dtype, shape, and payload bits.
  bool bit_equal(const Tensor& other) const;

  // Returns a tensor sharing no storage with this one but with a new shape
  // over the same flat data. numel must match.
  Tensor reshaped(Shape new_shape) const;

 private:
  Tensor(DType dt, Shape shape) : dtype_(dt), shape_(std::move(shape)) {}

  DType dtype_;
  Shape shape_;
  std::variant<std::vector<float>, std::vector<int8_t>, std::vector<int32_t>> data_;
};

using RowMatrixf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrixf>;
using ConstMatMap = Eigen::Map<const RowMatrixf>;

// Rank-2 Eigen view.
ConstMatMap matrix_view(const Tensor& t);
MatMap matrix_view(Tensor& t);
ConstMatMap matrix_view(std::span<const float> data, int64_t rows, int64_t cols);
MatMap matrix_view(std::span<float> data, int64_t rows, int64_t cols);

// ---------------------------------------------------------------------------
// Kernels. Pure functions over immutable inputs; deterministic given identical
// inputs. Float kernels use a fixed reduction order so results are bit-stable
// regardless of how callers schedule them.
// ---------------------------------------------------------------------------

// Row-block size used by matmul. The GEMM is always evaluated in fixed row
// chunks so that sequential and worker-parallel schedules produce identical
// bits.
inline constexpr int64_t kGemmRowChunk = 64;

// c[row_begin:row_end, :] = a[row_begin:row_end, :] * b for row-major buffers.
void matmul_row_range(const float* a, const float* b, float* c, int64_t k,
                      int64_t n, int64_t row_begin, int64_t row_end);

// Matrix product with optional leading batch dims (broadcast-compatible).
// Inner dims must agree. F32 accumulation.
Tensor matmul(const Tensor& a, const Tensor& b);

// Stabilized softmax over the last axis; each slice sums to 1.
Tensor softmax_last_axis(const Tensor& x);
Tensor log_softmax_last_axis(const Tensor& x);

// Per-last-axis-slice (x - mean) / sqrt(var + eps) * gamma + beta with biased
// variance.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps);

// (L, D) -> (H, L, D/H) and back. concat_heads(split_heads(x, h)) == x.
Tensor split_heads(const Tensor& x, int64_t heads);
Tensor concat_heads(const Tensor& x);

// Elementwise binary ops with numpy-style right-aligned broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// Elementwise unary ops.
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor elem_sqrt(const Tensor& x);
// x ^ e, exponent broadcast like the binary ops.
Tensor elem_pow(const Tensor& x, const Tensor& e);

// Mean over the given axes (negative axes count from the back).
Tensor reduce_mean(const Tensor& x, std::vector<int64_t> axes, bool keepdims);

Tensor transpose(const Tensor& x, const std::vector<int64_t>& perm);

Tensor concat(const std::vector<const Tensor*>& inputs, int64_t axis);
std::vector<Tensor> split_equal(const Tensor& x, int64_t axis, int64_t parts);

// Half-open [start, end) along one axis.
Tensor slice(const Tensor& x, int64_t axis, int64_t start, int64_t end);

// Zero padding; pads_begin/pads_end have one entry per axis.
Tensor pad_constant(const Tensor& x, const std::vector<int64_t>& pads_begin,
                    const std::vector<int64_t>& pads_end, float value);

// Axis-0 gather: rows of `table` selected by int32 `indices` (rank 1).
Tensor gather_rows(const Tensor& table, const Tensor& indices);

// 1-D convolution over (L, C_in) input with (C_out, C_in/groups, k) weight,
// symmetric zero padding. bias may be null.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor* bias,
              int64_t pad, int64_t groups);

bool all_finite(const Tensor& x);

}  // namespace fusegraph
