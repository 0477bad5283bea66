// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdint>
#include <vector>

#include <doctest.h>

#include "fusegraph/recipes.hpp"
#include "fusegraph/tensor.hpp"

using namespace fusegraph;

namespace {

Tensor random_f32(Rng& rng, Shape shape, float lo = -1.0f, float hi = 1.0f) {
  return Tensor::from_f32(shape, rng.uniform_vec(shape.numel(), lo, hi));
}

// Independent triple-loop product used as the matmul oracle.
std::vector<double> naive_matmul(const std::vector<float>& a,
                                 const std::vector<float>& b, int64_t m,
                                 int64_t k, int64_t n) {
  std::vector<double> c(static_cast<size_t>(m * n), 0.0);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j)
      for (int64_t l = 0; l < k; ++l)
        c[static_cast<size_t>(i * n + j)] +=
            static_cast<double>(a[static_cast<size_t>(i * k + l)]) *
            b[static_cast<size_t>(l * n + j)];
  return c;
}

}  // namespace

TEST_CASE("shape basics") {
  CHECK((Shape{2, 3}).numel() == 6);
  CHECK(Shape{}.rank() == 0);
  CHECK((Shape{0, 4}).numel() == 0);  // zero extents are legal
  CHECK_THROWS_AS((Shape{2, -1}), ShapeError);
}

TEST_CASE("tensor construction and views") {
  Tensor t = Tensor::from_f32(Shape{2, 2}, {1, 2, 3, 4});
  CHECK(t.dtype() == DType::F32);
  CHECK(t.numel() == 4);
  CHECK(t.byte_size() == 16);
  CHECK(t.f32()[3] == 4.0f);
  CHECK_THROWS_AS(t.i8(), ShapeError);
  CHECK_THROWS_AS(Tensor::from_f32(Shape{3}, {1, 2}), ShapeError);

  Tensor z = Tensor::zeros(DType::I32, Shape{2});
  CHECK(z.i32()[1] == 0);

  Tensor r = t.reshaped(Shape{4});
  CHECK(r.rank() == 1);
  CHECK(r.f32()[2] == 3.0f);
  CHECK_THROWS_AS(t.reshaped(Shape{5}), ShapeError);

  CHECK(t.bit_equal(Tensor::from_f32(Shape{2, 2}, {1, 2, 3, 4})));
  CHECK_FALSE(t.bit_equal(r));  // same bits, different shape
}

TEST_CASE("matmul oracle values") {
  const Tensor a = Tensor::from_f32(Shape{2, 2}, {1, 2, 3, 4});
  const Tensor b = Tensor::from_f32(Shape{2, 2}, {5, 6, 7, 8});
  const Tensor c = matmul(a, b);
  CHECK(c.f32()[0] == 19.0f);
  CHECK(c.f32()[1] == 22.0f);
  CHECK(c.f32()[2] == 43.0f);
  CHECK(c.f32()[3] == 50.0f);

  const Tensor eye = Tensor::from_f32(Shape{2, 2}, {1, 0, 0, 1});
  CHECK(matmul(eye, b).bit_equal(b));

  const Tensor zero = Tensor::zeros(DType::F32, Shape{2, 2});
  const Tensor zc = matmul(zero, b);
  for (float v : zc.f32()) CHECK(v == 0.0f);

  CHECK_THROWS_AS(matmul(a, Tensor::zeros(DType::F32, Shape{3, 2})), ShapeError);
}

TEST_CASE("matmul matches a naive triple loop") {
  Rng rng(11);
  const int64_t m = 7, k = 13, n = 5;
  const Tensor a = random_f32(rng, Shape{m, k});
  const Tensor b = random_f32(rng, Shape{k, n});
  const Tensor c = matmul(a, b);
  const auto want = naive_matmul({a.f32().begin(), a.f32().end()},
                                 {b.f32().begin(), b.f32().end()}, m, k, n);
  for (int64_t i = 0; i < m * n; ++i)
    CHECK(std::abs(c.f32()[static_cast<size_t>(i)] - want[static_cast<size_t>(i)]) < 1e-5);
}

TEST_CASE("matmul broadcasts leading batch dims") {
  Rng rng(3);
  const Tensor a = random_f32(rng, Shape{2, 3, 4});
  const Tensor b = random_f32(rng, Shape{4, 5});
  const Tensor c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 3, 5});
  // each batch equals the rank-2 product
  for (int64_t h = 0; h < 2; ++h) {
    const Tensor ah = slice(a, 0, h, h + 1).reshaped(Shape{3, 4});
    const Tensor ch = matmul(ah, b);
    for (int64_t i = 0; i < 15; ++i)
      CHECK(c.f32()[static_cast<size_t>(h * 15 + i)] ==
            ch.f32()[static_cast<size_t>(i)]);
  }
}

TEST_CASE("softmax oracle and properties") {
  const Tensor x = Tensor::from_f32(Shape{3}, {1, 2, 3});
  const Tensor s = softmax_last_axis(x);
  CHECK(s.f32()[0] == doctest::Approx(0.09003057).epsilon(1e-5));
  CHECK(s.f32()[1] == doctest::Approx(0.24472847).epsilon(1e-5));
  CHECK(s.f32()[2] == doctest::Approx(0.66524096).epsilon(1e-5));

  const Tensor u = softmax_last_axis(Tensor::from_f32(Shape{3}, {0, 0, 0}));
  for (float v : u.f32()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-6));

  Rng rng(5);
  const Tensor r = random_f32(rng, Shape{4, 6}, -5.0f, 5.0f);
  const Tensor sr = softmax_last_axis(r);
  for (int64_t i = 0; i < 4; ++i) {
    double sum = 0;
    for (int64_t j = 0; j < 6; ++j) {
      const float v = sr.f32()[static_cast<size_t>(i * 6 + j)];
      CHECK(v >= 0.0f);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
  // shift invariance of the stabilized form (machine precision)
  const Tensor shifted = softmax_last_axis(add(r, Tensor::scalar_f32(17.5f)));
  for (size_t i = 0; i < sr.f32().size(); ++i)
    CHECK(std::abs(shifted.f32()[i] - sr.f32()[i]) < 1e-6);
}

TEST_CASE("log_softmax normalizes") {
  Rng rng(6);
  const Tensor r = random_f32(rng, Shape{3, 5}, -4.0f, 4.0f);
  const Tensor ls = log_softmax_last_axis(r);
  for (int64_t i = 0; i < 3; ++i) {
    double sum = 0;
    for (int64_t j = 0; j < 5; ++j)
      sum += std::exp(static_cast<double>(ls.f32()[static_cast<size_t>(i * 5 + j)]));
    CHECK(std::abs(std::log(sum)) < 1e-5);
  }
}

TEST_CASE("layer_norm oracle") {
  const Tensor gamma = Tensor::from_f32(Shape{3}, {1, 1, 1});
  const Tensor beta = Tensor::from_f32(Shape{3}, {0, 0, 0});
  const Tensor x = Tensor::from_f32(Shape{3}, {1, 2, 3});
  const Tensor y = layer_norm(x, gamma, beta, 1e-5f);
  CHECK(y.f32()[0] == doctest::Approx(-1.22474).epsilon(1e-4));
  CHECK(y.f32()[1] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(y.f32()[2] == doctest::Approx(1.22474).epsilon(1e-4));

  // constant slice: variance 0, eps dominates, output = beta
  const Tensor cbeta = Tensor::from_f32(Shape{3}, {7, 7, 7});
  const Tensor cy = layer_norm(Tensor::from_f32(Shape{3}, {4, 4, 4}), gamma, cbeta, 1e-5f);
  for (float v : cy.f32()) CHECK(v == doctest::Approx(7.0).epsilon(1e-6));

  // normalized slices: mean ~0, biased variance ~1
  Rng rng(8);
  const Tensor r = random_f32(rng, Shape{4, 16}, -2.0f, 2.0f);
  const Tensor n = layer_norm(r, Tensor::from_f32(Shape{16}, std::vector<float>(16, 1.0f)),
                              Tensor::zeros(DType::F32, Shape{16}), 1e-6f);
  for (int64_t i = 0; i < 4; ++i) {
    double mean = 0, var = 0;
    for (int64_t j = 0; j < 16; ++j) mean += n.f32()[static_cast<size_t>(i * 16 + j)];
    mean /= 16;
    for (int64_t j = 0; j < 16; ++j) {
      const double d = n.f32()[static_cast<size_t>(i * 16 + j)] - mean;
      var += d * d;
    }
    var /= 16;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-3);
  }

  CHECK_THROWS_AS(layer_norm(x, Tensor::from_f32(Shape{2}, {1, 1}), beta, 1e-5f), ShapeError);
}

TEST_CASE("split and concat heads") {
  // L=2, D=4, H=2: head h holds column half h
  const Tensor x = Tensor::from_f32(Shape{2, 4}, {0, 1, 2, 3, 4, 5, 6, 7});
  const Tensor s = split_heads(x, 2);
  CHECK(s.shape() == Shape{2, 2, 2});
  const std::vector<float> want = {0, 1, 4, 5, 2, 3, 6, 7};
  for (size_t i = 0; i < 8; ++i) CHECK(s.f32()[i] == want[i]);
  CHECK(concat_heads(s).bit_equal(x));

  CHECK(split_heads(x, 1).shape() == Shape{1, 2, 4});
  CHECK_THROWS_AS(split_heads(x, 3), ConfigError);

  Rng rng(9);
  const Tensor r = random_f32(rng, Shape{5, 12});
  CHECK(concat_heads(split_heads(r, 4)).bit_equal(r));
}

TEST_CASE("broadcast binary ops") {
  const Tensor a = Tensor::from_f32(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor row = Tensor::from_f32(Shape{3}, {10, 20, 30});
  const Tensor s = add(a, row);
  CHECK(s.f32()[0] == 11.0f);
  CHECK(s.f32()[5] == 36.0f);

  const Tensor col = Tensor::from_f32(Shape{2, 1}, {1, -1});
  const Tensor m = mul(a, col);
  CHECK(m.f32()[2] == 3.0f);
  CHECK(m.f32()[3] == -4.0f);

  CHECK(sub(a, a).f32()[4] == 0.0f);
  const Tensor d = div(a, Tensor::scalar_f32(2.0f));
  CHECK(d.f32()[1] == 1.0f);

  CHECK_THROWS_AS(add(a, Tensor::from_f32(Shape{4}, {1, 2, 3, 4})), ShapeError);
}

TEST_CASE("unary ops") {
  const Tensor x = Tensor::from_f32(Shape{3}, {-1, 0, 2});
  const Tensor r = relu(x);
  CHECK(r.f32()[0] == 0.0f);
  CHECK(r.f32()[1] == 0.0f);
  CHECK(r.f32()[2] == 2.0f);

  CHECK(sigmoid(Tensor::scalar_f32(0.0f)).f32()[0] == doctest::Approx(0.5));
  CHECK(elem_sqrt(Tensor::scalar_f32(4.0f)).f32()[0] == 2.0f);

  const Tensor p = elem_pow(Tensor::from_f32(Shape{2}, {2, 3}), Tensor::scalar_f32(2.0f));
  CHECK(p.f32()[0] == 4.0f);
  CHECK(p.f32()[1] == 9.0f);
}

TEST_CASE("reduce_mean") {
  const Tensor x = Tensor::from_f32(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor last = reduce_mean(x, {-1}, true);
  CHECK(last.shape() == Shape{2, 1});
  CHECK(last.f32()[0] == 2.0f);
  CHECK(last.f32()[1] == 5.0f);

  const Tensor rows = reduce_mean(x, {0}, false);
  CHECK(rows.shape() == Shape{3});
  CHECK(rows.f32()[0] == 2.5f);

  const Tensor keep = reduce_mean(x, {0}, true);
  CHECK(keep.shape() == Shape{1, 3});
}

TEST_CASE("transpose") {
  const Tensor x = Tensor::from_f32(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor t = transpose(x, {1, 0});
  CHECK(t.shape() == Shape{3, 2});
  CHECK(t.f32()[0] == 1.0f);
  CHECK(t.f32()[1] == 4.0f);
  CHECK(t.f32()[4] == 3.0f);

  Rng rng(4);
  const Tensor r = random_f32(rng, Shape{2, 3, 4});
  const Tensor rt = transpose(transpose(r, {1, 0, 2}), {1, 0, 2});
  CHECK(rt.bit_equal(r));
  const Tensor inner = transpose(r, {0, 2, 1});
  CHECK(inner.shape() == Shape{2, 4, 3});
  CHECK(inner.f32()[1] == r.f32()[4]);  // [0][0][1] <- [0][1][0]

  CHECK_THROWS_AS(transpose(x, {0, 0}), ShapeError);
}

TEST_CASE("concat, split, slice, pad") {
  const Tensor a = Tensor::from_f32(Shape{1, 2}, {1, 2});
  const Tensor b = Tensor::from_f32(Shape{2, 2}, {3, 4, 5, 6});
  const Tensor c = concat({&a, &b}, 0);
  CHECK(c.shape() == Shape{3, 2});
  CHECK(c.f32()[5] == 6.0f);

  const Tensor empty = Tensor::zeros(DType::F32, Shape{0, 2});
  CHECK(concat({&empty, &b}, 0).bit_equal(b));

  const Tensor wide = concat({&b, &b}, 1);
  CHECK(wide.shape() == Shape{2, 4});
  CHECK(wide.f32()[2] == 3.0f);

  const auto parts = split_equal(wide, 1, 2);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].bit_equal(b));
  CHECK(parts[1].bit_equal(b));
  CHECK_THROWS_AS(split_equal(wide, 1, 3), ShapeError);

  const Tensor sl = slice(c, 0, 1, 3);
  CHECK(sl.bit_equal(b));
  CHECK(slice(c, 0, 1, 1).shape() == Shape{0, 2});
  CHECK_THROWS_AS(slice(c, 0, 1, 4), ShapeError);

  const Tensor p = pad_constant(a, {0, 1}, {0, 2}, 0.0f);
  CHECK(p.shape() == Shape{1, 5});
  const std::vector<float> pwant = {0, 1, 2, 0, 0};
  for (size_t i = 0; i < 5; ++i) CHECK(p.f32()[i] == pwant[i]);
}

TEST_CASE("gather_rows") {
  const Tensor table = Tensor::from_f32(Shape{3, 2}, {0, 1, 10, 11, 20, 21});
  const Tensor idx = Tensor::from_i32(Shape{2}, {2, 0});
  const Tensor g = gather_rows(table, idx);
  CHECK(g.shape() == Shape{2, 2});
  CHECK(g.f32()[0] == 20.0f);
  CHECK(g.f32()[3] == 1.0f);
  CHECK_THROWS_AS(gather_rows(table, Tensor::from_i32(Shape{1}, {3})), ExecError);
}

TEST_CASE("conv1d oracle") {
  // single channel, box filter, symmetric zero pad
  const Tensor x = Tensor::from_f32(Shape{3, 1}, {1, 2, 3});
  const Tensor w = Tensor::from_f32(Shape{1, 1, 3}, {1, 1, 1});
  const Tensor y = conv1d(x, w, nullptr, 1, 1);
  CHECK(y.shape() == Shape{3, 1});
  CHECK(y.f32()[0] == 3.0f);
  CHECK(y.f32()[1] == 6.0f);
  CHECK(y.f32()[2] == 5.0f);

  // depthwise: channel 0 identity tap, channel 1 left shift
  const Tensor x2 = Tensor::from_f32(Shape{3, 2}, {1, 10, 2, 20, 3, 30});
  const Tensor w2 = Tensor::from_f32(Shape{2, 1, 3}, {0, 1, 0, 0, 0, 1});
  const Tensor y2 = conv1d(x2, w2, nullptr, 1, 2);
  CHECK(y2.f32()[0] == 1.0f);
  CHECK(y2.f32()[1] == 20.0f);
  CHECK(y2.f32()[2] == 2.0f);
  CHECK(y2.f32()[3] == 30.0f);
  CHECK(y2.f32()[4] == 3.0f);
  CHECK(y2.f32()[5] == 0.0f);

  const Tensor bias = Tensor::from_f32(Shape{1}, {100});
  CHECK(conv1d(x, w, &bias, 1, 1).f32()[1] == 106.0f);

  CHECK_THROWS_AS(conv1d(x2, w, nullptr, 1, 1), ShapeError);
}

TEST_CASE("all_finite") {
  CHECK(all_finite(Tensor::from_f32(Shape{2}, {1, 2})));
  CHECK_FALSE(all_finite(Tensor::from_f32(Shape{2}, {1, INFINITY})));
  CHECK_FALSE(all_finite(Tensor::from_f32(Shape{1}, {NAN})));
  CHECK(all_finite(Tensor::from_i32(Shape{1}, {5})));
}

TEST_CASE("kernels are deterministic") {
  Rng rng(12);
  const Tensor a = random_f32(rng, Shape{9, 17});
  const Tensor b = random_f32(rng, Shape{17, 9});
  CHECK(matmul(a, b).bit_equal(matmul(a, b)));
  CHECK(softmax_last_axis(a).bit_equal(softmax_last_axis(a)));
}
