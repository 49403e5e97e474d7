#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vsop3d/tensor/ops.hpp"

namespace vsop3d {
namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

TEST(Conv2d, IdentityKernel) {
  const Tensor y = ops::conv2d(Tensor::full({1, 1, 3, 3}, 1.0), Tensor::full({1, 1, 1, 1}, 1.0),
                               ConvSpec::make2d(1, 1, 1, 1));
  ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
  for (double v : y.data()) EXPECT_EQ(v, 1.0);
}

TEST(Conv2d, DiagonalSum) {
  const Tensor y = ops::conv2d(Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4}), Tensor::from({1, 1, 2, 2}, {1, 0, 0, 1}),
                               ConvSpec::make2d(1, 1, 2, 2));
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y[0], 5.0);
}

TEST(Conv2d, ShapeErrorsAreDescriptive) {
  const Tensor x = Tensor::zeros({1, 2, 4, 4});
  try {
    ops::conv2d(x, Tensor::zeros({1, 3, 3, 3}), ConvSpec::make2d(3, 1, 3, 3));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ops::conv2d(x, Tensor::zeros({1, 2, 5, 5}), ConvSpec::make2d(2, 1, 5, 5)), DimensionError);
  EXPECT_THROW(ops::conv2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({1, 2, 3, 3}), ConvSpec::make2d(2, 1, 3, 3)),
               DimensionError);
}

TEST(ConvSpec, OutputExtent) {
  const auto s = ConvSpec::make3d(1, 1, {3, 3, 2}, {1, 2, 3}, {1, 0, 1});
  EXPECT_EQ(s.output_extent(0, 8), 8);
  EXPECT_EQ(s.output_extent(1, 7), 3);
  EXPECT_EQ(s.output_extent(2, 7), 3);
  EXPECT_THROW(s.output_extent(1, 2), DimensionError);
}

TEST(Conv2d, RandomCasesMatchNaiveLoops) {
  Rng rng(21);
  for (int t = 0; t < 60; ++t) {
    const std::int64_t n = 1 + rng.below(10), c = 1 + rng.below(4), o = 1 + rng.below(5);
    const std::int64_t kh = 1 + rng.below(3), kw = 1 + rng.below(3);
    const std::int64_t stride = 1 + rng.below(3), pad = rng.below(3);
    const std::int64_t h = kh + rng.below(7), w = kw + rng.below(7);
    const Tensor x = oracle::random_tensor({n, c, h, w}, rng), k = oracle::random_tensor({o, c, kh, kw}, rng);
    const Tensor y = ops::conv2d(x, k, ConvSpec::make2d(c, o, kh, kw, stride, pad));
    std::array<std::int64_t, 5> shape{};
    const auto expect = oracle::conv_nd(values(x), {n, c, 1, h, w}, values(k), {o, c, 1, kh, kw}, {1, stride, stride},
                                        {0, pad, pad}, shape);
    ASSERT_EQ(y.shape(), (Shape{n, o, shape[3], shape[4]}));
    for (std::size_t i = 0; i < expect.size(); ++i) ASSERT_NEAR(y[static_cast<std::int64_t>(i)], expect[i], 1e-12);
  }
}

TEST(Conv3d, RandomCasesMatchNaiveLoops) {
  Rng rng(22);
  for (int t = 0; t < 60; ++t) {
    const std::int64_t n = 1 + rng.below(9), c = 1 + rng.below(3), o = 1 + rng.below(4);
    const std::array<std::int64_t, 3> k{1 + std::int64_t(rng.below(3)), 1 + std::int64_t(rng.below(3)),
                                        1 + std::int64_t(rng.below(3))};
    const std::array<std::int64_t, 3> s{1 + std::int64_t(rng.below(2)), 1 + std::int64_t(rng.below(3)),
                                        1 + std::int64_t(rng.below(2))};
    const std::array<std::int64_t, 3> p{std::int64_t(rng.below(2)), std::int64_t(rng.below(3)),
                                        std::int64_t(rng.below(2))};
    const std::int64_t d = k[0] + rng.below(4), h = k[1] + rng.below(5), w = k[2] + rng.below(5);
    const Tensor x = oracle::random_tensor({n, c, d, h, w}, rng);
    const Tensor kern = oracle::random_tensor({o, c, k[0], k[1], k[2]}, rng);
    const Tensor y = ops::conv3d(x, kern, ConvSpec::make3d(c, o, k, s, p));
    std::array<std::int64_t, 5> shape{};
    const auto expect = oracle::conv_nd(values(x), {n, c, d, h, w}, values(kern), {o, c, k[0], k[1], k[2]}, s, p, shape);
    ASSERT_EQ(y.shape(), (Shape{shape.begin(), shape.end()}));
    for (std::size_t i = 0; i < expect.size(); ++i) ASSERT_NEAR(y[static_cast<std::int64_t>(i)], expect[i], 1e-12);
  }
}

TEST(Conv3d, Specified1x2x4x6x6Case) {
  Rng rng(23);
  const Tensor x = oracle::random_tensor({1, 2, 4, 6, 6}, rng), k = oracle::random_tensor({3, 2, 3, 3, 3}, rng);
  const Tensor y = ops::conv3d(x, k, ConvSpec::make3d(2, 3, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}));
  std::array<std::int64_t, 5> shape{};
  const auto expect = oracle::conv_nd(values(x), {1, 2, 4, 6, 6}, values(k), {3, 2, 3, 3, 3}, {1, 1, 1}, {1, 1, 1}, shape);
  for (std::size_t i = 0; i < expect.size(); ++i) ASSERT_NEAR(y[static_cast<std::int64_t>(i)], expect[i], 1e-12);
}

TEST(Conv3d, DepthOneEqualsConv2d) {
  Rng rng(24);
  for (int t = 0; t < 20; ++t) {
    const std::int64_t n = 1 + rng.below(9), c = 1 + rng.below(3), o = 1 + rng.below(3), k = 1 + rng.below(3);
    const std::int64_t stride = 1 + rng.below(2), pad = rng.below(2), h = k + rng.below(5), w = k + rng.below(5);
    const Tensor x = oracle::random_tensor({n, c, h, w}, rng), kern = oracle::random_tensor({o, c, k, k}, rng);
    const Tensor a = ops::conv2d(x, kern, ConvSpec::make2d(c, o, k, k, stride, pad));
    const Tensor b = ops::conv3d(ops::reshape(x, {n, c, 1, h, w}), ops::reshape(kern, {o, c, 1, k, k}),
                                 ConvSpec::make3d(c, o, {1, k, k}, {1, stride, stride}, {0, pad, pad}));
    ASSERT_EQ(a.numel(), b.numel());
    for (std::int64_t i = 0; i < a.numel(); ++i) ASSERT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(Conv3d, FullTemporalKernelEqualsChannelFlattenedConv2d) {
  Rng rng(25);
  const std::int64_t n = 3, c = 2, d = 4, h = 5, w = 5, o = 3;
  const Tensor x = oracle::random_tensor({n, c, d, h, w}, rng), k = oracle::random_tensor({o, c, d, 3, 3}, rng);
  const Tensor y3 = ops::conv3d(x, k, ConvSpec::make3d(c, o, {d, 3, 3}, {1, 1, 1}, {0, 1, 1}));
  ASSERT_EQ(y3.dim(2), 1);
  // [N,C,D,H,W] flattens to [N,C*D,H,W] and [O,C,D,kh,kw] to [O,C*D,kh,kw].
  const Tensor y2 = ops::conv2d(ops::reshape(x, {n, c * d, h, w}), ops::reshape(k, {o, c * d, 3, 3}),
                                ConvSpec::make2d(c * d, o, 3, 3, 1, 1));
  for (std::int64_t i = 0; i < y2.numel(); ++i) ASSERT_NEAR(y3[i], y2[i], 1e-12);
}

TEST(Conv, LinearInInputAndKernel) {
  Rng rng(26);
  const double a = 0.7, b = -1.3;
  const auto spec2 = ConvSpec::make2d(2, 3, 3, 3, 1, 1);
  const auto spec3 = ConvSpec::make3d(2, 3, {3, 3, 3}, {1, 1, 1}, {1, 1, 1});
  auto check = [&](auto conv, const Shape& xs, const Shape& ks) {
    const Tensor x = oracle::random_tensor(xs, rng), y = oracle::random_tensor(xs, rng);
    const Tensor k = oracle::random_tensor(ks, rng), l = oracle::random_tensor(ks, rng);
    const Tensor lhs = conv(ops::add(ops::scale(x, a), ops::scale(y, b)), k);
    const Tensor rhs = ops::add(ops::scale(conv(x, k), a), ops::scale(conv(y, k), b));
    for (std::int64_t i = 0; i < lhs.numel(); ++i) ASSERT_NEAR(lhs[i], rhs[i], 1e-10);
    const Tensor lk = conv(x, ops::add(ops::scale(k, a), ops::scale(l, b)));
    const Tensor rk = ops::add(ops::scale(conv(x, k), a), ops::scale(conv(x, l), b));
    for (std::int64_t i = 0; i < lk.numel(); ++i) ASSERT_NEAR(lk[i], rk[i], 1e-10);
  };
  check([&](const Tensor& x, const Tensor& k) { return ops::conv2d(x, k, spec2); }, {3, 2, 6, 5}, {3, 2, 3, 3});
  check([&](const Tensor& x, const Tensor& k) { return ops::conv3d(x, k, spec3); }, {2, 2, 4, 5, 5}, {3, 2, 3, 3, 3});
}

TEST(Conv, BatchSplitIsIrrelevant) {
  // Samples are processed in packed groups; results must not depend on the
  // group a sample lands in.
  Rng rng(27);
  const Tensor x = oracle::random_tensor({11, 2, 5, 5}, rng), k = oracle::random_tensor({2, 2, 3, 3}, rng);
  const auto spec = ConvSpec::make2d(2, 2, 3, 3, 1, 1);
  const Tensor all = ops::conv2d(x, k, spec);
  const std::int64_t per = 2 * 5 * 5;
  for (std::int64_t b = 0; b < 11; ++b) {
    const std::vector<double> one(x.data().begin() + b * per, x.data().begin() + (b + 1) * per);
    const Tensor y = ops::conv2d(Tensor::from({1, 2, 5, 5}, one), k, spec);
    for (std::int64_t i = 0; i < y.numel(); ++i) ASSERT_EQ(y[i], all[b * y.numel() + i]);
  }
}

}  // namespace
}  // namespace vsop3d
