#include <gtest/gtest.h>

#include <cmath>

#include "echoseg/layers.hpp"
#include "test_util.hpp"

using namespace echoseg;
using echoseg::testing::random_tensor;

using VD = Variable<double>;
using VF = Variable<float>;

namespace {

double dot(const TensorD& a, const TensorD& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(ConvOutputSize, Arithmetic) {
  EXPECT_EQ(conv_output_size(112, 3, 1, 1), 112u);
  EXPECT_EQ(conv_output_size(7, 3, 2, 0), 3u);
  EXPECT_EQ(conv_output_size(2, 2, 1, 0), 1u);
  EXPECT_THROW(conv_output_size(6, 3, 2, 0), ShapeError);
  EXPECT_THROW(conv_output_size(2, 3, 1, 0), ShapeError);
}

TEST(Conv2d, SamePaddingShape) {
  Rng rng(1);
  const auto conv = Conv2D<float>::create(1, 8, 3, 1, 1, rng);
  const VF y = conv(VF(TensorF({1, 1, 112, 112}, 0.5f)));
  EXPECT_EQ(y.shape(), (Shape{1, 8, 112, 112}));
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(2);
  const TensorF x = random_tensor<float>({2, 1, 5, 7}, rng);
  const VF y = conv2d(VF(x), VF(TensorF({1, 1, 1, 1}, 1.0f)), VF(TensorF({1}, 0.0f)), 1, 0);
  EXPECT_EQ(y.value(), x);
}

TEST(Conv2d, CrossCorrelationNoFlip) {
  const VD x(TensorD({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4}));
  const VD w(TensorD({1, 1, 2, 2}, std::vector<double>{1, 0, 0, 1}));
  const VD y = conv2d(x, w, VD(TensorD({1})), 1, 0);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.value()[0], 5.0);
  const VD w2(TensorD({1, 1, 2, 2}, std::vector<double>{0, 1, 0, 0}));
  EXPECT_EQ(conv2d(x, w2, VD(TensorD({1})), 1, 0).value()[0], 2.0);
}

TEST(Conv2d, Errors) {
  const VD x(TensorD({1, 2, 6, 6}));
  EXPECT_THROW(conv2d(x, VD(TensorD({3, 4, 3, 3})), VD(TensorD({3})), 1, 1), ShapeError);
  EXPECT_THROW(conv2d(x, VD(TensorD({3, 2, 3, 3})), VD(TensorD({3})), 2, 0), ShapeError);
  EXPECT_THROW(conv2d(x, VD(TensorD({3, 2, 3, 3})), VD(TensorD({2})), 1, 1), ShapeError);
  EXPECT_THROW(conv2d(VD(TensorD({2, 6, 6})), VD(TensorD({3, 2, 3, 3})), VD(TensorD({3})), 1, 1),
               ShapeError);
}

TEST(Conv2d, FastPathMatchesReference) {
  Rng rng(3);
  struct Case {
    Shape x;
    std::size_t cout, k, stride, pad;
  };
  const std::vector<Case> cases = {{{1, 4, 6, 6}, 3, 3, 1, 1}, {{2, 3, 7, 7}, 5, 3, 2, 0},
                                   {{2, 3, 8, 8}, 4, 1, 1, 0}, {{1, 2, 9, 5}, 2, 3, 2, 1},
                                   {{3, 16, 14, 14}, 32, 3, 1, 1}, {{1, 1, 4, 4}, 2, 2, 2, 0}};
  for (const auto& c : cases) {
    const TensorD x = random_tensor<double>(c.x, rng);
    const TensorD w = random_tensor<double>({c.cout, c.x[1], c.k, c.k}, rng);
    const TensorD b = random_tensor<double>({c.cout}, rng);
    const TensorD fast = conv2d(VD(x), VD(w), VD(b), c.stride, c.pad).value();
    const TensorD ref = reference::conv2d(x, w, b, c.stride, c.pad);
    ASSERT_EQ(fast.shape(), ref.shape());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(fast[i], ref[i], 1e-6);

    const TensorF fastf =
        conv2d(VF(x.cast<float>()), VF(w.cast<float>()), VF(b.cast<float>()), c.stride, c.pad).value();
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(fastf[i], ref[i], 1e-5 * (1 + std::abs(ref[i])));
  }
}

TEST(Conv2d, BackwardMatchesReferenceInputGrad) {
  Rng rng(4);
  const TensorD x = random_tensor<double>({2, 3, 7, 7}, rng);
  const TensorD w = random_tensor<double>({4, 3, 3, 3}, rng);
  const TensorD u = random_tensor<double>({2, 4, 3, 3}, rng);
  VD xv(x, true);
  const VD y = conv2d(xv, VD(w, true), VD(TensorD({4}), true), 2, 0);
  sum(mul(y, VD(u))).backward();
  const TensorD ref = reference::conv2d_input_grad(u, w, x.shape(), 2, 0);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(xv.grad()[i], ref[i], 1e-12);
}

// <conv(x, w), u> == <x, conv_input_grad(u, w)>
TEST(Conv2d, AdjointIdentity) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t cin = 1 + rng.below(4), cout = 1 + rng.below(4);
    const std::size_t k = rng.below(2) ? 3 : 1, stride = 1 + rng.below(2), pad = k == 3 ? rng.below(2) : 0;
    std::size_t h = 4 + rng.below(6), w = 4 + rng.below(6);
    // Make the window sweep integral.
    while ((h + 2 * pad - k) % stride) ++h;
    while ((w + 2 * pad - k) % stride) ++w;
    const TensorD x = random_tensor<double>({2, cin, h, w}, rng);
    const TensorD wt = random_tensor<double>({cout, cin, k, k}, rng);
    const TensorD y = reference::conv2d(x, wt, TensorD({cout}), stride, pad);
    const TensorD u = random_tensor<double>(y.shape(), rng);
    const double lhs = dot(y, u);
    const double rhs = dot(x, reference::conv2d_input_grad(u, wt, x.shape(), stride, pad));
    EXPECT_NEAR(lhs, rhs, 1e-5 * std::max(1.0, std::abs(lhs))) << "trial " << trial;
  }
}

TEST(Conv2d, SamePaddingPreservesSizes) {
  Rng rng(6);
  for (std::size_t s = 3; s <= 12; ++s) {
    const auto block = ConvBlock<float>::create(2, 3, rng);
    const VF y = block(VF(random_tensor<float>({1, 2, s, s + 1}, rng)));
    EXPECT_EQ(y.shape(), (Shape{1, 3, s, s + 1}));
  }
}

TEST(MaxPool, Values) {
  const VD x(TensorD({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4}));
  const VD y = max_pool2x2(x);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.value()[0], 4.0);
  EXPECT_EQ(max_pool2x2(VF(TensorF({1, 16, 112, 112}))).shape(), (Shape{1, 16, 56, 56}));
  EXPECT_THROW(max_pool2x2(VF(TensorF({1, 1, 3, 4}))), ShapeError);
  EXPECT_THROW(max_pool2x2(VF(TensorF({1, 1, 4, 5}))), ShapeError);
}

TEST(MaxPool, TiesGoToFirstInRowMajorOrder) {
  VD x(TensorD({1, 1, 4, 4}, 7.0), true);
  const VD y = max_pool2x2(x);
  EXPECT_EQ(y.value(), TensorD({1, 1, 2, 2}, 7.0));
  sum(scale(y, 3.0)).backward();
  const std::vector<double> expected = {3, 0, 3, 0, 0, 0, 0, 0, 3, 0, 3, 0, 0, 0, 0, 0};
  EXPECT_EQ(x.grad().vector(), expected);
}

TEST(MaxPool, GradientRoutesToArgmax) {
  VD x(TensorD({1, 1, 2, 4}, std::vector<double>{1, 5, 2, 2, 3, 0, 9, 2}), true);
  sum(max_pool2x2(x)).backward();
  EXPECT_EQ(x.grad().vector(), (std::vector<double>{0, 1, 0, 0, 0, 0, 1, 0}));
}

TEST(MaxPool, NonExpansive) {
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    const TensorD x = random_tensor<double>({2, 3, 6, 8}, rng, -5, 5);
    const TensorD y = max_pool2x2(VD(x)).value();
    double mx = 0, my = 0;
    for (double v : x.data()) mx = std::max(mx, std::abs(v));
    for (double v : y.data()) my = std::max(my, std::abs(v));
    EXPECT_LE(my, mx);
  }
}

TEST(TransposeConv, Shapes) {
  Rng rng(8);
  const auto up = TransposeConv2D<float>::create(128, 64, rng);
  EXPECT_EQ(up(VF(TensorF({1, 128, 7, 7}))).shape(), (Shape{1, 64, 14, 14}));
  EXPECT_THROW(up(VF(TensorF({1, 64, 7, 7}))), ShapeError);
}

TEST(TransposeConv, ImpulseResponse) {
  TensorD x({1, 1, 3, 3});
  x.at(0, 0, 1, 2) = 1.0;
  const TensorD y = transpose_conv2x2(VD(x), VD(TensorD({1, 1, 2, 2}, 1.0)), VD(TensorD({1}))).value();
  ASSERT_EQ(y.shape(), (Shape{1, 1, 6, 6}));
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 6; ++c) {
      const bool inside = (r == 2 || r == 3) && (c == 4 || c == 5);
      EXPECT_EQ(y.at(0, 0, r, c), inside ? 1.0 : 0.0) << r << "," << c;
    }
  }
}

// Transpose conv forward equals the input gradient of the matching k2s2 conv.
TEST(TransposeConv, AdjointOfStride2Conv) {
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const std::size_t cin = 1 + rng.below(4), cout = 1 + rng.below(4);
    const std::size_t h = 1 + rng.below(5), w = 1 + rng.below(5);
    const TensorD x = random_tensor<double>({2, cin, h, w}, rng);
    const TensorD wt = random_tensor<double>({cin, cout, 2, 2}, rng);
    const TensorD fast = transpose_conv2x2(VD(x), VD(wt), VD(TensorD({cout}))).value();
    // conv weight layout (Cout_conv=cin, Cin_conv=cout): identical storage.
    const TensorD adj = reference::conv2d_input_grad(x, wt, Shape{2, cout, 2 * h, 2 * w}, 2, 0);
    const TensorD ref = reference::transpose_conv2x2(x, wt, TensorD({cout}));
    ASSERT_EQ(fast.shape(), adj.shape());
    for (std::size_t i = 0; i < adj.size(); ++i) {
      EXPECT_NEAR(fast[i], adj[i], 1e-12);
      EXPECT_NEAR(ref[i], adj[i], 1e-12);
    }
  }
}

TEST(TransposeConv, EveryOutputPixelHasOneContribution) {
  Rng rng(10);
  const std::size_t h = 3, w = 4;
  TensorD counts({1, 1, 2 * h, 2 * w});
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      TensorD x({1, 1, h, w});
      x.at(0, 0, r, c) = 1.0;
      const TensorD y = transpose_conv2x2(VD(x), VD(TensorD({1, 1, 2, 2}, 1.0)), VD(TensorD({1}))).value();
      for (std::size_t i = 0; i < y.size(); ++i) counts[i] += y[i];
    }
  }
  EXPECT_EQ(counts, TensorD({1, 1, 2 * h, 2 * w}, 1.0));
}

TEST(ConvBlock, ShapesAndZeroCase) {
  Rng rng(11);
  const auto block = ConvBlock<float>::create(1, 16, rng);
  EXPECT_EQ(block(VF(TensorF({1, 1, 112, 112}, 0.3f))).shape(), (Shape{1, 16, 112, 112}));

  ConvBlock<double> zero{{VD(TensorD({4, 2, 3, 3})), VD(TensorD({4})), 1, 1},
                         {VD(TensorD({4, 4, 3, 3})), VD(TensorD({4})), 1, 1}};
  EXPECT_EQ(zero(VD(random_tensor<double>({1, 2, 5, 5}, rng))).value(), TensorD({1, 4, 5, 5}));
}

TEST(Init, KaimingUniformAndZeroBias) {
  Rng a(12), b(12);
  const auto c1 = Conv2D<float>::create(8, 16, 3, 1, 1, a);
  const auto c2 = Conv2D<float>::create(8, 16, 3, 1, 1, b);
  EXPECT_EQ(c1.weight.value(), c2.weight.value());
  const double bound = std::sqrt(6.0 / (8 * 9));
  double max_abs = 0.0;
  for (float v : c1.weight.value().data()) max_abs = std::max(max_abs, std::abs(static_cast<double>(v)));
  EXPECT_LE(max_abs, bound);
  EXPECT_GT(max_abs, 0.9 * bound);
  EXPECT_EQ(c1.bias.value(), TensorF({16}));
  EXPECT_TRUE(c1.weight.requires_grad());

  std::vector<NamedParameter<float>> params;
  ConvBlock<float>::create(1, 4, a).collect_parameters("blk", params);
  ASSERT_EQ(params.size(), 4u);
  EXPECT_EQ(params[0].name, "blk.conv1.weight");
  EXPECT_EQ(params[3].name, "blk.conv2.bias");
}

TEST(AvgPool, Values) {
  const TensorD x({1, 1, 2, 4}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_EQ(avg_pool2x2(x).vector(), (std::vector<double>{3.5, 5.5}));
}
