#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "echoseg/metrics.hpp"
#include "echoseg/rng.hpp"
#include "metric_oracle.hpp"

using namespace echoseg;
using echoseg::testing::oracle_metrics;

namespace {

Mask make(std::size_t h, std::size_t w, std::vector<std::uint8_t> px) {
  Mask m(h, w);
  m.pixels = std::move(px);
  return m;
}

Mask random_mask(std::size_t h, std::size_t w, Rng& rng, double p) {
  Mask m(h, w);
  for (auto& v : m.pixels) v = rng.uniform() < p ? 1 : 0;
  return m;
}

}  // namespace

TEST(Binarize, StrictThreshold) {
  const TensorF probs({1, 3}, std::vector<float>{0.4f, 0.5f, 0.6f});
  EXPECT_EQ(binarize(probs, 0.5).pixels, (std::vector<std::uint8_t>{0, 0, 1}));
  EXPECT_EQ(binarize(TensorF({4, 4}), 0.5).count(), 0u);
  EXPECT_EQ(binarize(TensorF({2, 2}, 1.0f), 1.0).count(), 0u);
}

TEST(Binarize, ZeroThresholdOracle) {
  Rng rng(1);
  TensorD probs({1, 1, 8, 8});
  for (auto& v : probs.data()) v = rng.uniform();
  probs[5] = 0.0;
  const Mask m = binarize(probs, 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i) EXPECT_EQ(m.pixels[i], probs[i] > 0.0 ? 1 : 0);
  EXPECT_EQ(m.pixels[5], 0);
  EXPECT_EQ(m.height, 8u);
}

TEST(Binarize, Errors) {
  EXPECT_THROW(binarize(TensorF({2, 2}), 1.5), ValidationError);
  EXPECT_THROW(binarize(TensorF({2, 2}), -0.1), ValidationError);
  EXPECT_THROW(binarize(TensorF({2, 2}, 2.0f), 0.5), ValidationError);
  EXPECT_THROW(binarize(TensorF({2, 2, 2}), 0.5), ShapeError);
}

TEST(Iou, Examples) {
  const Mask a = make(2, 2, {1, 1, 0, 0});
  const Mask b = make(2, 2, {1, 0, 0, 0});
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(make(2, 2, {1, 0, 0, 0}), make(2, 2, {0, 0, 0, 1})), 0.0);
  EXPECT_EQ(iou(a, b), 0.5);
  EXPECT_EQ(iou(Mask(3, 3), Mask(3, 3)), 1.0);
  EXPECT_THROW(iou(Mask(2, 2), Mask(2, 3)), ShapeError);
}

TEST(Dice, Examples) {
  const Mask a = make(2, 2, {1, 1, 0, 0});
  const Mask b = make(2, 2, {1, 0, 0, 0});
  EXPECT_EQ(dice(a, a), 1.0);
  EXPECT_DOUBLE_EQ(dice(a, b), 2.0 / 3.0);
  EXPECT_EQ(dice(Mask(3, 3), Mask(3, 3)), 1.0);
  EXPECT_THROW(dice(Mask(2, 2), Mask(3, 2)), ShapeError);
}

TEST(PixelAccuracy, Examples) {
  Rng rng(2);
  const Mask a = random_mask(5, 5, rng, 0.5);
  Mask comp = a;
  for (auto& v : comp.pixels) v = 1 - v;
  EXPECT_EQ(pixel_accuracy(a, a), 1.0);
  EXPECT_EQ(pixel_accuracy(a, comp), 0.0);
  Mask big(112, 112);
  Mask one_off = big;
  one_off(50, 60) = 1;
  EXPECT_DOUBLE_EQ(pixel_accuracy(one_off, big), 1.0 - 1.0 / 12544.0);
  EXPECT_THROW(pixel_accuracy(Mask(2, 2), Mask(2, 3)), ShapeError);
}

TEST(Confusion, CountsSumToArea) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const Mask a = random_mask(7, 9, rng, 0.4), b = random_mask(7, 9, rng, 0.6);
    const auto c = confusion(a, b);
    EXPECT_EQ(c.total(), 63u);
    EXPECT_EQ(c.tp + c.fp, a.count());
    EXPECT_EQ(c.tp + c.fn, b.count());
  }
}

TEST(EvaluateDataset, Means) {
  const Mask a = make(2, 2, {1, 1, 0, 0});
  const Mask none = make(2, 2, {0, 0, 1, 1});
  const std::vector<Mask> one = {a};
  const auto s1 = evaluate_dataset(one, one);
  EXPECT_EQ(s1.mean_iou, 1.0);
  EXPECT_EQ(s1.mean_dice, 1.0);
  EXPECT_EQ(s1.mean_pixel_accuracy, 1.0);
  EXPECT_EQ(s1.n_images, 1u);

  const std::vector<Mask> preds = {a, a}, gts = {a, none};
  EXPECT_EQ(evaluate_dataset(preds, gts).mean_iou, 0.5);
  EXPECT_THROW(evaluate_dataset(std::span<const Mask>{}, std::span<const Mask>{}), ValidationError);
  EXPECT_THROW(evaluate_dataset(preds, one), ValidationError);
}

TEST(EvaluateDataset, MatchesBruteForceOracleExactly) {
  Rng rng(4);
  std::vector<Mask> preds, gts;
  double iou_sum = 0, dice_sum = 0, acc_sum = 0;
  for (int t = 0; t < 1000; ++t) {
    // Densities include empty and full masks.
    preds.push_back(random_mask(8, 8, rng, rng.below(6) / 5.0));
    gts.push_back(random_mask(8, 8, rng, rng.below(6) / 5.0));
    const auto o = oracle_metrics(preds.back(), gts.back());
    EXPECT_EQ(iou(preds.back(), gts.back()), o.iou.value());
    EXPECT_EQ(dice(preds.back(), gts.back()), o.dice.value());
    EXPECT_EQ(pixel_accuracy(preds.back(), gts.back()), o.pixel_accuracy.value());
    iou_sum += o.iou.value();
    dice_sum += o.dice.value();
    acc_sum += o.pixel_accuracy.value();
  }
  const auto s = evaluate_dataset(preds, gts);
  EXPECT_EQ(s.mean_iou, iou_sum / 1000);
  EXPECT_EQ(s.mean_dice, dice_sum / 1000);
  EXPECT_EQ(s.mean_pixel_accuracy, acc_sum / 1000);
}

TEST(Properties, OrderingIdentitySymmetryPermutation) {
  Rng rng(5);
  for (int t = 0; t < 500; ++t) {
    const std::size_t h = 1 + rng.below(10), w = 1 + rng.below(10);
    const Mask a = random_mask(h, w, rng, rng.uniform()), b = random_mask(h, w, rng, rng.uniform());
    const double i = iou(a, b), d = dice(a, b), p = pixel_accuracy(a, b);
    EXPECT_LE(0.0, i);
    EXPECT_LE(i, d);
    EXPECT_LE(d, 1.0);
    EXPECT_NEAR(d, 2 * i / (1 + i), 1e-12);
    EXPECT_EQ(i, iou(b, a));
    EXPECT_EQ(d, dice(b, a));
    EXPECT_EQ(p, pixel_accuracy(b, a));

    std::vector<std::size_t> perm(h * w);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm, rng);
    Mask pa(h, w), pb(h, w);
    for (std::size_t k = 0; k < perm.size(); ++k) {
      pa.pixels[k] = a.pixels[perm[k]];
      pb.pixels[k] = b.pixels[perm[k]];
    }
    EXPECT_EQ(iou(pa, pb), i);
    EXPECT_EQ(dice(pa, pb), d);
    EXPECT_EQ(pixel_accuracy(pa, pb), p);
  }
}

TEST(MaskFromTensor, RequiresBinary) {
  EXPECT_EQ(mask_from_tensor(TensorF({1, 2, 2}, std::vector<float>{0, 1, 1, 0})).pixels,
            (std::vector<std::uint8_t>{0, 1, 1, 0}));
  EXPECT_THROW(mask_from_tensor(TensorF({2, 2}, 0.5f)), ValidationError);
}
