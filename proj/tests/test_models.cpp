#include <gtest/gtest.h>

#include <set>

#include "echoseg/loss.hpp"
#include "echoseg/models.hpp"
#include "test_util.hpp"

using namespace echoseg;
using echoseg::testing::random_tensor;

namespace {

std::size_t conv_params(std::size_t cin, std::size_t cout, std::size_t k) { return cout * cin * k * k + cout; }

}  // namespace

TEST(UNetConfig, ChannelSchedule) {
  const UNetConfig cfg;
  EXPECT_EQ(cfg.depth, 4u);
  EXPECT_EQ(cfg.base_channels, 16u);
  std::vector<std::size_t> enc;
  for (std::size_t s = 0; s < cfg.depth; ++s) enc.push_back(cfg.stage_channels(s));
  EXPECT_EQ(enc, (std::vector<std::size_t>{16, 32, 64, 128}));
  EXPECT_EQ(cfg.stage_channels(cfg.depth), 256u);
  EXPECT_EQ(cfg.size_divisor(), 16u);
}

TEST(UNetConfig, Validation) {
  EXPECT_THROW((UNetConfig{1, 1, 0, 16}.validate()), ConfigError);
  EXPECT_THROW((UNetConfig{1, 1, 2, 0}.validate()), ConfigError);
  EXPECT_THROW((UNet<float>(ModelKind::matae, UNetConfig{1, 1, 2, 3}, 0)), ConfigError);
  EXPECT_NO_THROW((UNet<float>(ModelKind::vanilla, UNetConfig{1, 1, 2, 3}, 0)));
  EXPECT_EQ(parse_model_kind("matae"), ModelKind::matae);
  EXPECT_EQ(to_string(ModelKind::vanilla), "vanilla");
  EXPECT_THROW(parse_model_kind("resnet"), ConfigError);
}

TEST(Vanilla, MinimalConfigRuns) {
  const auto model = build_vanilla_unet<float>(UNetConfig{1, 1, 1, 1}, 0);
  const auto out = model.forward(TensorF({1, 1, 2, 2}, 0.5f));
  EXPECT_EQ(out.logits.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_TRUE(out.aux_reconstructions.empty());
}

TEST(Vanilla, ParameterCountMatchesHandSum) {
  const auto model = build_vanilla_unet<float>(UNetConfig{1, 1, 2, 4}, 0);
  const std::size_t expected =
      conv_params(1, 4, 3) + conv_params(4, 4, 3)            // enc0
      + conv_params(4, 8, 3) + conv_params(8, 8, 3)          // enc1
      + conv_params(8, 16, 3) + conv_params(16, 16, 3)       // bottleneck
      + (16 * 8 * 4 + 8) + conv_params(16, 8, 3) + conv_params(8, 8, 3)  // dec0
      + (8 * 4 * 4 + 4) + conv_params(8, 4, 3) + conv_params(4, 4, 3)    // dec1
      + conv_params(4, 1, 1);                                // head
  EXPECT_EQ(expected, 7397u);
  EXPECT_EQ(model.parameter_count(), expected);
}

TEST(MatAE, HeadsAndParameterCount) {
  const UNetConfig cfg{1, 1, 4, 16};
  const auto matae = build_matae_unet<float>(cfg, 0);
  const auto vanilla = build_vanilla_unet<float>(cfg, 0);
  const auto& heads = matae.reconstruction_heads();
  ASSERT_EQ(heads.size(), 12u);
  const std::vector<std::vector<std::size_t>> expected = {{4, 8, 16}, {8, 16, 32}, {16, 32, 64}, {32, 64, 128}};
  std::size_t head_params = 0;
  for (std::size_t i = 0; i < heads.size(); ++i) {
    EXPECT_EQ(heads[i].stage, i / 3);
    EXPECT_EQ(heads[i].channels, expected[i / 3][i % 3]);
    head_params += heads[i].channels * cfg.in_channels + cfg.in_channels;
  }
  EXPECT_EQ(matae.parameter_count(), vanilla.parameter_count() + head_params);

  const auto small = build_matae_unet<float>(UNetConfig{1, 1, 2, 4}, 0);
  EXPECT_EQ(small.parameter_count(), 7397u + (2 + 3 + 5) + (3 + 5 + 9));
}

TEST(Forward, LogitsMatchInputShape) {
  const auto model = build_vanilla_unet<float>(UNetConfig{}, 1);
  Rng rng(1);
  const auto out = model.forward(random_tensor<float>({2, 1, 112, 112}, rng, 0, 1));
  EXPECT_EQ(out.logits.shape(), (Shape{2, 1, 112, 112}));
}

TEST(Forward, BottleneckOfOnePixel) {
  const auto model = build_matae_unet<float>(UNetConfig{}, 1);
  const auto out = model.forward(TensorF({1, 1, 16, 16}, 0.2f));
  EXPECT_EQ(out.logits.shape(), (Shape{1, 1, 16, 16}));
  EXPECT_EQ(out.aux_reconstructions.back().value.shape(), (Shape{1, 1, 1, 1}));
}

TEST(Forward, MatAEReconstructionSchedule) {
  const auto model = build_matae_unet<float>(UNetConfig{1, 1, 2, 4}, 2);
  const auto out = model.forward(TensorF({1, 1, 32, 32}, 0.2f));
  ASSERT_EQ(out.aux_reconstructions.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    const std::size_t side = i < 3 ? 16 : 8;
    EXPECT_EQ(out.aux_reconstructions[i].value.shape(), (Shape{1, 1, side, side}));
    EXPECT_EQ(out.aux_reconstructions[i].denominator, kPrefixDenominators[i % 3]);
  }
  const auto full = build_matae_unet<float>(UNetConfig{}, 2).forward(TensorF({1, 1, 112, 112}, 0.2f));
  EXPECT_EQ(full.aux_reconstructions[2].stage, 0u);
  EXPECT_EQ(full.aux_reconstructions[2].denominator, 1u);
  EXPECT_EQ(full.aux_reconstructions[2].value.shape(), (Shape{1, 1, 56, 56}));
}

TEST(Forward, InputErrors) {
  const auto model = build_vanilla_unet<float>(UNetConfig{}, 0);
  try {
    model.forward(TensorF({1, 1, 100, 100}));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("16"), std::string::npos) << e.what();
  }
  EXPECT_THROW(model.forward(TensorF({1, 2, 16, 16})), ShapeError);
  EXPECT_THROW(model.forward(TensorF({1, 16, 16})), ShapeError);
}

TEST(Forward, Deterministic) {
  Rng rng(3);
  const TensorF x = random_tensor<float>({2, 1, 32, 32}, rng, 0, 1);
  const auto a = build_matae_unet<float>(UNetConfig{1, 1, 3, 8}, 7);
  const auto b = build_matae_unet<float>(UNetConfig{1, 1, 3, 8}, 7);
  const auto oa = a.forward(x), ob = b.forward(x);
  EXPECT_EQ(oa.logits.value(), ob.logits.value());
  EXPECT_EQ(oa.logits.value(), a.forward(x).logits.value());
  for (std::size_t i = 0; i < oa.aux_reconstructions.size(); ++i) {
    EXPECT_EQ(oa.aux_reconstructions[i].value.value(), ob.aux_reconstructions[i].value.value());
  }
  const auto c = build_matae_unet<float>(UNetConfig{1, 1, 3, 8}, 8);
  EXPECT_NE(c.forward(x).logits.value(), oa.logits.value());
}

// The heads are built after the shared layers, so the same seed gives the
// same segmentation network.
TEST(Forward, MatAELogitsEqualVanillaForSameSeed) {
  Rng rng(4);
  const TensorF x = random_tensor<float>({1, 1, 16, 16}, rng, 0, 1);
  const UNetConfig cfg{1, 1, 2, 4};
  EXPECT_EQ(build_matae_unet<float>(cfg, 5).forward(x).logits.value(),
            build_vanilla_unet<float>(cfg, 5).forward(x).logits.value());
}

TEST(Parameters, NamesStableAndUnique) {
  const UNetConfig cfg{1, 1, 3, 4};
  const auto a = build_matae_unet<float>(cfg, 0).parameters();
  const auto b = build_matae_unet<float>(cfg, 99).parameters();
  ASSERT_EQ(a.size(), b.size());
  std::set<std::string> names;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    names.insert(a[i].name);
  }
  EXPECT_EQ(names.size(), a.size());
  EXPECT_EQ(a.front().name, "enc0.conv1.weight");
  EXPECT_TRUE(names.count("bottleneck.conv2.bias"));
  EXPECT_TRUE(names.count("dec2.up.weight"));
  EXPECT_TRUE(names.count("head.weight"));
  EXPECT_TRUE(names.count("recon.s2.f4.weight"));
}

TEST(Parameters, CopiesShareNodes) {
  const auto model = build_vanilla_unet<float>(UNetConfig{1, 1, 1, 2}, 0);
  const auto copy = model;
  EXPECT_TRUE(model.parameters()[0].variable.same_node(copy.parameters()[0].variable));
}

TEST(MatAE, PrefixesAreNested) {
  const auto model = build_matae_unet<double>(UNetConfig{1, 1, 2, 8}, 1);
  Rng rng(5);
  const auto pooled = model.encode_pooled(random_tensor<double>({1, 1, 8, 8}, rng, 0, 1));
  ASSERT_EQ(pooled.size(), 2u);
  for (const auto& stage : pooled) {
    const std::size_t c = stage.shape()[1];
    const auto quarter = slice_channels(stage, 0, c / 4).value();
    const auto half = slice_channels(stage, 0, c / 2).value();
    const auto prefix_of_half = slice_channels(Variable<double>(half), 0, c / 4).value();
    EXPECT_EQ(quarter, prefix_of_half);
  }
}

TEST(MatAE, ZeroLambdaGivesHeadsZeroGradient) {
  const auto model = build_matae_unet<double>(UNetConfig{1, 1, 2, 4}, 3);
  Rng rng(6);
  const TensorD x = random_tensor<double>({2, 1, 8, 8}, rng, 0, 1);
  TensorD y({2, 1, 8, 8});
  for (auto& v : y.data()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  const auto loss = training_loss(model.forward(x), x, y, 0.0);
  EXPECT_EQ(loss.breakdown.total, loss.breakdown.segmentation_bce);
  EXPECT_GT(loss.breakdown.matryoshka_mse, 0.0);
  loss.total.backward();
  bool any_trunk_grad = false;
  for (const auto& p : model.parameters()) {
    ASSERT_TRUE(p.variable.has_grad()) << p.name;
    double norm = 0.0;
    for (double g : p.variable.grad().data()) norm += std::abs(g);
    if (p.name.starts_with("recon.")) {
      EXPECT_EQ(norm, 0.0) << p.name;
    } else {
      any_trunk_grad = any_trunk_grad || norm > 0.0;
    }
  }
  EXPECT_TRUE(any_trunk_grad);
}

TEST(Forward, RandomConfigsProperty) {
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    const std::size_t depth = 1 + rng.below(3);
    const std::size_t base = 4 + rng.below(5);
    const std::size_t div = std::size_t{1} << depth;
    const std::size_t h = div * (1 + rng.below(3)), w = div * (1 + rng.below(3));
    const auto model = build_matae_unet<float>(UNetConfig{1, 1, depth, base}, t);
    const auto out = model.forward(random_tensor<float>({1, 1, h, w}, rng, 0, 1));
    EXPECT_EQ(out.logits.shape(), (Shape{1, 1, h, w}));
    ASSERT_EQ(out.aux_reconstructions.size(), 3 * depth);
    for (const auto& aux : out.aux_reconstructions) {
      const std::size_t f = std::size_t{2} << aux.stage;
      EXPECT_EQ(aux.value.shape(), (Shape{1, 1, h / f, w / f}));
    }
  }
}
