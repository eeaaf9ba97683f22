#include "echoseg/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "echoseg/layers.hpp"
#include "echoseg/loss.hpp"
#include "echoseg/models.hpp"
#include "echoseg/rng.hpp"

namespace echoseg {

GradcheckScope parse_gradcheck_scope(const std::string& name) {
  if (name == "all") return GradcheckScope::all;
  if (name == "tensor") return GradcheckScope::tensor;
  if (name == "layers") return GradcheckScope::layers;
  if (name == "models") return GradcheckScope::models;
  throw ConfigError("unknown gradcheck module '" + name + "' (expected all|tensor|layers|models)");
}

namespace {

using V = Variable<double>;
using Vs = std::vector<V>;
using TD = Tensor<double>;

TD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  TD t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

TD random_binary(Shape shape, Rng& rng) {
  TD t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return t;
}

// scale() with a backward rule that is off by 10%.
V faulty_scale(const V& a, double factor) {
  TD out = a.value();
  for (auto& x : out.data()) x *= factor;
  return V::from_op(
      std::move(out), {a},
      [a, factor](const TD& g) {
        TD ga = g;
        for (auto& x : ga.data()) x *= 1.1 * factor;
        a.accumulate_grad(ga);
      },
      "faulty_scale");
}

class Suite {
 public:
  explicit Suite(const GradcheckSuiteOptions& o) : opts_(o), rng_(derive_seed(o.seed, 0x9c)) {}

  // Draws inputs until `f` evaluates clear of relu/max-pool kinks, so that
  // +-epsilon never straddles one. Returns the last draw if none qualifies.
  template <typename Draw, typename F>
  void draw_clear_of_kinks(Draw draw, F f) {
    for (std::size_t attempt = 0; attempt < kMaxDraws; ++attempt) {
      draw();
      NoGradGuard no_grad;
      KinkMonitor monitor;
      f();
      if (monitor.margin() >= opts_.kink_margin) return;
    }
  }

  // Reduces `op(inputs)` to a scalar with random weights and checks all inputs.
  template <typename Gen, typename Op>
  void check_op(const std::string& name, Gen gen, Op op) {
    std::vector<TD> inputs;
    draw_clear_of_kinks([&] { inputs = gen(); },
                        [&] {
                          Vs probe(inputs.begin(), inputs.end());
                          op(probe);
                        });
    const Shape out_shape = [&] {
      Vs probe(inputs.begin(), inputs.end());
      NoGradGuard g;
      return op(probe).shape();
    }();
    TD weights = random_tensor(out_shape, rng_, 0.5, 1.5);
    reports_.push_back(grad_check(
        name, [&op, &weights](const Vs& v) { return weighted_sum(op(v), weights); }, inputs,
        opts_.epsilon, opts_.tolerance));
  }

  void check_scalar(const std::string& name, std::vector<TD> inputs,
                    const std::function<V(const Vs&)>& f) {
    reports_.push_back(grad_check(name, f, inputs, opts_.epsilon, opts_.tolerance));
  }

  auto uniform(Shape s, double lo = -1.0, double hi = 1.0) {
    return [this, s, lo, hi] { return random_tensor(s, rng_, lo, hi); };
  }

  template <typename... Gens>
  auto all_of(Gens... gens) {
    return [=] { return std::vector<TD>{gens()...}; };
  }

  void tensor_ops() {
    const Shape s{2, 3};
    check_op("add", all_of(uniform(s), uniform(s)), [](const Vs& v) { return add(v[0], v[1]); });
    check_op("sub", all_of(uniform(s), uniform(s)), [](const Vs& v) { return sub(v[0], v[1]); });
    check_op("mul", all_of(uniform(s), uniform(s)), [](const Vs& v) { return mul(v[0], v[1]); });
    check_op("scale", all_of(uniform(s)), [](const Vs& v) { return scale(v[0], -1.7); });
    check_scalar("sum", {random_tensor(s, rng_)}, [](const Vs& v) { return sum(mul(v[0], v[0])); });
    check_scalar("mean", {random_tensor(s, rng_)}, [](const Vs& v) { return mean(mul(v[0], v[0])); });
    check_op("relu", all_of(uniform({2, 5})), [](const Vs& v) { return relu(v[0]); });
    check_op("sigmoid", all_of(uniform({2, 5}, -4.0, 4.0)), [](const Vs& v) { return sigmoid(v[0]); });
    check_op("concat_channels", all_of(uniform({2, 2, 3, 3}), uniform({2, 3, 3, 3})),
             [](const Vs& v) { return concat_channels(v[0], v[1]); });
    check_op("slice_channels", all_of(uniform({2, 4, 3, 3})),
             [](const Vs& v) { return slice_channels(v[0], 1, 3); });
    const TD targets = random_binary({1, 1, 4, 4}, rng_);
    check_scalar("bce_with_logits", {random_tensor({1, 1, 4, 4}, rng_, -3.0, 3.0)},
                 [targets](const Vs& v) { return bce_with_logits(v[0], targets); });
    const TD target = random_tensor({1, 1, 4, 4}, rng_);
    check_scalar("mse_loss", {random_tensor({1, 1, 4, 4}, rng_)},
                 [target](const Vs& v) { return mse_loss(v[0], target); });
  }

  void layer_ops() {
    check_op("conv2d_3x3_pad1", all_of(uniform({1, 4, 6, 6}), uniform({3, 4, 3, 3}), uniform({3})),
             [](const Vs& v) { return conv2d(v[0], v[1], v[2], 1, 1); });
    check_op("conv2d_3x3_stride2", all_of(uniform({2, 2, 7, 7}), uniform({3, 2, 3, 3}), uniform({3})),
             [](const Vs& v) { return conv2d(v[0], v[1], v[2], 2, 0); });
    check_op("conv2d_1x1", all_of(uniform({2, 3, 4, 4}), uniform({2, 3, 1, 1}), uniform({2})),
             [](const Vs& v) { return conv2d(v[0], v[1], v[2], 1, 0); });
    check_op("max_pool2x2", all_of(uniform({2, 2, 4, 6})), [](const Vs& v) { return max_pool2x2(v[0]); });
    check_op("transpose_conv2x2", all_of(uniform({2, 3, 3, 3}), uniform({3, 2, 2, 2}), uniform({2})),
             [](const Vs& v) { return transpose_conv2x2(v[0], v[1], v[2]); });
    check_op("conv_block",
             all_of(uniform({1, 2, 5, 5}), uniform({3, 2, 3, 3}), uniform({3}), uniform({3, 3, 3, 3}),
                    uniform({3})),
             [](const Vs& v) {
               ConvBlock<double> block{{v[1], v[2], 1, 1}, {v[3], v[4], 1, 1}};
               return block(v[0]);
             });
  }

  void model_ops() {
    const TD recon = random_tensor({1, 1, 4, 4}, rng_);
    const TD recon_target = random_tensor({1, 1, 4, 4}, rng_);
    check_scalar("matryoshka_loss", {recon, random_tensor({1, 1, 2, 2}, rng_)},
                 [recon_target, t2 = random_tensor({1, 1, 2, 2}, rng_)](const Vs& v) {
                   return matryoshka_loss<double>({v[0], v[1]}, {recon_target, t2});
                 });
    model_loss(ModelKind::vanilla, "vanilla_unet_loss");
    model_loss(ModelKind::matae, "matae_unet_loss");
  }

  void model_loss(ModelKind kind, const std::string& name) {
    const UNetConfig cfg{1, 1, 1, 4};
    const UNet<double> model(kind, cfg, derive_seed(opts_.seed, kind == ModelKind::vanilla ? 1 : 2));
    auto params = model.parameters();
    std::vector<V> leaves;
    for (const auto& p : params) leaves.push_back(p.variable);
    TD images({2, 1, 4, 4});
    TD masks({2, 1, 4, 4});
    auto loss = [&] { return training_loss(model.forward(images), images, masks, 0.1).total; };

    for (std::size_t attempt = 0; attempt < kMaxDraws; ++attempt) {
      // Non-zero biases so every bias path is exercised away from init.
      for (auto& p : params) {
        if (p.name.ends_with(".bias")) {
          for (auto& b : p.variable.mutable_value().data()) b = rng_.uniform(-0.1, 0.1);
        }
      }
      images = random_tensor(images.shape(), rng_, 0.0, 1.0);
      masks = random_binary(masks.shape(), rng_);
      {
        NoGradGuard no_grad;
        KinkMonitor monitor;
        loss();
        if (monitor.margin() < opts_.kink_margin) continue;
      }
      if (smallest_nonzero_gradient(loss, leaves) >= opts_.min_gradient) break;
    }
    reports_.push_back(grad_check(name, loss, leaves, opts_.model_epsilon, opts_.tolerance));
  }

  // Central differences cannot resolve gradients that cancel to near zero
  // relative to the loss; such draws are skipped (exact zeros are fine).
  template <typename F>
  static double smallest_nonzero_gradient(F loss, std::vector<V>& leaves) {
    for (auto& leaf : leaves) leaf.clear_grad();
    loss().backward();
    double smallest = std::numeric_limits<double>::infinity();
    for (auto& leaf : leaves) {
      if (!leaf.has_grad()) continue;
      for (const double g : leaf.grad().data()) {
        if (g != 0.0) smallest = std::min(smallest, std::abs(g));
      }
      leaf.clear_grad();
    }
    return smallest;
  }

  std::vector<GradCheckReport> run() {
    const auto scope = opts_.scope;
    if (scope == GradcheckScope::all || scope == GradcheckScope::tensor) tensor_ops();
    if (scope == GradcheckScope::all || scope == GradcheckScope::layers) layer_ops();
    if (scope == GradcheckScope::all || scope == GradcheckScope::models) model_ops();
    if (opts_.inject_fault) {
      check_op("faulty_scale", all_of(uniform({2, 3})), [](const Vs& v) { return faulty_scale(v[0], 2.0); });
    }
    return std::move(reports_);
  }

 private:
  static constexpr std::size_t kMaxDraws = 500;

  GradcheckSuiteOptions opts_;
  Rng rng_;
  std::vector<GradCheckReport> reports_;
};

}  // namespace

std::vector<GradCheckReport> run_gradcheck_suite(const GradcheckSuiteOptions& options) {
  return Suite(options).run();
}

}  // namespace echoseg
