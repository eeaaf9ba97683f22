#include "echoseg/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "echoseg/gradcheck_suite.hpp"
#include "echoseg/phantom.hpp"
#include "echoseg/pipeline.hpp"
#include "echoseg/report.hpp"

namespace echoseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Raised for arguments that parse but are semantically invalid.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::pair<std::size_t, std::size_t> parse_size(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument("missing 'x'");
    std::size_t used_h = 0, used_w = 0;
    const std::string hs = text.substr(0, x), ws = text.substr(x + 1);
    const long h = std::stol(hs, &used_h);
    const long w = std::stol(ws, &used_w);
    if (used_h != hs.size() || used_w != ws.size() || h <= 0 || w <= 0) throw std::invalid_argument("bad");
    return {static_cast<std::size_t>(h), static_cast<std::size_t>(w)};
  } catch (const std::exception&) {
    throw UsageError("--size must look like HxW (e.g. 112x112), got '" + text + "'");
  }
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * fraction);
  return buf;
}

void print_metrics(const std::string& label, const MetricSummary& m) {
  std::cout << label << ": mean IoU " << percent(m.mean_iou) << ", mean Dice " << percent(m.mean_dice)
            << ", mean pixel accuracy " << percent(m.mean_pixel_accuracy) << " over " << m.n_images
            << " images\n";
}

void maybe_write_report(const std::string& path, const json& report) {
  if (!path.empty()) write_report(path, report);
}

// --- synth -------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::size_t count = 10;
  std::string size = "112x112";
  std::uint64_t seed = 0;
  std::size_t depth = 4;
  PhantomConfig phantom;
};

int cmd_synth(const SynthArgs& args) {
  PhantomConfig cfg = args.phantom;
  std::tie(cfg.height, cfg.width) = parse_size(args.size);
  cfg.seed = args.seed;
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  const std::size_t divisor = std::size_t{1} << args.depth;
  if (cfg.height % divisor != 0 || cfg.width % divisor != 0) {
    std::cerr << "warning: size " << cfg.height << "x" << cfg.width << " is not divisible by " << divisor
              << " (2^depth for depth " << args.depth << "); models of that depth cannot consume it\n";
  }
  save_dataset(args.out, generate_phantoms(cfg, args.count));
  std::cout << "wrote " << args.count << " phantom pairs (" << cfg.height << "x" << cfg.width << ", seed "
            << cfg.seed << ") to " << args.out << "\n";
  return kExitOk;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string model = "vanilla";
  std::size_t epochs = 1;
  std::size_t batch = 4;
  double lr = 1e-3;
  double lambda = 0.1;
  std::uint64_t seed = 0;
  std::size_t depth = 4;
  std::size_t base = 16;
  std::size_t test_count = 0;
  std::size_t eval_every = 1;
  std::size_t checkpoint_every = 0;
  std::string out;
  std::string report;
  std::string resume;
  bool quiet = false;
};

int cmd_train(const TrainArgs& args) {
  TrainConfig cfg;
  try {
    cfg.kind = parse_model_kind(args.model);
    cfg.model.depth = args.depth;
    cfg.model.base_channels = args.base;
    cfg.epochs = args.epochs;
    cfg.batch_size = args.batch;
    cfg.lr = args.lr;
    cfg.lambda = args.lambda;
    cfg.seed = args.seed;
    cfg.eval_every = args.eval_every;
    cfg.checkpoint_every = args.checkpoint_every;
    cfg.checkpoint_path = args.out;
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }

  const std::vector<Sample> samples = load_dataset(args.data);
  if (samples.empty()) throw ValidationError("no samples found under '" + args.data + "'");
  if (args.test_count >= samples.size()) {
    throw UsageError("--test-count must leave at least one training sample");
  }
  auto [train_set, test_set] =
      split_dataset(samples, samples.size() - args.test_count, args.test_count, args.seed);

  std::optional<Trainer> trainer;
  if (!args.resume.empty()) {
    trainer.emplace(cfg, load_checkpoint(args.resume));
  } else {
    trainer.emplace(cfg);
  }
  const TrainConfig& used = trainer->config();
  if (!args.quiet) {
    std::cout << "training " << to_string(used.kind) << " U-Net (depth " << used.model.depth << ", base "
              << used.model.base_channels << ", " << trainer->model().parameter_count() << " parameters) on "
              << train_set.size() << " samples, " << test_set.size() << " held out\n";
  }
  const TrainHistory history = trainer->train(train_set, test_set, [&](const EpochRecord& r) {
    if (args.quiet) return;
    std::printf("epoch %zu/%zu  loss %.6f (bce %.6f, matryoshka %.6f)  %.1fs", r.epoch, used.epochs,
                r.mean_loss.total, r.mean_loss.segmentation_bce, r.mean_loss.matryoshka_mse, r.seconds);
    if (r.test_metrics) {
      std::printf("  test IoU %s Dice %s PA %s", percent(r.test_metrics->mean_iou).c_str(),
                  percent(r.test_metrics->mean_dice).c_str(),
                  percent(r.test_metrics->mean_pixel_accuracy).c_str());
    }
    std::printf("\n");
    std::fflush(stdout);
  });
  save_checkpoint(args.out, trainer->checkpoint());

  json config = to_json(used);
  config["data"] = args.data;
  config["test_count"] = args.test_count;
  config["resume"] = args.resume;
  maybe_write_report(args.report, make_report("train", config, to_json(history)));
  if (!args.quiet) std::cout << "checkpoint written to " << args.out << "\n";
  return kExitOk;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string data;
  std::string ckpt;
  double threshold = 0.5;
  std::string report;
};

int cmd_eval(const EvalArgs& args) {
  const Checkpoint ckpt = load_checkpoint(args.ckpt);
  const UNet<float> model = restore_model(ckpt);
  const std::vector<Sample> samples = load_dataset(args.data);
  if (samples.empty()) throw ValidationError("no samples found under '" + args.data + "'");
  const MetricSummary summary = evaluate(model, samples, args.threshold);
  print_metrics(to_string(model.kind()), summary);
  json config = {{"data", args.data},
                 {"ckpt", args.ckpt},
                 {"threshold", args.threshold},
                 {"model", to_string(model.kind())},
                 {"unet", to_json(model.config())}};
  maybe_write_report(args.report, make_report("eval", config, to_json(summary)));
  return kExitOk;
}

// --- predict -----------------------------------------------------------------

struct PredictArgs {
  std::string ckpt;
  std::string images;
  std::string out;
  double threshold = 0.5;
  bool overlay = false;
};

int cmd_predict(const PredictArgs& args) {
  const UNet<float> model = restore_model(load_checkpoint(args.ckpt));
  const auto frames = load_images(args.images);
  if (frames.empty()) throw ValidationError("no .pgm images found in '" + args.images + "'");
  std::vector<Tensor<float>> inputs;
  inputs.reserve(frames.size());
  for (const auto& [stem, img] : frames) inputs.push_back(image_to_tensor(img));
  const std::vector<Mask> masks = predict_masks(logits_fn(model), inputs, args.threshold);
  fs::create_directories(args.out);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& [stem, img] = frames[i];
    write_pgm(fs::path(args.out) / (stem + ".pgm"), mask_to_image(masks[i]));
    if (args.overlay) write_ppm(fs::path(args.out) / (stem + "_overlay.ppm"), render_overlay(img, masks[i]));
  }
  std::cout << "wrote " << masks.size() << " masks" << (args.overlay ? " and overlays" : "") << " to "
            << args.out << "\n";
  return kExitOk;
}

// --- bench -------------------------------------------------------------------

struct BenchArgs {
  std::string ckpt;
  std::string data;
  std::size_t reps = 3;
  std::size_t batch = 1;
  std::string report;
};

int cmd_bench(const BenchArgs& args) {
  const UNet<float> model = restore_model(load_checkpoint(args.ckpt));
  const std::vector<Sample> samples = load_dataset(args.data);
  const BenchReport bench = benchmark(logits_fn(model), samples, args.reps, args.batch);
  std::printf("inference %.4f s/frame over %zu frames x %zu reps (batch %zu), peak RSS %.1f MB\n",
              bench.mean_inference_seconds, bench.n_frames, bench.repetitions, bench.batch_size,
              bench.peak_resident_memory_mb);
  json config = {{"ckpt", args.ckpt}, {"data", args.data}, {"reps", args.reps}, {"batch", args.batch}};
  maybe_write_report(args.report, make_report("bench", config, to_json(bench)));
  return kExitOk;
}

// --- gradcheck ---------------------------------------------------------------

struct GradcheckArgs {
  std::string module = "all";
  std::uint64_t seed = 0;
  std::string report;
  bool inject_fault = false;
};

int cmd_gradcheck(const GradcheckArgs& args) {
  GradcheckSuiteOptions opts;
  opts.scope = parse_gradcheck_scope(args.module);
  opts.seed = args.seed;
  opts.inject_fault = args.inject_fault;
  const auto reports = run_gradcheck_suite(opts);
  bool all = true;
  for (const auto& r : reports) {
    std::printf("%-22s max rel err %.3e  %s\n", r.op_name.c_str(), r.max_relative_error,
                r.passed ? "ok" : "FAILED");
    all = all && r.passed;
  }
  std::printf("%zu ops checked, %s\n", reports.size(), all ? "all passed" : "FAILURES");
  json config = {{"module", args.module},
                 {"seed", args.seed},
                 {"epsilon", opts.epsilon},
                 {"tolerance", opts.tolerance},
                 {"precision", "double"}};
  maybe_write_report(args.report, make_report("gradcheck", config, to_json(reports)));
  return all ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"U-Net / Matryoshka-autoencoder U-Net segmentation toolkit", "echoseg"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate synthetic echo phantom image/mask pairs");
  s->add_option("--out", synth.out, "Output dataset directory")->required();
  s->add_option("--count", synth.count, "Number of pairs")->check(CLI::PositiveNumber);
  s->add_option("--size", synth.size, "Frame size HxW");
  s->add_option("--seed", synth.seed, "Generator seed");
  s->add_option("--depth", synth.depth, "Model depth used for the divisibility warning")->check(CLI::Range(1, 16));
  s->add_option("--area-min", synth.phantom.lv_area_fraction.lo, "Min cavity area fraction");
  s->add_option("--area-max", synth.phantom.lv_area_fraction.hi, "Max cavity area fraction");
  s->add_option("--ecc-min", synth.phantom.eccentricity.lo, "Min cavity axis ratio");
  s->add_option("--ecc-max", synth.phantom.eccentricity.hi, "Max cavity axis ratio");
  s->add_option("--speckle-min", synth.phantom.speckle_sigma.lo, "Min speckle sigma");
  s->add_option("--speckle-max", synth.phantom.speckle_sigma.hi, "Max speckle sigma");
  s->add_option("--sector-angle", synth.phantom.sector_angle_deg, "Sector opening angle (degrees)");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model on a dataset directory");
  t->add_option("--data", train.data, "Dataset directory (images/, masks/)")->required();
  t->add_option("--model", train.model, "vanilla or matae")->check(CLI::IsMember({"vanilla", "matae"}));
  t->add_option("--epochs", train.epochs, "Total epochs")->check(CLI::PositiveNumber);
  t->add_option("--batch", train.batch, "Batch size")->check(CLI::PositiveNumber);
  t->add_option("--lr", train.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  t->add_option("--lambda", train.lambda, "Matryoshka reconstruction weight")->check(CLI::NonNegativeNumber);
  t->add_option("--seed", train.seed, "Seed for init, split and shuffling");
  t->add_option("--depth", train.depth, "Pooling stages")->check(CLI::Range(1, 16));
  t->add_option("--base", train.base, "Channels of the first stage")->check(CLI::PositiveNumber);
  t->add_option("--test-count", train.test_count, "Samples held out for periodic evaluation");
  t->add_option("--eval-every", train.eval_every, "Evaluate every N epochs (0 = never)");
  t->add_option("--checkpoint-every", train.checkpoint_every, "Checkpoint every N epochs (0 = end only)");
  t->add_option("--resume", train.resume, "Continue from this checkpoint")->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "Checkpoint path")->required();
  t->add_option("--report", train.report, "JSON report path");
  t->add_flag("--quiet", train.quiet, "No per-epoch output");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  e->add_option("--data", eval.data, "Dataset directory")->required();
  e->add_option("--ckpt", eval.ckpt, "Checkpoint")->required();
  e->add_option("--threshold", eval.threshold, "Probability threshold")->check(CLI::Range(0.0, 1.0));
  e->add_option("--report", eval.report, "JSON report path");

  PredictArgs predict;
  auto* p = app.add_subcommand("predict", "Write predicted masks for a directory of frames");
  p->add_option("--ckpt", predict.ckpt, "Checkpoint")->required();
  p->add_option("--images", predict.images, "Directory of .pgm frames")->required();
  p->add_option("--out", predict.out, "Output directory")->required();
  p->add_option("--threshold", predict.threshold, "Probability threshold")->check(CLI::Range(0.0, 1.0));
  p->add_flag("--overlay", predict.overlay, "Also write boundary overlays (.ppm)");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Time inference per frame");
  b->add_option("--ckpt", bench.ckpt, "Checkpoint")->required();
  b->add_option("--data", bench.data, "Dataset directory")->required();
  b->add_option("--reps", bench.reps, "Timed repetitions (>= 3)")->check(CLI::Range(std::size_t{3}, std::size_t{1} << 30));
  b->add_option("--batch", bench.batch, "Frames per forward call")->check(CLI::PositiveNumber);
  b->add_option("--report", bench.report, "JSON report path");

  GradcheckArgs grad;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference gradient checks (double precision)");
  g->add_option("--module", grad.module, "all, tensor, layers or models")
      ->check(CLI::IsMember({"all", "tensor", "layers", "models"}));
  g->add_option("--seed", grad.seed, "Seed for random inputs");
  g->add_option("--report", grad.report, "JSON report path");
  g->add_flag("--inject-fault", grad.inject_fault, "Include an op with a broken backward rule")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*s) return cmd_synth(synth);
    if (*t) return cmd_train(train);
    if (*e) return cmd_eval(eval);
    if (*p) return cmd_predict(predict);
    if (*b) return cmd_bench(bench);
    if (*g) return cmd_gradcheck(grad);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace echoseg
