#include "echoseg/report.hpp"

#include <cmath>

#include "echoseg/image_io.hpp"

namespace echoseg {

using nlohmann::json;

json to_json(const MetricSummary& m) {
  return {{"mean_iou", m.mean_iou},
          {"mean_dice", m.mean_dice},
          {"mean_pixel_accuracy", m.mean_pixel_accuracy},
          {"n_images", m.n_images}};
}

json to_json(const LossBreakdown& l) {
  return {{"segmentation_bce", l.segmentation_bce}, {"matryoshka_mse", l.matryoshka_mse}, {"total", l.total}};
}

json to_json(const EpochRecord& r) {
  json j = {{"epoch", r.epoch}, {"loss", to_json(r.mean_loss)}, {"seconds", r.seconds}};
  j["test_metrics"] = r.test_metrics ? to_json(*r.test_metrics) : json(nullptr);
  return j;
}

json to_json(const TrainHistory& h) {
  json epochs = json::array();
  for (const auto& r : h.epochs) epochs.push_back(to_json(r));
  return {{"epochs", epochs}};
}

json to_json(const BenchReport& b) {
  return {{"mean_inference_seconds", b.mean_inference_seconds},
          {"peak_resident_memory_mb", b.peak_resident_memory_mb},
          {"n_frames", b.n_frames},
          {"batch_size", b.batch_size},
          {"repetitions", b.repetitions}};
}

json to_json(const GradCheckReport& g) {
  return {{"op_name", g.op_name},
          {"max_relative_error", std::isfinite(g.max_relative_error) ? json(g.max_relative_error)
                                                                      : json("non-finite")},
          {"tolerance", g.tolerance},
          {"passed", g.passed},
          {"n_checked", g.n_checked}};
}

json to_json(const std::vector<GradCheckReport>& reports) {
  json checks = json::array();
  bool all = true;
  for (const auto& r : reports) {
    checks.push_back(to_json(r));
    all = all && r.passed;
  }
  return {{"checks", checks}, {"n_ops", reports.size()}, {"all_passed", all}};
}

json to_json(const UNetConfig& c) {
  return {{"in_channels", c.in_channels},
          {"out_channels", c.out_channels},
          {"depth", c.depth},
          {"base_channels", c.base_channels}};
}

json to_json(const TrainConfig& c) {
  return {{"model", to_string(c.kind)}, {"unet", to_json(c.model)},   {"epochs", c.epochs},
          {"batch_size", c.batch_size}, {"lr", c.lr},                 {"lambda", c.lambda},
          {"seed", c.seed},             {"eval_every", c.eval_every}, {"threshold", c.threshold}};
}

json to_json(const PhantomConfig& c) {
  auto range = [](const Range& r) { return json::array({r.lo, r.hi}); };
  return {{"height", c.height},
          {"width", c.width},
          {"lv_area_fraction", range(c.lv_area_fraction)},
          {"eccentricity", range(c.eccentricity)},
          {"wall_brightness", range(c.wall_brightness)},
          {"cavity_brightness", range(c.cavity_brightness)},
          {"tissue_brightness", range(c.tissue_brightness)},
          {"wall_thickness", range(c.wall_thickness)},
          {"speckle_sigma", range(c.speckle_sigma)},
          {"sector_angle_deg", c.sector_angle_deg},
          {"seed", c.seed}};
}

json make_report(const std::string& command, json config, json result) {
  return {{"tool", kToolName},
          {"version", kToolVersion},
          {"command", command},
          {"config", std::move(config)},
          {"result", std::move(result)}};
}

void require_finite(const json& doc) {
  if (doc.is_number_float() && !std::isfinite(doc.get<double>())) {
    throw ValidationError("report contains a non-finite number");
  }
  if (doc.is_structured()) {
    for (const auto& item : doc) require_finite(item);
  }
}

void write_report(const std::filesystem::path& path, const json& report) {
  require_finite(report);
  write_file(path, report.dump(2) + "\n");
}

}  // namespace echoseg
