#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "echoseg/errors.hpp"
#include "echoseg/gradcheck_suite.hpp"
#include "echoseg/metrics.hpp"
#include "echoseg/phantom.hpp"
#include "echoseg/pipeline.hpp"
#include "echoseg/report.hpp"
#include "echoseg/serialization.hpp"

namespace py = pybind11;
using namespace echoseg;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// (N, H, W) or (H, W) floats -> (N, 1, H, W) tensor.
TensorF batch_from_array(const FloatArray& images) {
  const py::buffer_info info = images.request();
  if (info.ndim != 2 && info.ndim != 3) throw ShapeError("images must be (H, W) or (N, H, W)");
  const std::size_t n = info.ndim == 3 ? info.shape[0] : 1;
  const std::size_t h = info.shape[info.ndim - 2], w = info.shape[info.ndim - 1];
  const auto* data = static_cast<const float*>(info.ptr);
  return TensorF({n, 1, h, w}, std::vector<float>(data, data + n * h * w));
}

py::array_t<float> array_from_tensor(const TensorF& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Mask mask_from_array(const ByteArray& a) {
  const py::buffer_info info = a.request();
  if (info.ndim != 2) throw ShapeError("masks must be 2-D (H, W)");
  Mask m(info.shape[0], info.shape[1]);
  const auto* data = static_cast<const std::uint8_t*>(info.ptr);
  for (std::size_t i = 0; i < m.pixels.size(); ++i) m.pixels[i] = data[i] != 0;
  return m;
}

py::array_t<std::uint8_t> array_from_mask(const Mask& m) {
  py::array_t<std::uint8_t> out({static_cast<py::ssize_t>(m.height), static_cast<py::ssize_t>(m.width)});
  std::copy(m.pixels.begin(), m.pixels.end(), out.mutable_data());
  return out;
}

std::vector<Sample> samples_from_arrays(const FloatArray& images, const ByteArray& masks) {
  const TensorF x = batch_from_array(images);
  const py::buffer_info info = masks.request();
  const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  if (static_cast<std::size_t>(info.size) != n * h * w) throw ShapeError("masks must match images in shape");
  const auto* m = static_cast<const std::uint8_t*>(info.ptr);
  std::vector<Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].id = "sample_" + std::to_string(i);
    out[i].image = TensorF({1, h, w}, std::vector<float>(x.data().begin() + i * h * w, x.data().begin() + (i + 1) * h * w));
    TensorF mask({1, h, w});
    for (std::size_t k = 0; k < h * w; ++k) mask[k] = m[i * h * w + k] != 0 ? 1.0f : 0.0f;
    out[i].mask = std::move(mask);
  }
  return out;
}

py::dict metrics_dict(const MetricSummary& m) {
  return py::module_::import("json").attr("loads")(to_json(m).dump());
}

}  // namespace

PYBIND11_MODULE(_echoseg, m) {
  m.doc() = "U-Net and MatAE-U-Net segmentation of echocardiography frames";
  m.attr("__version__") = kToolVersion;

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<IntegrityError>(m, "IntegrityError", PyExc_IOError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  py::class_<UNet<float>>(m, "Model")
      .def(py::init([](const std::string& kind, std::size_t depth, std::size_t base, std::uint64_t seed) {
             return UNet<float>(parse_model_kind(kind), UNetConfig{1, 1, depth, base}, seed);
           }),
           py::arg("kind") = "vanilla", py::arg("depth") = 4, py::arg("base_channels") = 16, py::arg("seed") = 0)
      .def_static(
          "load", [](const std::filesystem::path& path) { return restore_model(load_checkpoint(path)); },
          py::arg("path"), "Model stored in a checkpoint file.")
      .def(
          "save",
          [](const UNet<float>& self, const std::filesystem::path& path) {
            save_checkpoint(path, make_checkpoint(self, nullptr, 0));
          },
          py::arg("path"))
      .def_property_readonly("kind", [](const UNet<float>& self) { return to_string(self.kind()); })
      .def_property_readonly("depth", [](const UNet<float>& self) { return self.config().depth; })
      .def_property_readonly("base_channels", [](const UNet<float>& self) { return self.config().base_channels; })
      .def_property_readonly("parameter_count", &UNet<float>::parameter_count)
      .def(
          "logits",
          [](const UNet<float>& self, const FloatArray& images) {
            const TensorF x = batch_from_array(images);
            py::gil_scoped_release release;
            TensorF out = logits_fn(self)(x);
            py::gil_scoped_acquire acquire;
            return array_from_tensor(out.reshape({x.dim(0), x.dim(2), x.dim(3)}));
          },
          py::arg("images"), "Raw logits, shaped (N, H, W).")
      .def(
          "predict",
          [](const UNet<float>& self, const FloatArray& images, double threshold) {
            const TensorF x = batch_from_array(images);
            std::vector<TensorF> frames;
            const std::size_t h = x.dim(2), w = x.dim(3);
            for (std::size_t i = 0; i < x.dim(0); ++i) {
              frames.emplace_back(Shape{1, h, w},
                                  std::vector<float>(x.data().begin() + i * h * w, x.data().begin() + (i + 1) * h * w));
            }
            const auto masks = predict_masks(logits_fn(self), frames, threshold);
            py::array_t<std::uint8_t> out({static_cast<py::ssize_t>(masks.size()), static_cast<py::ssize_t>(h),
                                           static_cast<py::ssize_t>(w)});
            auto* dst = out.mutable_data();
            for (const auto& mk : masks) dst = std::copy(mk.pixels.begin(), mk.pixels.end(), dst);
            return out;
          },
          py::arg("images"), py::arg("threshold") = 0.5, "Binary masks (N, H, W) as uint8 0/1.")
      .def(
          "evaluate",
          [](const UNet<float>& self, const FloatArray& images, const ByteArray& masks, double threshold) {
            return metrics_dict(evaluate(self, samples_from_arrays(images, masks), threshold));
          },
          py::arg("images"), py::arg("masks"), py::arg("threshold") = 0.5);

  m.def(
      "train",
      [](const FloatArray& images, const ByteArray& masks, const std::string& kind, std::size_t epochs,
         std::size_t batch_size, double lr, double lambda_, std::uint64_t seed, std::size_t depth,
         std::size_t base_channels) {
        TrainConfig cfg;
        cfg.kind = parse_model_kind(kind);
        cfg.model = UNetConfig{1, 1, depth, base_channels};
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.lr = lr;
        cfg.lambda = lambda_;
        cfg.seed = seed;
        cfg.eval_every = 0;
        const auto data = samples_from_arrays(images, masks);
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = train(cfg, data, {});
        }
        py::list history;
        for (const auto& r : result.history.epochs) {
          history.append(py::module_::import("json").attr("loads")(to_json(r).dump()));
        }
        return py::make_tuple(restore_model(result.checkpoint), history);
      },
      py::arg("images"), py::arg("masks"), py::arg("kind") = "vanilla", py::arg("epochs") = 1,
      py::arg("batch_size") = 4, py::arg("lr") = 1e-3, py::arg("lambda_") = 0.1, py::arg("seed") = 0,
      py::arg("depth") = 4, py::arg("base_channels") = 16,
      "Trains a fresh model; returns (model, per-epoch history).");

  m.def(
      "generate_phantom",
      [](std::size_t index, std::uint64_t seed, std::size_t height, std::size_t width) {
        PhantomConfig cfg;
        cfg.seed = seed;
        cfg.height = height;
        cfg.width = width;
        const Sample s = generate_phantom(cfg, index);
        return py::make_tuple(array_from_tensor(s.image.reshape({height, width})),
                              array_from_mask(mask_from_tensor(s.mask)));
      },
      py::arg("index"), py::arg("seed") = 0, py::arg("height") = 112, py::arg("width") = 112,
      "(image float32 in [0, 1], mask uint8) for one synthetic frame.");

  m.def("iou", [](const ByteArray& p, const ByteArray& g) { return iou(mask_from_array(p), mask_from_array(g)); });
  m.def("dice", [](const ByteArray& p, const ByteArray& g) { return dice(mask_from_array(p), mask_from_array(g)); });
  m.def("pixel_accuracy",
        [](const ByteArray& p, const ByteArray& g) { return pixel_accuracy(mask_from_array(p), mask_from_array(g)); });

  m.def(
      "gradcheck",
      [](std::uint64_t seed) {
        GradcheckSuiteOptions opts;
        opts.seed = seed;
        return py::module_::import("json").attr("loads")(to_json(run_gradcheck_suite(opts)).dump());
      },
      py::arg("seed") = 0, "Finite-difference check of every op; returns the report dict.");
}
