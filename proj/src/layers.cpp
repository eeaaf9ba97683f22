#include "echoseg/layers.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace echoseg {

std::size_t conv_output_size(std::size_t input, std::size_t kernel, std::size_t stride,
                             std::size_t padding) {
  if (stride == 0) throw ShapeError("stride must be positive");
  const std::size_t padded = input + 2 * padding;
  if (padded < kernel) {
    throw ShapeError("padded extent " + std::to_string(padded) + " smaller than kernel " +
                     std::to_string(kernel));
  }
  if ((padded - kernel) % stride != 0) {
    throw ShapeError("non-integral output size: (" + std::to_string(padded) + " - " +
                     std::to_string(kernel) + ") not divisible by stride " + std::to_string(stride));
  }
  return (padded - kernel) / stride + 1;
}

namespace {

// C = alpha * op(A) * op(B) + beta * C, row-major.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

struct Geometry {
  std::size_t channels, height, width, kernel, stride, padding, out_h, out_w;
  std::size_t col_rows() const { return channels * kernel * kernel; }
  std::size_t col_cols() const { return out_h * out_w; }
};

// Rows of `col` enumerate (c, ki, kj); columns enumerate output positions.
template <typename T>
void im2col(const T* image, const Geometry& g, T* col) {
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* plane = image + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        T* row = col + ((c * g.kernel + ki) * g.kernel + kj) * g.col_cols();
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - pad;
          T* dst = row + oh * g.out_w;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill_n(dst, g.out_w, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(ih) * g.width;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) - pad;
            dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.width)) ? T{0}
                                                                              : src[iw];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-and-adds columns back into an (already zeroed) image.
template <typename T>
void col2im(const T* col, const Geometry& g, T* image) {
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* plane = image + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        const T* row = col + ((c * g.kernel + ki) * g.kernel + kj) * g.col_cols();
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - pad;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) continue;
          T* dst = plane + static_cast<std::size_t>(ih) * g.width;
          const T* src = row + oh * g.out_w;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) - pad;
            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.width)) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

bool is_pointwise(const Geometry& g) { return g.kernel == 1 && g.stride == 1 && g.padding == 0; }

void require_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_to_string(s));
  }
}

Geometry conv_geometry(const Shape& x, const Shape& w, std::size_t stride, std::size_t padding) {
  require_rank(x, 4, "conv2d input");
  require_rank(w, 4, "conv2d weight");
  if (w[2] != w[3]) throw ShapeError("conv2d: only square kernels are supported");
  if (x[1] != w[1]) {
    throw ShapeError("conv2d: input channels " + std::to_string(x[1]) + " != weight Cin " +
                     std::to_string(w[1]) + " (input " + shape_to_string(x) + ", weight " +
                     shape_to_string(w) + ")");
  }
  Geometry g{x[1], x[2], x[3], w[2], stride, padding, 0, 0};
  g.out_h = conv_output_size(x[2], w[2], stride, padding);
  g.out_w = conv_output_size(x[3], w[3], stride, padding);
  return g;
}

void require_bias(const Shape& bias, std::size_t channels, const char* what) {
  if (bias.size() != 1 || bias[0] != channels) {
    throw ShapeError(std::string(what) + ": bias shape " + shape_to_string(bias) +
                     " does not match " + std::to_string(channels) + " output channels");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// conv2d

template <typename T>
Variable<T> conv2d(const Variable<T>& x, const Variable<T>& weight, const Variable<T>& bias,
                   std::size_t stride, std::size_t padding) {
  const Geometry g = conv_geometry(x.shape(), weight.shape(), stride, padding);
  const std::size_t batch = x.shape()[0];
  const std::size_t cout = weight.shape()[0];
  require_bias(bias.shape(), cout, "conv2d");

  const int m = static_cast<int>(cout);
  const int n = static_cast<int>(g.col_cols());
  const int k = static_cast<int>(g.col_rows());
  const std::size_t in_stride = g.channels * g.height * g.width;
  const std::size_t out_stride = cout * g.col_cols();

  Tensor<T> out(Shape{batch, cout, g.out_h, g.out_w});
  std::vector<T> col(is_pointwise(g) ? 0 : g.col_rows() * g.col_cols());
  const T* xv = x.value().data().data();
  const T* wv = weight.value().data().data();
  const T* bv = bias.value().data().data();
  T* ov = out.data().data();
  for (std::size_t i = 0; i < batch; ++i) {
    const T* cols = xv + i * in_stride;
    if (!is_pointwise(g)) {
      im2col(cols, g, col.data());
      cols = col.data();
    }
    T* dst = ov + i * out_stride;
    for (std::size_t c = 0; c < cout; ++c) std::fill_n(dst + c * g.col_cols(), g.col_cols(), bv[c]);
    gemm(false, false, m, n, k, T{1}, wv, k, cols, n, T{1}, dst, n);
  }

  return Variable<T>::from_op(
      std::move(out), {x, weight, bias},
      [x, weight, bias, g, batch, cout, m, n, k, in_stride, out_stride](const Tensor<T>& grad) {
        const T* gv = grad.data().data();
        const T* xv = x.value().data().data();
        const T* wv = weight.value().data().data();
        std::vector<T> col(is_pointwise(g) ? 0 : g.col_rows() * g.col_cols());
        if (bias.requires_grad()) {
          Tensor<T> gb(bias.shape());
          for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t c = 0; c < cout; ++c) {
              const T* row = gv + i * out_stride + c * g.col_cols();
              T acc{0};
              for (std::size_t p = 0; p < g.col_cols(); ++p) acc += row[p];
              gb[c] += acc;
            }
          }
          bias.accumulate_grad(gb);
        }
        if (weight.requires_grad()) {
          Tensor<T> gw(weight.shape());
          for (std::size_t i = 0; i < batch; ++i) {
            const T* cols = xv + i * in_stride;
            if (!is_pointwise(g)) {
              im2col(cols, g, col.data());
              cols = col.data();
            }
            gemm(false, true, m, k, n, T{1}, gv + i * out_stride, n, cols, n, T{1},
                 gw.data().data(), k);
          }
          weight.accumulate_grad(gw);
        }
        if (x.requires_grad()) {
          Tensor<T> gx(x.shape());
          for (std::size_t i = 0; i < batch; ++i) {
            T* dst = gx.data().data() + i * in_stride;
            if (is_pointwise(g)) {
              gemm(true, false, k, n, m, T{1}, wv, k, gv + i * out_stride, n, T{0}, dst, n);
            } else {
              gemm(true, false, k, n, m, T{1}, wv, k, gv + i * out_stride, n, T{0}, col.data(), n);
              col2im(col.data(), g, dst);
            }
          }
          x.accumulate_grad(gx);
        }
      },
      "conv2d");
}

// ---------------------------------------------------------------------------
// max pooling

template <typename T>
Variable<T> max_pool2x2(const Variable<T>& x) {
  require_rank(x.shape(), 4, "max_pool2x2");
  const Shape& s = x.shape();
  if (s[2] % 2 != 0 || s[3] % 2 != 0) {
    throw ShapeError("max_pool2x2: spatial dims must be even, got " + shape_to_string(s));
  }
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3], oh = h / 2, ow = w / 2;
  Tensor<T> out(Shape{s[0], s[1], oh, ow});
  std::vector<std::uint32_t> argmax(out.size());
  const T* xv = x.value().data().data();
  T* ov = out.data().data();
  const bool monitor = KinkMonitor::active();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* plane = xv + p * h * w;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const std::size_t base = (2 * i) * w + 2 * j;
        const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (std::size_t c = 1; c < 4; ++c) {
          if (plane[cand[c]] > plane[best]) best = cand[c];
        }
        if (monitor) {
          for (std::size_t c = 0; c < 4; ++c) {
            const double gap = static_cast<double>(plane[best]) - static_cast<double>(plane[cand[c]]);
            if (cand[c] != best && gap > 0.0) KinkMonitor::observe(gap);
          }
        }
        const std::size_t o = (p * oh + i) * ow + j;
        ov[o] = plane[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return Variable<T>::from_op(
      std::move(out), {x},
      [x, argmax = std::move(argmax), planes, h, w, oh, ow](const Tensor<T>& grad) {
        Tensor<T> gx(x.shape());
        const T* gv = grad.data().data();
        T* dst = gx.data().data();
        for (std::size_t p = 0; p < planes; ++p) {
          for (std::size_t o = 0; o < oh * ow; ++o) {
            dst[p * h * w + argmax[p * oh * ow + o]] += gv[p * oh * ow + o];
          }
        }
        x.accumulate_grad(gx);
      },
      "max_pool2x2");
}

template <typename T>
Tensor<T> avg_pool2x2(const Tensor<T>& x) {
  require_rank(x.shape(), 4, "avg_pool2x2");
  const Shape& s = x.shape();
  if (s[2] % 2 != 0 || s[3] % 2 != 0) {
    throw ShapeError("avg_pool2x2: spatial dims must be even, got " + shape_to_string(s));
  }
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3], oh = h / 2, ow = w / 2;
  Tensor<T> out(Shape{s[0], s[1], oh, ow});
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const std::size_t base = p * h * w + (2 * i) * w + 2 * j;
        out[(p * oh + i) * ow + j] =
            (x[base] + x[base + 1] + x[base + w] + x[base + w + 1]) / T{4};
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// transpose convolution: the adjoint of a kernel-2 stride-2 convolution.

template <typename T>
Variable<T> transpose_conv2x2(const Variable<T>& x, const Variable<T>& weight,
                              const Variable<T>& bias) {
  require_rank(x.shape(), 4, "transpose_conv2x2 input");
  require_rank(weight.shape(), 4, "transpose_conv2x2 weight");
  const Shape& ws = weight.shape();
  if (ws[2] != 2 || ws[3] != 2) {
    throw ShapeError("transpose_conv2x2: weight must be (Cin,Cout,2,2), got " + shape_to_string(ws));
  }
  if (x.shape()[1] != ws[0]) {
    throw ShapeError("transpose_conv2x2: input channels " + std::to_string(x.shape()[1]) +
                     " != weight Cin " + std::to_string(ws[0]));
  }
  const std::size_t batch = x.shape()[0], cin = ws[0], cout = ws[1];
  const std::size_t h = x.shape()[2], w = x.shape()[3];
  require_bias(bias.shape(), cout, "transpose_conv2x2");
  // Geometry of the forward convolution this operator is the adjoint of.
  const Geometry g{cout, 2 * h, 2 * w, 2, 2, 0, h, w};
  const int rows = static_cast<int>(g.col_rows());  // Cout*4
  const int cols = static_cast<int>(g.col_cols());  // H*W
  const int kin = static_cast<int>(cin);
  const std::size_t in_stride = cin * h * w;
  const std::size_t out_stride = cout * 4 * h * w;

  Tensor<T> out(Shape{batch, cout, 2 * h, 2 * w});
  std::vector<T> col(g.col_rows() * g.col_cols());
  const T* xv = x.value().data().data();
  const T* wv = weight.value().data().data();
  const T* bv = bias.value().data().data();
  for (std::size_t i = 0; i < batch; ++i) {
    gemm(true, false, rows, cols, kin, T{1}, wv, rows, xv + i * in_stride, cols, T{0}, col.data(),
         cols);
    T* dst = out.data().data() + i * out_stride;
    for (std::size_t c = 0; c < cout; ++c) std::fill_n(dst + c * 4 * h * w, 4 * h * w, bv[c]);
    col2im(col.data(), g, dst);
  }

  return Variable<T>::from_op(
      std::move(out), {x, weight, bias},
      [x, weight, bias, g, batch, cout, rows, cols, kin, in_stride, out_stride](const Tensor<T>& grad) {
        const T* gv = grad.data().data();
        std::vector<T> col(g.col_rows() * g.col_cols());
        if (bias.requires_grad()) {
          Tensor<T> gb(bias.shape());
          const std::size_t plane = g.height * g.width;
          for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t c = 0; c < cout; ++c) {
              const T* p = gv + i * out_stride + c * plane;
              T acc{0};
              for (std::size_t q = 0; q < plane; ++q) acc += p[q];
              gb[c] += acc;
            }
          }
          bias.accumulate_grad(gb);
        }
        if (!weight.requires_grad() && !x.requires_grad()) return;
        Tensor<T> gw(weight.shape());
        Tensor<T> gx(x.shape());
        const T* xv = x.value().data().data();
        const T* wv = weight.value().data().data();
        for (std::size_t i = 0; i < batch; ++i) {
          im2col(gv + i * out_stride, g, col.data());
          if (weight.requires_grad()) {
            gemm(false, true, kin, rows, cols, T{1}, xv + i * in_stride, cols, col.data(), cols, T{1},
                 gw.data().data(), rows);
          }
          if (x.requires_grad()) {
            gemm(false, false, kin, cols, rows, T{1}, wv, rows, col.data(), cols, T{0},
                 gx.data().data() + i * in_stride, cols);
          }
        }
        weight.accumulate_grad(gw);
        x.accumulate_grad(gx);
      },
      "transpose_conv2x2");
}

// ---------------------------------------------------------------------------
// reference implementations

namespace reference {

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
  const Geometry g = conv_geometry(x.shape(), weight.shape(), stride, padding);
  const std::size_t batch = x.dim(0), cout = weight.dim(0), k = g.kernel;
  require_bias(bias.shape(), cout, "reference::conv2d");
  Tensor<T> out(Shape{batch, cout, g.out_h, g.out_w});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t co = 0; co < cout; ++co) {
      for (std::size_t oh = 0; oh < g.out_h; ++oh) {
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
          T acc = bias[co];
          for (std::size_t ci = 0; ci < g.channels; ++ci) {
            for (std::size_t ki = 0; ki < k; ++ki) {
              for (std::size_t kj = 0; kj < k; ++kj) {
                const auto ih = static_cast<std::ptrdiff_t>(oh * stride + ki) -
                                static_cast<std::ptrdiff_t>(padding);
                const auto iw = static_cast<std::ptrdiff_t>(ow * stride + kj) -
                                static_cast<std::ptrdiff_t>(padding);
                if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(g.height) ||
                    iw >= static_cast<std::ptrdiff_t>(g.width)) {
                  continue;
                }
                acc += x.at(n, ci, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw)) *
                       weight.at(co, ci, ki, kj);
              }
            }
          }
          out.at(n, co, oh, ow) = acc;
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> conv2d_input_grad(const Tensor<T>& grad_out, const Tensor<T>& weight,
                            const Shape& input_shape, std::size_t stride, std::size_t padding) {
  const Geometry g = conv_geometry(input_shape, weight.shape(), stride, padding);
  const std::size_t batch = input_shape[0], cout = weight.dim(0), k = g.kernel;
  if (grad_out.shape() != Shape{batch, cout, g.out_h, g.out_w}) {
    throw ShapeError("conv2d_input_grad: upstream shape " + shape_to_string(grad_out.shape()) +
                     " does not match conv output");
  }
  Tensor<T> gx(input_shape);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t co = 0; co < cout; ++co) {
      for (std::size_t oh = 0; oh < g.out_h; ++oh) {
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
          const T up = grad_out.at(n, co, oh, ow);
          for (std::size_t ci = 0; ci < g.channels; ++ci) {
            for (std::size_t ki = 0; ki < k; ++ki) {
              for (std::size_t kj = 0; kj < k; ++kj) {
                const auto ih = static_cast<std::ptrdiff_t>(oh * stride + ki) -
                                static_cast<std::ptrdiff_t>(padding);
                const auto iw = static_cast<std::ptrdiff_t>(ow * stride + kj) -
                                static_cast<std::ptrdiff_t>(padding);
                if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(g.height) ||
                    iw >= static_cast<std::ptrdiff_t>(g.width)) {
                  continue;
                }
                gx.at(n, ci, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw)) +=
                    up * weight.at(co, ci, ki, kj);
              }
            }
          }
        }
      }
    }
  }
  return gx;
}

template <typename T>
Tensor<T> transpose_conv2x2(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  const std::size_t batch = x.dim(0), cin = weight.dim(0), cout = weight.dim(1);
  const std::size_t h = x.dim(2), w = x.dim(3);
  Tensor<T> out(Shape{batch, cout, 2 * h, 2 * w});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t co = 0; co < cout; ++co) {
      for (std::size_t oh = 0; oh < 2 * h; ++oh) {
        for (std::size_t ow = 0; ow < 2 * w; ++ow) {
          T acc = bias[co];
          for (std::size_t ci = 0; ci < cin; ++ci) {
            acc += x.at(n, ci, oh / 2, ow / 2) * weight.at(ci, co, oh % 2, ow % 2);
          }
          out.at(n, co, oh, ow) = acc;
        }
      }
    }
  }
  return out;
}

}  // namespace reference

// ---------------------------------------------------------------------------
// Layers

namespace {
template <typename T>
Tensor<T> kaiming_uniform(const Shape& shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}
}  // namespace

template <typename T>
Conv2D<T> Conv2D<T>::create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                            std::size_t stride, std::size_t padding, Rng& rng) {
  Conv2D layer;
  layer.weight = Variable<T>(
      kaiming_uniform<T>(Shape{out_channels, in_channels, kernel, kernel},
                         in_channels * kernel * kernel, rng),
      true);
  layer.bias = Variable<T>(Tensor<T>::zeros(Shape{out_channels}), true);
  layer.stride = stride;
  layer.padding = padding;
  return layer;
}

template <typename T>
void Conv2D<T>::collect_parameters(const std::string& prefix,
                                   std::vector<NamedParameter<T>>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

template <typename T>
TransposeConv2D<T> TransposeConv2D<T>::create(std::size_t in_channels, std::size_t out_channels,
                                              Rng& rng) {
  TransposeConv2D layer;
  // Each output pixel receives exactly one tap per input channel.
  layer.weight = Variable<T>(
      kaiming_uniform<T>(Shape{in_channels, out_channels, 2, 2}, in_channels, rng), true);
  layer.bias = Variable<T>(Tensor<T>::zeros(Shape{out_channels}), true);
  return layer;
}

template <typename T>
void TransposeConv2D<T>::collect_parameters(const std::string& prefix,
                                            std::vector<NamedParameter<T>>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

template <typename T>
ConvBlock<T> ConvBlock<T>::create(std::size_t in_channels, std::size_t out_channels, Rng& rng) {
  ConvBlock block;
  block.conv1 = Conv2D<T>::create(in_channels, out_channels, 3, 1, 1, rng);
  block.conv2 = Conv2D<T>::create(out_channels, out_channels, 3, 1, 1, rng);
  return block;
}

template <typename T>
void ConvBlock<T>::collect_parameters(const std::string& prefix,
                                      std::vector<NamedParameter<T>>& out) const {
  conv1.collect_parameters(prefix + ".conv1", out);
  conv2.collect_parameters(prefix + ".conv2", out);
}

#define ECHOSEG_INSTANTIATE(T)                                                                    \
  template Variable<T> conv2d(const Variable<T>&, const Variable<T>&, const Variable<T>&,          \
                              std::size_t, std::size_t);                                          \
  template Variable<T> max_pool2x2(const Variable<T>&);                                           \
  template Variable<T> transpose_conv2x2(const Variable<T>&, const Variable<T>&,                  \
                                         const Variable<T>&);                                     \
  template Tensor<T> avg_pool2x2(const Tensor<T>&);                                               \
  template Tensor<T> reference::conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                       std::size_t, std::size_t);                                 \
  template Tensor<T> reference::conv2d_input_grad(const Tensor<T>&, const Tensor<T>&,             \
                                                  const Shape&, std::size_t, std::size_t);        \
  template Tensor<T> reference::transpose_conv2x2(const Tensor<T>&, const Tensor<T>&,             \
                                                  const Tensor<T>&);                              \
  template struct Conv2D<T>;                                                                      \
  template struct TransposeConv2D<T>;                                                             \
  template struct ConvBlock<T>;

ECHOSEG_INSTANTIATE(float)
ECHOSEG_INSTANTIATE(double)

#undef ECHOSEG_INSTANTIATE

}  // namespace echoseg
