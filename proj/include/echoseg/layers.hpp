#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "echoseg/autograd.hpp"
#include "echoseg/rng.hpp"

namespace echoseg {

template <typename T>
struct NamedParameter {
  std::string name;
  Variable<T> variable;
};

/// Output extent of a strided, zero-padded window sweep. Throws ShapeError
/// when the window does not fit or the stride does not divide evenly.
std::size_t conv_output_size(std::size_t input, std::size_t kernel, std::size_t stride,
                             std::size_t padding);

// ---------------------------------------------------------------------------
// Differentiable kernels (NCHW)

/// Cross-correlation with per-output-channel bias. weight is (Cout,Cin,kh,kw).
template <typename T>
Variable<T> conv2d(const Variable<T>& x, const Variable<T>& weight, const Variable<T>& bias,
                   std::size_t stride, std::size_t padding);

/// 2x2 max pooling, stride 2. Ties go to the first element in row-major
/// window order; backward routes the gradient to that element only.
template <typename T>
Variable<T> max_pool2x2(const Variable<T>& x);

/// Transpose convolution, kernel 2 stride 2. weight is (Cin,Cout,2,2).
/// Every input pixel scatters into its own 2x2 output patch.
template <typename T>
Variable<T> transpose_conv2x2(const Variable<T>& x, const Variable<T>& weight,
                              const Variable<T>& bias);

/// Non-differentiable 2x2 average pooling (reconstruction targets).
template <typename T>
Tensor<T> avg_pool2x2(const Tensor<T>& x);

/// Naive loop implementations used to validate the im2col/BLAS path.
namespace reference {

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding);

/// Gradient of conv2d with respect to its input, i.e. the adjoint map.
template <typename T>
Tensor<T> conv2d_input_grad(const Tensor<T>& grad_out, const Tensor<T>& weight,
                            const Shape& input_shape, std::size_t stride, std::size_t padding);

template <typename T>
Tensor<T> transpose_conv2x2(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

}  // namespace reference

// ---------------------------------------------------------------------------
// Layers

template <typename T>
struct Conv2D {
  Variable<T> weight;  // (Cout, Cin, k, k)
  Variable<T> bias;    // (Cout)
  std::size_t stride = 1;
  std::size_t padding = 0;

  /// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero bias.
  static Conv2D create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                       std::size_t stride, std::size_t padding, Rng& rng);

  std::size_t in_channels() const { return weight.shape()[1]; }
  std::size_t out_channels() const { return weight.shape()[0]; }

  Variable<T> operator()(const Variable<T>& x) const { return conv2d(x, weight, bias, stride, padding); }

  void collect_parameters(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
};

template <typename T>
struct TransposeConv2D {
  Variable<T> weight;  // (Cin, Cout, 2, 2)
  Variable<T> bias;    // (Cout)

  static TransposeConv2D create(std::size_t in_channels, std::size_t out_channels, Rng& rng);

  std::size_t in_channels() const { return weight.shape()[0]; }
  std::size_t out_channels() const { return weight.shape()[1]; }

  Variable<T> operator()(const Variable<T>& x) const { return transpose_conv2x2(x, weight, bias); }

  void collect_parameters(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
};

/// Two same-padded 3x3 convolutions, each followed by ReLU.
template <typename T>
struct ConvBlock {
  Conv2D<T> conv1;
  Conv2D<T> conv2;

  static ConvBlock create(std::size_t in_channels, std::size_t out_channels, Rng& rng);

  Variable<T> operator()(const Variable<T>& x) const { return relu(conv2(relu(conv1(x)))); }

  void collect_parameters(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
};

}  // namespace echoseg
