#pragma once

#include <array>

#include "fine/core/tensor.hpp"

// Layer kernels of the U-Net. Activations are [C, n0, n1, n2] tensors; 2D
// networks run with n0 == 1 and kernel depth 1 on that axis.
namespace fine::layers {

using Dims3 = std::array<std::size_t, 3>;

inline constexpr double kLeakySlope = 0.1;

// "Same" convolution (odd kernel extents, zero padding). weight is
// [Cout, Cin, k0*k1*k2] in row-major tap order, bias is [Cout].
template <typename T>
Tensor<T> conv_forward(const Tensor<T> &in, const Tensor<T> &weight, const Tensor<T> &bias, Dims3 kernel);

template <typename T>
struct ConvGrads
{
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
ConvGrads<T> conv_backward(const Tensor<T> &in, const Tensor<T> &weight, const Tensor<T> &grad_out, Dims3 kernel,
                           bool need_input_grad = true);

template <typename T>
Tensor<T> leaky_relu_forward(const Tensor<T> &x);

// Derivative taken from the activation output (same sign as its input).
template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T> &out, const Tensor<T> &grad_out);

template <typename T>
Tensor<T> avg_pool_forward(const Tensor<T> &x, Dims3 factor);

template <typename T>
Tensor<T> avg_pool_backward(const Tensor<T> &grad_out, const Shape &in_shape, Dims3 factor);

template <typename T>
Tensor<T> upsample_forward(const Tensor<T> &x, Dims3 factor);

template <typename T>
Tensor<T> upsample_backward(const Tensor<T> &grad_out, const Shape &in_shape, Dims3 factor);

template <typename T>
Tensor<T> concat_channels(const Tensor<T> &a, const Tensor<T> &b);

// Splits a channel-concatenated gradient back into its two parts.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T> &g, std::size_t first_channels);

} // namespace fine::layers
