#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fine/core/tensor.hpp"
#include "fine/net/layers.hpp"

namespace fine {

struct UNetConfig
{
  int spatial_rank = 2;
  int in_channels = 1;
  int out_channels = 1;
  int depth = 2;
  int base_channels = 8;
  int kernel_extent = 3;

  void validate() const;
  // Channels of encoder/decoder level l; level == depth is the bottleneck.
  std::size_t level_channels(int level) const;
  bool operator==(const UNetConfig &) const = default;
};

template <typename T>
struct ConvParams
{
  std::string id;
  Tensor<T> weight; // [Cout, Cin, k...] with spatial_rank kernel axes
  Tensor<T> bias;   // [Cout]
};

// Ordered weights of the fixed U-Net topology: enc{l}_conv{1,2} for each level,
// bottom_conv{1,2}, then dec{l}_up, dec{l}_conv{1,2} from the deepest level up,
// and the linear 1x1 `final` layer.
template <typename T>
struct NetworkParams
{
  UNetConfig arch;
  std::vector<ConvParams<T>> layers;

  std::size_t parameter_count() const;
  // FNV-1a over every weight and bias; ties tapes to the weights that made them.
  std::uint64_t fingerprint() const;
};

// Gradients share the NetworkParams layout.
template <typename T>
using Gradients = NetworkParams<T>;

// Number of trainable values implied by the configuration alone.
std::size_t unet_parameter_count(const UNetConfig &cfg);

// Layer ids and (Cout, Cin, kernel_extent) in network order.
struct LayerSpec
{
  std::string id;
  std::size_t out_channels;
  std::size_t in_channels;
  int kernel_extent;
};
std::vector<LayerSpec> unet_layer_specs(const UNetConfig &cfg);

// Truncated-normal He initialization (std sqrt(2 / fan_in), cut at +-2 std), zero biases.
template <typename T>
NetworkParams<T> build_unet(const UNetConfig &cfg, std::uint64_t seed);

template <typename T>
NetworkParams<T> zeros_like(const NetworkParams<T> &p);

template <typename T>
void check_same_architecture(const NetworkParams<T> &a, const NetworkParams<T> &b);

template <typename T>
struct Tape
{
  UNetConfig arch;
  std::uint64_t params_fingerprint = 0;
  Shape input_shape;           // as passed by the caller
  Shape output_shape;          // as returned to the caller
  std::vector<Tensor<T>> conv_inputs;  // per layer, in network order
  std::vector<Tensor<T>> conv_outputs; // per layer, after activation (final: linear output)
  std::vector<Shape> pool_inputs;      // per encoder level
  std::vector<Shape> up_inputs;        // per decoder step, deepest first
};

template <typename T>
struct ForwardResult
{
  Tensor<T> output;
  Tape<T> tape;
};

// Input is [C, X, Y] (rank 2) or [C, X, Y, Z] (rank 3); output has the same
// spatial extents and out_channels channels.
template <typename T>
ForwardResult<T> forward(const NetworkParams<T> &params, const Tensor<T> &input);

// Inference only; keeps no intermediates.
template <typename T>
Tensor<T> predict(const NetworkParams<T> &params, const Tensor<T> &input);

template <typename T>
Gradients<T> backward(const NetworkParams<T> &params, const Tape<T> &tape, const Tensor<T> &output_grad);

template <typename U, typename T>
NetworkParams<U> cast_params(const NetworkParams<T> &p);

} // namespace fine
