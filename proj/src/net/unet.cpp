#include "fine/net/unet.hpp"

#include <cmath>
#include <cstring>

#include "fine/core/rng.hpp"
#include "fine/core/tensor_ops.hpp"

namespace fine {

void UNetConfig::validate() const
{
  if (spatial_rank != 2 && spatial_rank != 3) {
    throw ConfigError("UNetConfig.spatial_rank must be 2 or 3");
  }
  if (in_channels < 1 || out_channels < 1 || base_channels < 1) {
    throw ConfigError("UNetConfig channel counts must be positive");
  }
  if (depth < 0 || depth > 6) {
    throw ConfigError("UNetConfig.depth must be in [0, 6]");
  }
  if (kernel_extent < 1 || kernel_extent % 2 == 0) {
    throw ConfigError("UNetConfig.kernel_extent must be odd");
  }
}

std::size_t UNetConfig::level_channels(int level) const
{
  return static_cast<std::size_t>(base_channels) << level;
}

std::vector<LayerSpec> unet_layer_specs(const UNetConfig &cfg)
{
  cfg.validate();
  std::vector<LayerSpec> specs;
  const int k = cfg.kernel_extent;
  std::size_t prev = static_cast<std::size_t>(cfg.in_channels);
  for (int l = 0; l < cfg.depth; ++l) {
    const std::size_t c = cfg.level_channels(l);
    specs.push_back({"enc" + std::to_string(l) + "_conv1", c, prev, k});
    specs.push_back({"enc" + std::to_string(l) + "_conv2", c, c, k});
    prev = c;
  }
  const std::size_t cb = cfg.level_channels(cfg.depth);
  specs.push_back({"bottom_conv1", cb, prev, k});
  specs.push_back({"bottom_conv2", cb, cb, k});
  prev = cb;
  for (int l = cfg.depth - 1; l >= 0; --l) {
    const std::size_t c = cfg.level_channels(l);
    specs.push_back({"dec" + std::to_string(l) + "_up", c, prev, k});
    specs.push_back({"dec" + std::to_string(l) + "_conv1", c, 2 * c, k});
    specs.push_back({"dec" + std::to_string(l) + "_conv2", c, c, k});
    prev = c;
  }
  specs.push_back({"final", static_cast<std::size_t>(cfg.out_channels), prev, 1});
  return specs;
}

std::size_t unet_parameter_count(const UNetConfig &cfg)
{
  std::size_t n = 0;
  for (const auto &s : unet_layer_specs(cfg)) {
    std::size_t taps = 1;
    for (int r = 0; r < cfg.spatial_rank; ++r) {
      taps *= static_cast<std::size_t>(s.kernel_extent);
    }
    n += s.out_channels * s.in_channels * taps + s.out_channels;
  }
  return n;
}

template <typename T>
std::size_t NetworkParams<T>::parameter_count() const
{
  std::size_t n = 0;
  for (const auto &l : layers) {
    n += l.weight.size() + l.bias.size();
  }
  return n;
}

template <typename T>
std::uint64_t NetworkParams<T>::fingerprint() const
{
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const Tensor<T> &t) {
    const auto *bytes = reinterpret_cast<const unsigned char *>(t.raw());
    for (std::size_t i = 0; i < t.size() * sizeof(T); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto &l : layers) {
    mix(l.weight);
    mix(l.bias);
  }
  return h;
}

namespace {

Shape weight_shape(const LayerSpec &s, int rank)
{
  Shape shape{s.out_channels, s.in_channels};
  for (int r = 0; r < rank; ++r) {
    shape.push_back(static_cast<std::size_t>(s.kernel_extent));
  }
  return shape;
}

layers::Dims3 kernel_dims(const UNetConfig &cfg, int extent)
{
  const auto k = static_cast<std::size_t>(extent);
  return cfg.spatial_rank == 3 ? layers::Dims3{k, k, k} : layers::Dims3{1, k, k};
}

layers::Dims3 pool_dims(const UNetConfig &cfg)
{
  return cfg.spatial_rank == 3 ? layers::Dims3{2, 2, 2} : layers::Dims3{1, 2, 2};
}

// Caller layout [C, X, Y(, Z)] to the internal [C, n0, n1, n2].
template <typename T>
Tensor<T> to_internal(const Tensor<T> &t, const UNetConfig &cfg)
{
  const Shape &s = t.shape();
  if (static_cast<int>(s.size()) != cfg.spatial_rank + 1) {
    throw ShapeError("enc0_conv1: expected input rank " + std::to_string(cfg.spatial_rank + 1) + " ([C, spatial...]), got " +
                     shape_string(s));
  }
  if (s[0] != static_cast<std::size_t>(cfg.in_channels)) {
    throw ShapeError("enc0_conv1: input has " + std::to_string(s[0]) + " channels, network expects " +
                     std::to_string(cfg.in_channels));
  }
  const std::size_t div = std::size_t{1} << cfg.depth;
  for (std::size_t a = 1; a < s.size(); ++a) {
    if (s[a] % div != 0) {
      throw ShapeError("enc" + std::to_string(cfg.depth - 1) + " pooling: spatial extent " + std::to_string(s[a]) +
                       " of input " + shape_string(s) + " not divisible by 2^depth = " + std::to_string(div));
    }
  }
  if (cfg.spatial_rank == 3) {
    return t;
  }
  return t.reshaped(Shape{s[0], 1, s[1], s[2]});
}

template <typename T>
Tensor<T> to_external(const Tensor<T> &t, const UNetConfig &cfg)
{
  if (cfg.spatial_rank == 3) {
    return t;
  }
  const Shape &s = t.shape();
  return t.reshaped(Shape{s[0], s[2], s[3]});
}

template <typename T>
struct Runner
{
  const NetworkParams<T> &params;
  Tape<T> *tape; // null for inference

  Tensor<T> conv(std::size_t layer, const Tensor<T> &in, bool activate)
  {
    const auto &p = params.layers[layer];
    const auto kd = kernel_dims(params.arch, layer + 1 == params.layers.size() ? 1 : params.arch.kernel_extent);
    if (p.weight.extent(1) != in.extent(0)) {
      throw ShapeError(p.id + ": input has " + std::to_string(in.extent(0)) + " channels, weights expect " +
                       std::to_string(p.weight.extent(1)));
    }
    Tensor<T> out = layers::conv_forward(in, p.weight, p.bias, kd);
    if (activate) {
      out = layers::leaky_relu_forward(out);
    }
    if (tape) {
      tape->conv_inputs[layer] = in;
      tape->conv_outputs[layer] = out;
    }
    return out;
  }

  Tensor<T> run(const Tensor<T> &input)
  {
    const UNetConfig &cfg = params.arch;
    const auto pf = pool_dims(cfg);
    std::size_t layer = 0;
    Tensor<T> x = to_internal(input, cfg);
    std::vector<Tensor<T>> skips;
    for (int l = 0; l < cfg.depth; ++l) {
      Tensor<T> h = conv(layer++, x, true);
      h = conv(layer++, h, true);
      if (tape) {
        tape->pool_inputs.push_back(h.shape());
      }
      x = layers::avg_pool_forward(h, pf);
      skips.push_back(std::move(h));
    }
    Tensor<T> h = conv(layer++, x, true);
    h = conv(layer++, h, true);
    for (int l = cfg.depth - 1; l >= 0; --l) {
      if (tape) {
        tape->up_inputs.push_back(h.shape());
      }
      Tensor<T> u = layers::upsample_forward(h, pf);
      u = conv(layer++, u, true);
      Tensor<T> c = layers::concat_channels(skips[static_cast<std::size_t>(l)], u);
      h = conv(layer++, c, true);
      h = conv(layer++, h, true);
    }
    Tensor<T> out = conv(layer++, h, false);
    return to_external(out, cfg);
  }
};

} // namespace

template <typename T>
NetworkParams<T> build_unet(const UNetConfig &cfg, std::uint64_t seed)
{
  NetworkParams<T> p;
  p.arch = cfg;
  Rng rng(seed);
  for (const auto &s : unet_layer_specs(cfg)) {
    ConvParams<T> layer;
    layer.id = s.id;
    layer.weight = Tensor<T>(weight_shape(s, cfg.spatial_rank));
    layer.bias = Tensor<T>(Shape{s.out_channels});
    const double fan_in = static_cast<double>(layer.weight.size() / s.out_channels);
    const double stddev = std::sqrt(2.0 / fan_in);
    for (auto &w : layer.weight.data()) {
      w = static_cast<T>(stddev * truncated_normal(rng, 2.0));
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

template <typename T>
NetworkParams<T> zeros_like(const NetworkParams<T> &p)
{
  NetworkParams<T> z;
  z.arch = p.arch;
  for (const auto &l : p.layers) {
    z.layers.push_back({l.id, Tensor<T>(l.weight.shape()), Tensor<T>(l.bias.shape())});
  }
  return z;
}

template <typename T>
void check_same_architecture(const NetworkParams<T> &a, const NetworkParams<T> &b)
{
  if (!(a.arch == b.arch) || a.layers.size() != b.layers.size()) {
    throw ShapeError("network architectures differ");
  }
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].weight.shape() != b.layers[i].weight.shape() || a.layers[i].bias.shape() != b.layers[i].bias.shape()) {
      throw ShapeError("layer " + a.layers[i].id + " shapes differ between networks");
    }
  }
}

template <typename T>
ForwardResult<T> forward(const NetworkParams<T> &params, const Tensor<T> &input)
{
  ForwardResult<T> r;
  r.tape.arch = params.arch;
  r.tape.params_fingerprint = params.fingerprint();
  r.tape.input_shape = input.shape();
  r.tape.conv_inputs.resize(params.layers.size());
  r.tape.conv_outputs.resize(params.layers.size());
  Runner<T> runner{params, &r.tape};
  r.output = runner.run(input);
  r.tape.output_shape = r.output.shape();
  return r;
}

template <typename T>
Tensor<T> predict(const NetworkParams<T> &params, const Tensor<T> &input)
{
  Runner<T> runner{params, nullptr};
  return runner.run(input);
}

template <typename T>
Gradients<T> backward(const NetworkParams<T> &params, const Tape<T> &tape, const Tensor<T> &output_grad)
{
  if (!(tape.arch == params.arch) || tape.conv_inputs.size() != params.layers.size()) {
    throw ShapeError("backward: tape was recorded for a different architecture");
  }
  if (tape.params_fingerprint != params.fingerprint()) {
    throw ShapeError("backward: stale tape (weights changed since the forward pass)");
  }
  if (output_grad.shape() != tape.output_shape) {
    throw ShapeError("backward: output gradient " + shape_string(output_grad.shape()) + " does not match output " +
                     shape_string(tape.output_shape));
  }
  const UNetConfig &cfg = params.arch;
  const auto pf = pool_dims(cfg);
  Gradients<T> grads = zeros_like(params);
  const std::size_t n_layers = params.layers.size();

  auto conv_back = [&](std::size_t layer, Tensor<T> g, bool activated, bool need_input) {
    if (activated) {
      g = layers::leaky_relu_backward(tape.conv_outputs[layer], g);
    }
    const auto kd = kernel_dims(cfg, layer + 1 == n_layers ? 1 : cfg.kernel_extent);
    auto cg = layers::conv_backward(tape.conv_inputs[layer], params.layers[layer].weight, g, kd, need_input);
    grads.layers[layer].weight = std::move(cg.weight);
    grads.layers[layer].bias = std::move(cg.bias);
    return std::move(cg.input);
  };

  Tensor<T> g = output_grad;
  if (cfg.spatial_rank == 2) {
    const Shape &s = g.shape();
    g = g.reshaped(Shape{s[0], 1, s[1], s[2]});
  }
  std::size_t layer = n_layers - 1;
  g = conv_back(layer, std::move(g), false, true);

  std::vector<Tensor<T>> skip_grads(static_cast<std::size_t>(cfg.depth));
  // Decoder levels were run deepest first, so unwind from level 0 upwards.
  for (int l = 0; l < cfg.depth; ++l) {
    g = conv_back(--layer, std::move(g), true, true);                // dec_l conv2
    Tensor<T> gc = conv_back(--layer, std::move(g), true, true);     // dec_l conv1
    auto [g_skip, g_up] = layers::split_channels(gc, cfg.level_channels(l));
    skip_grads[static_cast<std::size_t>(l)] = std::move(g_skip);
    Tensor<T> gu = conv_back(--layer, std::move(g_up), true, true);  // dec_l up
    const std::size_t up_index = static_cast<std::size_t>(cfg.depth - 1 - l);
    g = layers::upsample_backward(gu, tape.up_inputs[up_index], pf);
  }
  g = conv_back(--layer, std::move(g), true, true); // bottom conv2
  g = conv_back(--layer, std::move(g), true, cfg.depth > 0); // bottom conv1
  for (int l = cfg.depth - 1; l >= 0; --l) {
    Tensor<T> gh = layers::avg_pool_backward(g, tape.pool_inputs[static_cast<std::size_t>(l)], pf);
    axpy(1.0, skip_grads[static_cast<std::size_t>(l)], gh);
    g = conv_back(--layer, std::move(gh), true, true);
    g = conv_back(--layer, std::move(g), true, l > 0);
  }
  return grads;
}

template <typename U, typename T>
NetworkParams<U> cast_params(const NetworkParams<T> &p)
{
  NetworkParams<U> out;
  out.arch = p.arch;
  for (const auto &l : p.layers) {
    out.layers.push_back({l.id, cast<U>(l.weight), cast<U>(l.bias)});
  }
  return out;
}

#define FINE_INSTANTIATE_UNET(T)                                                                         \
  template struct NetworkParams<T>;                                                                      \
  template NetworkParams<T> build_unet<T>(const UNetConfig &, std::uint64_t);                            \
  template NetworkParams<T> zeros_like<T>(const NetworkParams<T> &);                                     \
  template void check_same_architecture<T>(const NetworkParams<T> &, const NetworkParams<T> &);          \
  template ForwardResult<T> forward<T>(const NetworkParams<T> &, const Tensor<T> &);                     \
  template Tensor<T> predict<T>(const NetworkParams<T> &, const Tensor<T> &);                            \
  template Gradients<T> backward<T>(const NetworkParams<T> &, const Tape<T> &, const Tensor<T> &);

FINE_INSTANTIATE_UNET(float)
FINE_INSTANTIATE_UNET(double)
template NetworkParams<float> cast_params<float, double>(const NetworkParams<double> &);
template NetworkParams<double> cast_params<double, float>(const NetworkParams<float> &);

} // namespace fine
