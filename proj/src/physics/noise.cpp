#include "fine/physics/noise.hpp"

#include <algorithm>
#include <cmath>

#include "fine/core/rng.hpp"

namespace fine {

template <typename T>
Tensor<T> apply_noise(const Tensor<T> &measurement, double sigma, std::uint64_t seed)
{
  if (!(sigma >= 0.0)) {
    throw ConfigError("noise sigma must be >= 0");
  }
  Tensor<T> out = measurement;
  if (sigma == 0.0) {
    return out;
  }
  Rng rng(seed);
  if constexpr (is_complex_v<T>) {
    using R = real_t<T>;
    std::normal_distribution<double> n(0.0, sigma / std::sqrt(2.0));
    for (auto &v : out.data()) {
      const double re = n(rng);
      const double im = n(rng);
      v += T(static_cast<R>(re), static_cast<R>(im));
    }
  } else {
    std::normal_distribution<double> n(0.0, sigma);
    for (auto &v : out.data()) {
      v += static_cast<T>(n(rng));
    }
  }
  return out;
}

NoiseWeightMode parse_noise_weight_mode(const std::string &s)
{
  if (s == "identity") {
    return NoiseWeightMode::Identity;
  }
  if (s == "magnitude") {
    return NoiseWeightMode::MagnitudeProportional;
  }
  throw ConfigError("noise weight mode must be 'identity' or 'magnitude', got '" + s + "'");
}

const char *noise_weight_mode_name(NoiseWeightMode m)
{
  return m == NoiseWeightMode::Identity ? "identity" : "magnitude";
}

template <typename R>
NoiseWeight<R> build_noise_weight(NoiseWeightMode mode, const Shape &shape, const Tensor<R> *magnitude)
{
  NoiseWeight<R> w{mode, Tensor<R>(shape, R(1))};
  if (mode == NoiseWeightMode::Identity) {
    return w;
  }
  if (!magnitude || magnitude->shape() != shape) {
    throw ShapeError("magnitude-proportional noise weight needs a magnitude image of the measurement shape");
  }
  R peak = 0;
  for (auto v : magnitude->data()) {
    peak = std::max(peak, std::abs(v));
  }
  if (peak <= R(0)) {
    throw NumericalError("magnitude image is identically zero");
  }
  for (std::size_t i = 0; i < w.weights.size(); ++i) {
    w.weights[i] = std::abs((*magnitude)[i]) / peak;
  }
  return w;
}

template Tensor<float> apply_noise<float>(const Tensor<float> &, double, std::uint64_t);
template Tensor<double> apply_noise<double>(const Tensor<double> &, double, std::uint64_t);
template Tensor<cfloat> apply_noise<cfloat>(const Tensor<cfloat> &, double, std::uint64_t);
template Tensor<cdouble> apply_noise<cdouble>(const Tensor<cdouble> &, double, std::uint64_t);
template NoiseWeight<float> build_noise_weight<float>(NoiseWeightMode, const Shape &, const Tensor<float> *);
template NoiseWeight<double> build_noise_weight<double>(NoiseWeightMode, const Shape &, const Tensor<double> *);

} // namespace fine
