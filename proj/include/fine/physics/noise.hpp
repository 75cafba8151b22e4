#pragma once

#include <cstdint>
#include <string>

#include "fine/core/tensor.hpp"

namespace fine {

// Adds i.i.d. Gaussian noise of standard deviation sigma; complex values get
// independent re/im components of sigma / sqrt(2) each.
template <typename T>
Tensor<T> apply_noise(const Tensor<T> &measurement, double sigma, std::uint64_t seed);

enum class NoiseWeightMode { Identity, MagnitudeProportional };

NoiseWeightMode parse_noise_weight_mode(const std::string &s);
const char *noise_weight_mode_name(NoiseWeightMode m);

// Diagonal W >= 0 over the measurement domain.
template <typename R>
struct NoiseWeight
{
  NoiseWeightMode mode = NoiseWeightMode::Identity;
  Tensor<R> weights;
};

// Identity: W = 1. MagnitudeProportional: W = magnitude / max(magnitude).
template <typename R>
NoiseWeight<R> build_noise_weight(NoiseWeightMode mode, const Shape &shape, const Tensor<R> *magnitude = nullptr);

} // namespace fine
