#pragma once

#include <complex>
#include <filesystem>

#include "fine/core/tensor.hpp"

namespace fine {

// Binary variable-density Cartesian sampling pattern on the unshifted FFT grid.
struct SamplingMask
{
  Shape grid_shape;
  Tensor<float> mask; // 0 or 1
  double requested_acceleration = 1.0;
  double acceleration = 1.0; // realized N / |U|_0
  double center_fraction = 0.0;
  double density_power = 0.0;
  std::uint64_t seed = 0;

  std::size_t sampled_count() const;
};

// Central disc of radius center_fraction * min(N) / 2 always sampled; the rest
// weighted by (1 - r / r_max)^p with p fitted by bisection so the expected count
// meets the budget, then exactly round(N / acceleration) points are drawn by
// weighted sampling without replacement.
SamplingMask make_sampling_mask(const Shape &grid_shape, double acceleration, double center_fraction,
                                std::uint64_t seed);

SamplingMask full_mask(const Shape &grid_shape);

// Orthonormal masked DFT: U F x / sqrt(N).
template <typename R>
Tensor<std::complex<R>> undersample_forward(const SamplingMask &mask, const Tensor<std::complex<R>> &image);

// sqrt(N) F^-1 U k, the exact adjoint of undersample_forward.
template <typename R>
Tensor<std::complex<R>> undersample_adjoint(const SamplingMask &mask, const Tensor<std::complex<R>> &kspace);

void save_sampling_mask(const SamplingMask &m, const std::filesystem::path &dir);
SamplingMask load_sampling_mask(const std::filesystem::path &dir);

} // namespace fine
