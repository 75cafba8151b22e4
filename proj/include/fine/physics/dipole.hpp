#pragma once

#include <array>
#include <filesystem>

#include "fine/core/tensor.hpp"

namespace fine {

enum class Axis { X = 0, Y = 1, Z = 2 };

Axis parse_axis(const std::string &name);
const char *axis_name(Axis a);

// k-space unit dipole response D(k) = 1/3 - k_b^2 / |k|^2 on the unshifted
// FFT grid, with D(0) = 0 and values within 1e-12 of zero snapped to zero.
template <typename T>
struct DipoleKernel
{
  Shape grid_shape;
  std::array<double, 3> voxel_size{1.0, 1.0, 1.0};
  Axis b0_axis = Axis::Z;
  Tensor<T> values;
};

template <typename T>
DipoleKernel<T> make_dipole_kernel(const Shape &grid_shape, std::array<double, 3> voxel_size = {1.0, 1.0, 1.0},
                                   Axis b0_axis = Axis::Z);

// Field of a susceptibility map: Re(IFFT(D * FFT(chi))), periodic boundary.
// Accepts [X, Y, Z] or [1, X, Y, Z] (network layout); returns the same layout.
template <typename T>
Tensor<T> dipole_convolve(const DipoleKernel<T> &kernel, const Tensor<T> &chi);

// Signed FFT-order frequency index of position n on an axis of extent N.
inline double fft_frequency_index(std::size_t n, std::size_t extent)
{
  return n < (extent + 1) / 2 ? static_cast<double>(n) : static_cast<double>(n) - static_cast<double>(extent);
}

template <typename T>
void save_dipole_kernel(const DipoleKernel<T> &k, const std::filesystem::path &dir);

} // namespace fine
