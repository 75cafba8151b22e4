#pragma once

#include <complex>
#include <span>
#include <vector>

#include "fine/core/tensor.hpp"

namespace fine {

// Unnormalized forward DFT along the listed axes (radix-2, power-of-two extents).
template <typename R>
Tensor<std::complex<R>> fft_nd(const Tensor<std::complex<R>> &t, std::span<const std::size_t> axes);

// Inverse DFT including the 1/N normalization over the transformed axes.
template <typename R>
Tensor<std::complex<R>> ifft_nd(const Tensor<std::complex<R>> &t, std::span<const std::size_t> axes);

// In-place variants used by the operators on their hot paths.
template <typename R>
void fft_inplace(Tensor<std::complex<R>> &t, std::span<const std::size_t> axes, bool inverse);

// Type-erased entry points; real tensors are rejected with TypeError.
AnyTensor fft_nd(const AnyTensor &t, std::span<const std::size_t> axes);
AnyTensor ifft_nd(const AnyTensor &t, std::span<const std::size_t> axes);

// Every axis of the tensor.
std::vector<std::size_t> all_axes(const Shape &shape);

bool is_power_of_two(std::size_t n);

} // namespace fine
