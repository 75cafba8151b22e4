#pragma once

#include <vector>

#include "fine/core/tensor.hpp"

namespace fine {

// Every axis-aligned patch at the given stride, in row-major order of origins.
template <typename T>
std::vector<Tensor<T>> extract_patches(const Tensor<T> &volume, const Shape &patch_shape, const Shape &stride);

// In-plane (axes 0 and 1) rotation about the grid centre with bilinear
// interpolation and zero fill; |angle_deg| <= 15.
template <typename T>
Tensor<T> augment_rotate(const Tensor<T> &patch, double angle_deg);

} // namespace fine
