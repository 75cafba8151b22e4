#pragma once

#include <filesystem>

#include "fine/core/tensor.hpp"

namespace fine {

struct Window
{
  double lo = 0.0;
  double hi = 1.0;
};

// Binary 16-bit PGM (P5, maxval 65535, big-endian samples). Rows are axis 0.
template <typename T>
void export_image(const Tensor<T> &t, const std::filesystem::path &path, Window window);

std::vector<std::uint16_t> window_to_gray(std::span<const double> values, Window window);

} // namespace fine
