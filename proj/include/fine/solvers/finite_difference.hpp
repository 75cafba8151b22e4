#pragma once

#include "fine/core/tensor.hpp"

namespace fine {

// Forward differences along every axis with a zero (Neumann) difference at the
// far boundary. Output shape is [rank, shape...].
template <typename E>
Tensor<E> gradient(const Tensor<E> &x);

// Adjoint of gradient(): returns grad^T g (the negative divergence).
template <typename E>
Tensor<E> gradient_adjoint(const Tensor<E> &g, const Shape &image_shape);

} // namespace fine
