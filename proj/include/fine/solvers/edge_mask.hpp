#pragma once

#include "fine/core/tensor.hpp"

namespace fine {

// Binary M_G over gradient components ([rank, shape...]): 0 on edges, 1 elsewhere.
struct EdgeMask
{
  Tensor<float> mask;
  double keep_fraction = 0.3;
  double threshold = 0.0;
};

// Components whose |forward difference| of the magnitude image strictly exceeds
// the (1 - keep_fraction) nearest-rank quantile are edges.
template <typename R>
EdgeMask edge_mask(const Tensor<R> &magnitude, double keep_fraction = 0.3);

// M_G = 1 everywhere (plain TV).
EdgeMask no_edges(const Shape &image_shape);

} // namespace fine
