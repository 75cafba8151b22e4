#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fine/net/unet.hpp"

namespace fine {

struct LayerChange
{
  std::string layer_id;
  double median_rel_change = 0.0; // median |w1 - w0| / (|w0| + delta) over the layer's weights
  double norm_before = 0.0;
  double norm_after = 0.0;
  double change_norm = 0.0;
};

// One entry per layer in network order. Biases are excluded: they start at
// zero, where the relative change is not informative.
struct WeightChangeReport
{
  std::vector<LayerChange> layers;
};

template <typename T>
WeightChangeReport weight_change_report(const NetworkParams<T> &before, const NetworkParams<T> &after,
                                        double delta = 1e-12);

void write_weight_report(const WeightChangeReport &r, const std::filesystem::path &path);

} // namespace fine
