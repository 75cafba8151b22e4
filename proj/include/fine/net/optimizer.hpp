#pragma once

#include <string>
#include <vector>

#include "fine/net/unet.hpp"

namespace fine {

enum class OptimizerKind { Adam, RmsProp };

OptimizerKind parse_optimizer_kind(const std::string &name);
const char *optimizer_kind_name(OptimizerKind k);

template <typename T>
struct OptimizerState
{
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-4;
  double beta1 = 0.9;   // Adam first-moment decay
  double beta2 = 0.999; // Adam second-moment decay; RMSprop uses rho
  double rho = 0.9;
  double epsilon = 1e-8;
  // One entry per weight and bias tensor, in layer order (weight, bias, ...).
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  long step = 0;
};

template <typename T>
OptimizerState<T> make_optimizer(OptimizerKind kind, double learning_rate, const NetworkParams<T> &params);

// Returns the updated parameters; params itself is left untouched.
template <typename T>
NetworkParams<T> optimizer_step(OptimizerState<T> &state, const NetworkParams<T> &params, const Gradients<T> &grads);

} // namespace fine
