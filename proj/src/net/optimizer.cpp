#include "fine/net/optimizer.hpp"

#include <cmath>

namespace fine {

OptimizerKind parse_optimizer_kind(const std::string &name)
{
  if (name == "adam") {
    return OptimizerKind::Adam;
  }
  if (name == "rmsprop") {
    return OptimizerKind::RmsProp;
  }
  throw ConfigError("unknown optimizer '" + name + "' (expected adam or rmsprop)");
}

const char *optimizer_kind_name(OptimizerKind k)
{
  return k == OptimizerKind::Adam ? "adam" : "rmsprop";
}

template <typename T>
OptimizerState<T> make_optimizer(OptimizerKind kind, double learning_rate, const NetworkParams<T> &params)
{
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive, got " + std::to_string(learning_rate));
  }
  OptimizerState<T> s;
  s.kind = kind;
  s.learning_rate = learning_rate;
  for (const auto &l : params.layers) {
    for (const Tensor<T> *t : {&l.weight, &l.bias}) {
      s.first_moment.emplace_back(t->shape());
      s.second_moment.emplace_back(t->shape());
    }
  }
  return s;
}

template <typename T>
NetworkParams<T> optimizer_step(OptimizerState<T> &state, const NetworkParams<T> &params, const Gradients<T> &grads)
{
  if (!(state.learning_rate > 0.0)) {
    throw ConfigError("learning rate must be positive");
  }
  check_same_architecture(params, grads);
  if (state.first_moment.size() != 2 * params.layers.size()) {
    throw ShapeError("optimizer state does not match the network");
  }
  ++state.step;
  const double lr = state.learning_rate;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  NetworkParams<T> out = params;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Tensor<T> *targets[2] = {&out.layers[l].weight, &out.layers[l].bias};
    const Tensor<T> *gs[2] = {&grads.layers[l].weight, &grads.layers[l].bias};
    for (int j = 0; j < 2; ++j) {
      Tensor<T> &p = *targets[j];
      const Tensor<T> &g = *gs[j];
      Tensor<T> &m = state.first_moment[2 * l + j];
      Tensor<T> &v = state.second_moment[2 * l + j];
      require_same_shape(p, m, "optimizer moments");
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i];
        if (state.kind == OptimizerKind::Adam) {
          const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
          const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
          m[i] = static_cast<T>(mi);
          v[i] = static_cast<T>(vi);
          p[i] = static_cast<T>(p[i] - lr * (mi / bc1) / (std::sqrt(vi / bc2) + state.epsilon));
        } else {
          const double vi = state.rho * v[i] + (1.0 - state.rho) * gi * gi;
          v[i] = static_cast<T>(vi);
          p[i] = static_cast<T>(p[i] - lr * gi / (std::sqrt(vi) + state.epsilon));
        }
      }
    }
  }
  return out;
}

template OptimizerState<float> make_optimizer<float>(OptimizerKind, double, const NetworkParams<float> &);
template OptimizerState<double> make_optimizer<double>(OptimizerKind, double, const NetworkParams<double> &);
template NetworkParams<float> optimizer_step<float>(OptimizerState<float> &, const NetworkParams<float> &,
                                                    const Gradients<float> &);
template NetworkParams<double> optimizer_step<double>(OptimizerState<double> &, const NetworkParams<double> &,
                                                      const Gradients<double> &);

} // namespace fine
