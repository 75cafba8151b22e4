#pragma once

#include <string>

#include "fine/physics/dipole.hpp"

namespace fine {

enum class LossKind { L1, L2, QsmComposite };

LossKind parse_loss_kind(const std::string &name);
const char *loss_kind_name(LossKind k);

struct CompositeWeights
{
  double image = 1.0;
  double gradient = 0.1;
  double field = 0.1;
};

template <typename T>
struct LossAux
{
  const DipoleKernel<T> *kernel = nullptr; // needed by the field term of qsm_composite
  CompositeWeights weights{};
};

template <typename T>
struct LossValue
{
  double value = 0.0;
  Tensor<T> grad; // d value / d prediction
};

// Training losses use mean reduction. Predictions are in network layout
// [C, spatial...]; the composite loss expects a single channel.
template <typename T>
LossValue<T> compute_loss(LossKind kind, const Tensor<T> &prediction, const Tensor<T> &target,
                          const LossAux<T> &aux = {});

} // namespace fine
