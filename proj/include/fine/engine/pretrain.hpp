#pragma once

#include <vector>

#include "fine/net/loss.hpp"
#include "fine/net/optimizer.hpp"
#include "fine/phantom/phantom.hpp"

namespace fine {

// Network-layout input/target tensors ([C, spatial...]).
struct TrainingPair
{
  Tensor<float> input;
  Tensor<float> target;
};

struct TrainConfig
{
  int epochs = 40;
  int batch_size = 8;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  LossKind loss = LossKind::L1;
  CompositeWeights composite{};
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult
{
  NetworkParams<float> params;
  // Entry 0 is the loss before training, entry e the mean after epoch e.
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> validation_ids;
  long steps = 0;
};

TrainResult pretrain(const std::vector<TrainingPair> &data, const UNetConfig &arch, const TrainConfig &cfg);

// Field/chi patch pairs scaled into network units, optionally with in-plane
// rotated copies (angles in degrees).
std::vector<TrainingPair> qsm_training_pairs(const std::vector<PhantomCase> &cases, const Shape &patch_shape,
                                             const Shape &stride, const std::vector<double> &rotations,
                                             double scale);

// (re, im) of A^H b against the truth image, one pair per case.
std::vector<TrainingPair> undersampled_training_pairs(const std::vector<PhantomCase> &cases);

} // namespace fine
