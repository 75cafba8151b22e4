#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "fine/engine/fidelity.hpp"
#include "fine/engine/weight_report.hpp"
#include "fine/net/optimizer.hpp"

namespace fine {

enum class FineInit { Pretrained, Random };

FineInit parse_fine_init(const std::string &s);
const char *fine_init_name(FineInit i);

struct FineConfig
{
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-4;
  int iterations = 300;
  FineInit init = FineInit::Pretrained;
  std::optional<double> early_stop_rel; // stop when |dL| / L falls below this
  int log_every = 1;
  bool return_best = true; // false returns the last iterate
  std::uint64_t seed = 0;  // weights for random init

  void validate() const;
};

struct FineTracePoint
{
  int iteration = 0;
  double fidelity = 0.0;
};

template <typename T>
struct FineResult
{
  NetworkParams<T> params;
  Tensor<T> output; // network output of the returned parameters
  std::vector<FineTracePoint> trace;
  WeightChangeReport report; // relative to the starting weights of the edit
  double initial_loss = 0.0;
  double final_loss = 0.0; // fidelity of the returned parameters
  int returned_iteration = 0;
  int iterations_run = 0;
};

template <typename T>
Tensor<T> dl_reconstruct(const NetworkParams<T> &params, const Tensor<T> &input);

// Minimizes the fidelity loss over the network weights for a single test input.
template <typename T>
FineResult<T> fine_edit(const NetworkParams<T> &params0, const Fidelity<T> &fidelity, const FineConfig &cfg);

void write_loss_trace(const std::vector<FineTracePoint> &trace, const std::filesystem::path &path);

} // namespace fine
