#pragma once

#include <map>
#include <optional>

#include "fine/harness/config.hpp"
#include "fine/metrics/metrics.hpp"

namespace fine {

enum class Split { Train, Test, Ood };
const char *split_name(Split s);

struct DatasetCase
{
  std::string id;
  Split split = Split::Train;
  PhantomCase phantom;
};

struct Dataset
{
  std::vector<DatasetCase> cases;

  std::vector<PhantomCase> phantoms(Split s, std::size_t limit = SIZE_MAX) const;
  std::vector<const DatasetCase *> evaluation_cases() const; // test and ood, in id order
};

Dataset build_dataset(const ExperimentConfig &cfg);

// Training pairs of the first `train_limit` training cases.
std::vector<TrainingPair> training_pairs(const ExperimentConfig &cfg, const Dataset &data,
                                         std::size_t train_limit = SIZE_MAX);
TrainResult train_prior(const ExperimentConfig &cfg, const Dataset &data, std::size_t train_limit = SIZE_MAX);

struct Reconstruction
{
  Method method = Method::Dl;
  Tensor<float> image;
  std::vector<FineTracePoint> trace;     // fine, dip
  std::vector<OuterIteration> solver_log; // tv, medi
  std::optional<WeightChangeReport> weights;
  std::optional<NetworkParams<float>> edited;
  double initial_fidelity = 0.0;
  double final_fidelity = 0.0;
  int cg_iterations = 0; // dll2
  double cg_residual = 0.0;
};

// FINE settings may be overridden for sweeps. Network methods need `prior`.
Reconstruction reconstruct(const ExperimentConfig &cfg, Method method, const PhantomCase &c,
                           const NetworkParams<float> *prior, const FineConfig *fine_override = nullptr);

MetricReport evaluate(const ExperimentConfig &cfg, const std::string &case_id, const std::string &method_id,
                      const PhantomCase &c, const Tensor<float> &image);

struct MethodOutcome
{
  std::optional<MetricReport> report; // empty when the method failed
  std::string error;
  double initial_fidelity = 0.0;
  double final_fidelity = 0.0;
  std::optional<WeightChangeReport> weights;
};

struct CaseOutcome
{
  std::string case_id;
  Split split = Split::Test;
  std::vector<double> truth_lesion_means;
  std::map<std::string, MethodOutcome> methods; // keyed by method id
};

struct SuiteResult
{
  std::vector<std::string> method_ids; // column order
  std::vector<CaseOutcome> cases;

  bool complete() const;
};

// One method column of a suite; `id` names it in tables.
struct SuiteColumn
{
  std::string id;
  Method method = Method::Fine;
  std::optional<FineConfig> fine;
};

std::vector<SuiteColumn> default_columns(const ExperimentConfig &cfg);

// Runs every column on every evaluation case. Cases run on `jobs` threads and
// are merged in id order; method failures are recorded, not thrown.
SuiteResult run_suite(const ExperimentConfig &cfg, const Dataset &data, const NetworkParams<float> &prior,
                      const std::vector<SuiteColumn> &columns, int jobs = 1);

struct WinRate
{
  std::string comparison;
  int wins = 0;
  int total = 0;
};

// PSNR wins of fine over each other column, and lesion means closer to truth.
std::vector<WinRate> win_rates(const SuiteResult &r, const std::string &subject = "fine");

double mean_psnr(const SuiteResult &r, const std::string &method_id);

} // namespace fine
