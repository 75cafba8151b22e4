#pragma once

#include "fine/harness/experiment.hpp"

namespace fine {

// Artifact layout under output_dir:
//   dataset/manifest.json, dataset/<case_id>/      phantom
//   checkpoint/, train_loss.csv, train.json        train
//   recon/<method>/<case_id>/                      recon
//   metrics.csv                                    metrics
//   compare/*.csv                                  compare
//   MANIFEST.json                                  index of everything written

int cmd_phantom(const ExperimentConfig &cfg, bool force);
int cmd_train(const ExperimentConfig &cfg);
int cmd_recon(const ExperimentConfig &cfg, Method method, const std::string &case_id);
int cmd_metrics(const ExperimentConfig &cfg);
int cmd_compare(const ExperimentConfig &cfg, int jobs);
int cmd_weights_report(const std::filesystem::path &before, const std::filesystem::path &after,
                       const std::filesystem::path &out);

Dataset load_dataset(const std::filesystem::path &output_dir);
void save_dataset(const ExperimentConfig &cfg, const Dataset &data);

// Reads the 2D preview slice: the middle slice along the last axis of a volume.
Tensor<float> preview_slice(const Tensor<float> &image);

} // namespace fine
