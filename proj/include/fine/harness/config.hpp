#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fine/engine/fine_edit.hpp"
#include "fine/engine/pretrain.hpp"
#include "fine/physics/noise.hpp"
#include "fine/solvers/regularized.hpp"

namespace fine {

enum class Method { Dl, Dll2, Fine, Tv, Medi, Dip };

Method parse_method(const std::string &s);
const char *method_name(Method m);

struct LesionPolicy
{
  LesionKind kind = LesionKind::Hemorrhage;
  double value_min = 0.5;
  double value_max = 1.0;
  double radius = 5.0;
  int count = 1;
};

struct DatasetConfig
{
  Shape grid{64, 64, 32};
  int train_count = 8;
  int test_count = 0; // in-distribution, lesion-free
  int ood_count = 10; // lesion-injected
  double noise_sigma = 0.0;
  LesionPolicy lesion{};
  // Undersampled only.
  double acceleration = 3.24;
  double center_fraction = 0.08;
  bool complex_valued = false;
};

struct FineSetting
{
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-4;
};

struct ExperimentConfig
{
  int version = 1;
  PhantomKind application = PhantomKind::Qsm;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "fine_out";
  DatasetConfig dataset{};
  UNetConfig arch{};
  TrainConfig train{};
  Shape patch_shape{32, 32, 16}; // QSM training patches
  Shape patch_stride{16, 16, 8};
  std::vector<double> rotations;
  double qsm_scale = 1.0;
  NoiseWeightMode weight = NoiseWeightMode::Identity; // QSM data weighting W
  FineConfig fine{};
  SolverConfig solver{};
  std::vector<Method> methods{Method::Dl, Method::Fine};
  double max_val = 1.0; // PSNR peak and SSIM dynamic range
  bool support_mask = true;
  std::vector<FineSetting> fine_sweep;
  std::vector<int> train_size_sweep;

  void validate() const;
};

// Defaults per application, before any JSON overrides.
ExperimentConfig default_config(PhantomKind app);

ExperimentConfig config_from_json(const nlohmann::json &j);
nlohmann::json config_to_json(const ExperimentConfig &c);
ExperimentConfig load_config(const std::filesystem::path &path);

// FNV-1a over the canonical JSON of every setting except output_dir.
std::uint64_t config_hash(const ExperimentConfig &c);
std::string hash_hex(std::uint64_t h);

// FINE_SEED, when set, replaces the configured seed.
void apply_seed_override(ExperimentConfig &c);

} // namespace fine
