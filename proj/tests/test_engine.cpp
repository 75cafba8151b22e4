#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <fstream>

#include "fine/core/rng.hpp"
#include "fine/core/tensor_ops.hpp"
#include "fine/engine/fine_edit.hpp"
#include "fine/engine/pretrain.hpp"
#include "fine/engine/weight_report.hpp"
#include "support/oracles.hpp"

using namespace fine;
using oracle::random_tensor;

namespace {

UNetConfig tiny_2d(int in_ch, int out_ch)
{
  UNetConfig c;
  c.spatial_rank = 2;
  c.in_channels = in_ch;
  c.out_channels = out_ch;
  c.depth = 1;
  c.base_channels = 4;
  return c;
}

T2wPhantomSpec t2w_spec(bool complex_valued = false)
{
  T2wPhantomSpec s;
  s.complex_valued = complex_valued;
  s.acceleration = 3.0;
  s.noise_sigma = 0.0;
  return s;
}

template <typename T>
bool same_values(const Tensor<T> &a, const Tensor<T> &b)
{
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

bool same_params(const NetworkParams<float> &a, const NetworkParams<float> &b)
{
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (!same_values(a.layers[l].weight, b.layers[l].weight) || !same_values(a.layers[l].bias, b.layers[l].bias)) {
      return false;
    }
  }
  return true;
}

} // namespace

TEST_CASE("qsm fidelity gradient matches central differences")
{
  const Shape grid{8, 4, 4};
  const auto kernel = make_dipole_kernel<double>(grid);
  const auto field = random_tensor<double>(grid, 3, 0.1);
  auto weight = random_tensor<double>(grid, 4, 1.0);
  for (auto &v : weight.data()) {
    v = std::abs(v) + 0.1;
  }
  for (double scale : {1.0, 10.0}) {
    QsmFidelity<double> fid(kernel, field, weight, scale);
    CHECK(fid.network_input().shape() == Shape{1, 8, 4, 4});
    CHECK(fid.network_input()[5] == doctest::Approx(scale * field[5]));
    const auto out = random_tensor<double>({1, 8, 4, 4}, 5, 0.3);
    const auto lv = fid.evaluate(out);
    const auto num = oracle::numeric_gradient([&](const Tensor<double> &x) { return fid.evaluate(x).value; }, out, 1e-5);
    CHECK(oracle::gradient_error(lv.grad, num) < 1e-7);
    CHECK(fid.image(out)[7] == doctest::Approx(out[7] / scale));
  }
}

TEST_CASE("undersampled fidelity gradient matches central differences")
{
  const Shape grid{8, 8};
  const auto mask = make_sampling_mask(grid, 2.0, 0.1, 9);
  const auto kspace = random_tensor<cdouble>(grid, 1, 1.0);
  for (bool complex_out : {false, true}) {
    UndersampledFidelity<double> fid(mask, kspace, complex_out);
    const std::size_t ch = complex_out ? 2 : 1;
    CHECK(fid.output_channels() == ch);
    CHECK(fid.network_input().shape() == Shape{2, 8, 8});
    const auto out = random_tensor<double>({ch, 8, 8}, 2, 0.5);
    const auto lv = fid.evaluate(out);
    const auto num = oracle::numeric_gradient([&](const Tensor<double> &x) { return fid.evaluate(x).value; }, out, 1e-5);
    CHECK(oracle::gradient_error(lv.grad, num) < 1e-7);
  }
}

TEST_CASE("noise-free fidelity vanishes at the truth")
{
  auto c = generate_t2w_phantom({16, 16}, t2w_spec(), 11);
  const auto fid = make_fidelity<float>(c);
  CHECK(fid->evaluate(c.truth.reshaped({1, 16, 16})).value < 1e-9);
  auto q = generate_qsm_phantom({16, 16, 8}, QsmPhantomSpec{}, 12);
  const auto qf = make_fidelity<float>(q, 10.0);
  CHECK(qf->evaluate((10.0f * q.truth).reshaped({1, 16, 16, 8})).value < 1e-8);
}

TEST_CASE("pretraining halves the training loss on a toy set")
{
  std::vector<PhantomCase> cases;
  for (std::uint64_t s = 0; s < 10; ++s) {
    cases.push_back(generate_t2w_phantom({16, 16}, t2w_spec(), s));
  }
  const auto data = undersampled_training_pairs(cases);
  REQUIRE(data.size() == 10);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 2;
  cfg.loss = LossKind::L2;
  cfg.seed = 5;
  const auto r = pretrain(data, tiny_2d(2, 1), cfg);
  REQUIRE(r.train_loss.size() == 41);
  REQUIRE(r.validation_loss.size() == 41);
  CHECK(r.train_loss.back() < 0.5 * r.train_loss.front());
  CHECK(r.validation_ids.size() == 2);
  CHECK(r.train_ids.size() == 8);
  for (auto v : r.validation_ids) {
    CHECK(std::find(r.train_ids.begin(), r.train_ids.end(), v) == r.train_ids.end());
  }
  CHECK(r.steps == 40 * 4);
}

TEST_CASE("pretraining is deterministic and epochs 0 returns the initialization")
{
  std::vector<PhantomCase> cases;
  for (std::uint64_t s = 0; s < 4; ++s) {
    cases.push_back(generate_t2w_phantom({8, 8}, t2w_spec(), s));
  }
  const auto data = undersampled_training_pairs(cases);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 7;
  const auto a = pretrain(data, tiny_2d(2, 1), cfg);
  const auto b = pretrain(data, tiny_2d(2, 1), cfg);
  CHECK(same_params(a.params, b.params));
  cfg.epochs = 0;
  const auto z = pretrain(data, tiny_2d(2, 1), cfg);
  CHECK(same_params(z.params, build_unet<float>(tiny_2d(2, 1), derive_seed(7, 0))));
  CHECK(z.steps == 0);
}

TEST_CASE("pretraining errors")
{
  TrainConfig cfg;
  CHECK_THROWS_AS(pretrain({}, tiny_2d(2, 1), cfg), ConfigError);
  std::vector<TrainingPair> bad{{Tensor<float>({2, 8, 8}), Tensor<float>({1, 8, 8})}};
  bad[0].input[0] = std::numeric_limits<float>::quiet_NaN();
  cfg.validation_fraction = 0.0;
  try {
    pretrain(bad, tiny_2d(2, 1), cfg);
    FAIL("expected a NumericalError");
  } catch (const NumericalError &e) {
    CHECK(std::string(e.what()).find("batch 0") != std::string::npos);
  }
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("qsm training pairs are scaled patches")
{
  auto q = generate_qsm_phantom({16, 16, 8}, QsmPhantomSpec{}, 3);
  const auto pairs = qsm_training_pairs({q}, {8, 8, 8}, {8, 8, 8}, {10.0}, 10.0);
  REQUIRE(pairs.size() == 8);
  CHECK(pairs[0].input.shape() == Shape{1, 8, 8, 8});
  CHECK(pairs[0].target[0] == doctest::Approx(10.0f * q.truth[0]));
  CHECK_THROWS_AS(undersampled_training_pairs({q}), ConfigError);
}

TEST_CASE("dl reconstruction is a pure forward pass")
{
  const auto p = build_unet<float>(tiny_2d(2, 1), 1);
  const auto x = random_tensor<float>({2, 8, 8}, 2);
  CHECK(same_values(dl_reconstruct(p, x), dl_reconstruct(p, x)));
  const auto z = dl_reconstruct(p, Tensor<float>({2, 8, 8}));
  CHECK(norm(z) == 0.0);
  CHECK_THROWS_AS(dl_reconstruct(p, Tensor<float>({1, 8, 8})), ShapeError);
}

TEST_CASE("fine edit with zero iterations is the dl reconstruction")
{
  const auto c = generate_t2w_phantom({16, 16}, t2w_spec(), 4);
  const auto fid = make_fidelity<float>(c);
  const auto p = build_unet<float>(tiny_2d(2, 1), 3);
  FineConfig cfg;
  cfg.iterations = 0;
  const auto r = fine_edit(p, *fid, cfg);
  CHECK(same_values(r.output, dl_reconstruct(p, fid->network_input())));
  REQUIRE(r.report.layers.size() == p.layers.size());
  for (const auto &l : r.report.layers) {
    CHECK(l.median_rel_change == 0.0);
    CHECK(l.change_norm == 0.0);
  }
  CHECK(r.final_loss == r.initial_loss);
}

TEST_CASE("fine edit lowers the fidelity and leaves the prior untouched")
{
  const auto c = generate_t2w_phantom({16, 16}, t2w_spec(), 4);
  const auto fid = make_fidelity<float>(c);
  const auto p = build_unet<float>(tiny_2d(2, 1), 3);
  const auto copy = p;
  FineConfig cfg;
  cfg.iterations = 30;
  cfg.learning_rate = 1e-3;
  const auto r = fine_edit(p, *fid, cfg);
  CHECK(same_params(p, copy));
  CHECK(r.final_loss < r.initial_loss);
  CHECK(r.trace.size() == 31);
  CHECK(r.trace.front().fidelity == r.initial_loss);
  double best = r.initial_loss;
  for (const auto &t : r.trace) {
    best = std::min(best, t.fidelity);
  }
  CHECK(r.final_loss == best);
  CHECK(fid->evaluate(predict(r.params, fid->network_input())).value == doctest::Approx(r.final_loss).epsilon(1e-6));

  const auto again = fine_edit(p, *fid, cfg);
  CHECK(same_params(r.params, again.params));

  cfg.return_best = false;
  const auto last = fine_edit(p, *fid, cfg);
  CHECK(last.returned_iteration == 30);
  CHECK(last.final_loss == last.trace.back().fidelity);
}

TEST_CASE("fine edit random init and early stopping")
{
  const auto c = generate_t2w_phantom({16, 16}, t2w_spec(true), 6);
  const auto fid = make_fidelity<float>(c);
  const auto p = build_unet<float>(tiny_2d(2, 2), 3);
  FineConfig cfg;
  cfg.iterations = 0;
  cfg.init = FineInit::Random;
  cfg.seed = 99;
  const auto r = fine_edit(p, *fid, cfg);
  CHECK(same_params(r.params, build_unet<float>(p.arch, 99)));

  cfg.init = FineInit::Pretrained;
  cfg.iterations = 200;
  cfg.early_stop_rel = 0.5;
  const auto e = fine_edit(p, *fid, cfg);
  CHECK(e.iterations_run < 200);

  const auto one = build_unet<float>(tiny_2d(2, 1), 3);
  CHECK_THROWS_AS(fine_edit(one, *fid, cfg), ShapeError);
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(fine_edit(p, *fid, cfg), ConfigError);
  CHECK_THROWS_AS(parse_fine_init("warm"), ConfigError);
  CHECK(parse_fine_init("random") == FineInit::Random);
}

TEST_CASE("weight change report arithmetic")
{
  const auto p = build_unet<float>(tiny_2d(1, 1), 8);
  for (const auto &l : weight_change_report(p, p).layers) {
    CHECK(l.median_rel_change == 0.0);
  }
  auto twice = p;
  for (auto &l : twice.layers) {
    for (auto &v : l.weight.data()) {
      v *= 2.0f;
    }
  }
  const auto r = weight_change_report(p, twice);
  REQUIRE(r.layers.size() == p.layers.size());
  for (std::size_t i = 0; i < r.layers.size(); ++i) {
    CHECK(r.layers[i].layer_id == p.layers[i].id);
    CHECK(r.layers[i].median_rel_change == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.layers[i].norm_after == doctest::Approx(2.0 * r.layers[i].norm_before));
  }
  const auto other = build_unet<float>(tiny_2d(1, 2), 8);
  CHECK_THROWS_AS(weight_change_report(p, other), ShapeError);

  const auto dir = std::filesystem::temp_directory_path() / "fine_weight_report_test";
  std::filesystem::create_directories(dir);
  write_weight_report(r, dir / "w.csv");
  std::ifstream in(dir / "w.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("layer_index,layer_id,median_rel_change", 0) == 0);
  std::filesystem::remove_all(dir);
}
