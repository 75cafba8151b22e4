#include "fine/engine/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fine/core/rng.hpp"
#include "fine/core/tensor_ops.hpp"
#include "fine/engine/fidelity.hpp"
#include "fine/phantom/patches.hpp"

namespace fine {

void TrainConfig::validate() const
{
  if (epochs < 0) {
    throw ConfigError("train: epochs must be nonnegative");
  }
  if (batch_size < 1) {
    throw ConfigError("train: batch_size must be at least 1");
  }
  if (!(learning_rate > 0.0)) {
    throw ConfigError("train: learning_rate must be positive");
  }
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("train: validation_fraction must lie in [0, 1)");
  }
}

namespace {

struct LossContext
{
  LossKind kind;
  LossAux<float> aux;
};

double mean_loss(const NetworkParams<float> &p, const std::vector<TrainingPair> &data,
                 const std::vector<std::size_t> &ids, const LossContext &ctx)
{
  if (ids.empty()) {
    return 0.0;
  }
  double acc = 0.0;
  for (std::size_t id : ids) {
    acc += compute_loss(ctx.kind, predict(p, data[id].input), data[id].target, ctx.aux).value;
  }
  return acc / static_cast<double>(ids.size());
}

} // namespace

TrainResult pretrain(const std::vector<TrainingPair> &data, const UNetConfig &arch, const TrainConfig &cfg)
{
  cfg.validate();
  arch.validate();
  if (data.empty()) {
    throw ConfigError("train: empty dataset");
  }
  TrainResult res;
  res.params = build_unet<float>(arch, derive_seed(cfg.seed, 0));

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(cfg.seed, 1));
  std::shuffle(order.begin(), order.end(), split_rng);
  std::size_t n_val = static_cast<std::size_t>(std::round(cfg.validation_fraction * static_cast<double>(data.size())));
  n_val = std::min(n_val, data.size() - 1);
  res.validation_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  res.train_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(res.validation_ids.begin(), res.validation_ids.end());
  std::sort(res.train_ids.begin(), res.train_ids.end());

  LossContext ctx{cfg.loss, {nullptr, cfg.composite}};
  DipoleKernel<float> kernel;
  if (cfg.loss == LossKind::QsmComposite) {
    const Shape &t = data.front().target.shape();
    kernel = make_dipole_kernel<float>(Shape(t.begin() + 1, t.end()));
    ctx.aux.kernel = &kernel;
  }

  res.train_loss.push_back(mean_loss(res.params, data, res.train_ids, ctx));
  res.validation_loss.push_back(mean_loss(res.params, data, res.validation_ids, ctx));
  auto opt = make_optimizer(cfg.optimizer, cfg.learning_rate, res.params);
  Rng shuffle_rng(derive_seed(cfg.seed, 2));
  std::vector<std::size_t> ids = res.train_ids;
  long batch_id = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(ids.begin(), ids.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < ids.size(); start += static_cast<std::size_t>(cfg.batch_size), ++batch_id) {
      const std::size_t stop = std::min(ids.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double inv = 1.0 / static_cast<double>(stop - start);
      Gradients<float> total = zeros_like(res.params);
      double batch_loss = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const TrainingPair &pair = data[ids[b]];
        auto fr = forward(res.params, pair.input);
        auto lv = compute_loss(ctx.kind, fr.output, pair.target, ctx.aux);
        if (!std::isfinite(lv.value)) {
          throw NumericalError("train: non-finite loss in batch " + std::to_string(batch_id) + " (epoch " +
                               std::to_string(epoch) + ")");
        }
        batch_loss += lv.value;
        const auto g = backward(res.params, fr.tape, lv.grad);
        for (std::size_t l = 0; l < total.layers.size(); ++l) {
          axpy(inv, g.layers[l].weight, total.layers[l].weight);
          axpy(inv, g.layers[l].bias, total.layers[l].bias);
        }
      }
      epoch_loss += batch_loss;
      res.params = optimizer_step(opt, res.params, total);
      ++res.steps;
    }
    res.train_loss.push_back(epoch_loss / static_cast<double>(ids.size()));
    res.validation_loss.push_back(mean_loss(res.params, data, res.validation_ids, ctx));
  }
  return res;
}

std::vector<TrainingPair> qsm_training_pairs(const std::vector<PhantomCase> &cases, const Shape &patch_shape,
                                             const Shape &stride, const std::vector<double> &rotations,
                                             double scale)
{
  std::vector<TrainingPair> out;
  Shape net_shape{1};
  net_shape.insert(net_shape.end(), patch_shape.begin(), patch_shape.end());
  const auto s = static_cast<float>(scale);
  for (const auto &c : cases) {
    if (c.kind != PhantomKind::Qsm) {
      throw ConfigError("qsm_training_pairs: case is not a qsm phantom");
    }
    const auto fields = extract_patches(c.field, patch_shape, stride);
    const auto chis = extract_patches(c.truth, patch_shape, stride);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      out.push_back({(s * fields[i]).reshaped(net_shape), (s * chis[i]).reshaped(net_shape)});
      for (double angle : rotations) {
        // The dipole kernel is symmetric about the field axis, so rotating both
        // maps in-plane keeps them consistent.
        out.push_back({(s * augment_rotate(fields[i], angle)).reshaped(net_shape),
                       (s * augment_rotate(chis[i], angle)).reshaped(net_shape)});
      }
    }
  }
  return out;
}

std::vector<TrainingPair> undersampled_training_pairs(const std::vector<PhantomCase> &cases)
{
  std::vector<TrainingPair> out;
  for (const auto &c : cases) {
    if (c.kind != PhantomKind::Undersampled) {
      throw ConfigError("undersampled_training_pairs: case is not an undersampled phantom");
    }
    const auto fid = make_fidelity<float>(c);
    Tensor<float> target;
    if (c.complex_valued()) {
      target = complex_to_channels(c.truth_image());
    } else {
      Shape s{1};
      s.insert(s.end(), c.truth.shape().begin(), c.truth.shape().end());
      target = c.truth.reshaped(s);
    }
    out.push_back({fid->network_input(), std::move(target)});
  }
  return out;
}

} // namespace fine
