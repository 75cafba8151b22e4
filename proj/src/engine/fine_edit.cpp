#include "fine/engine/fine_edit.hpp"

#include <cmath>
#include <fstream>

namespace fine {

FineInit parse_fine_init(const std::string &s)
{
  if (s == "pretrained") {
    return FineInit::Pretrained;
  }
  if (s == "random") {
    return FineInit::Random;
  }
  throw ConfigError("fine init must be pretrained or random, got '" + s + "'");
}

const char *fine_init_name(FineInit i)
{
  return i == FineInit::Pretrained ? "pretrained" : "random";
}

void FineConfig::validate() const
{
  if (iterations < 0) {
    throw ConfigError("fine: iterations must be nonnegative");
  }
  if (!(learning_rate > 0.0)) {
    throw ConfigError("fine: learning_rate must be positive");
  }
  if (log_every < 1) {
    throw ConfigError("fine: log_every must be at least 1");
  }
  if (early_stop_rel && !(*early_stop_rel > 0.0)) {
    throw ConfigError("fine: early_stop_rel must be positive");
  }
}

template <typename T>
Tensor<T> dl_reconstruct(const NetworkParams<T> &params, const Tensor<T> &input)
{
  return predict(params, input);
}

template <typename T>
FineResult<T> fine_edit(const NetworkParams<T> &params0, const Fidelity<T> &fidelity, const FineConfig &cfg)
{
  cfg.validate();
  const Tensor<T> input = fidelity.network_input();
  if (static_cast<std::size_t>(params0.arch.out_channels) != fidelity.output_channels()) {
    throw ShapeError("fine: network has " + std::to_string(params0.arch.out_channels) +
                     " output channels, the operator needs " + std::to_string(fidelity.output_channels()));
  }
  const NetworkParams<T> start =
      cfg.init == FineInit::Pretrained ? params0 : build_unet<T>(params0.arch, cfg.seed);
  NetworkParams<T> theta = start;
  auto opt = make_optimizer(cfg.optimizer, cfg.learning_rate, theta);

  FineResult<T> res;
  double best = std::numeric_limits<double>::infinity();
  double prev = 0.0;
  for (int it = 0;; ++it) {
    auto fr = forward(theta, input);
    auto lv = fidelity.evaluate(fr.output);
    if (!std::isfinite(lv.value)) {
      throw NumericalError("fine: non-finite fidelity loss at iteration " + std::to_string(it));
    }
    if (it == 0) {
      res.initial_loss = lv.value;
    }
    if (it % cfg.log_every == 0 || it == cfg.iterations) {
      res.trace.push_back({it, lv.value});
    }
    const bool last = it == cfg.iterations;
    const bool keep = cfg.return_best ? lv.value < best : last;
    if (lv.value < best) {
      best = lv.value;
    }
    bool stop = last;
    if (!stop && cfg.early_stop_rel && it > 0 && std::abs(prev - lv.value) <= *cfg.early_stop_rel * std::abs(prev)) {
      stop = true;
    }
    if (keep || (stop && !cfg.return_best)) {
      res.params = theta;
      res.output = fr.output;
      res.final_loss = lv.value;
      res.returned_iteration = it;
    }
    if (stop) {
      res.iterations_run = it;
      if (res.trace.back().iteration != it) {
        res.trace.push_back({it, lv.value});
      }
      break;
    }
    prev = lv.value;
    const auto grads = backward(theta, fr.tape, lv.grad);
    theta = optimizer_step(opt, theta, grads);
  }
  res.report = weight_change_report(start, res.params);
  return res;
}

void write_loss_trace(const std::vector<FineTracePoint> &trace, const std::filesystem::path &path)
{
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write loss trace " + path.string());
  }
  out.precision(10);
  out << "iter,fidelity\n";
  for (const auto &p : trace) {
    out << p.iteration << ',' << p.fidelity << '\n';
  }
}

template Tensor<float> dl_reconstruct<float>(const NetworkParams<float> &, const Tensor<float> &);
template Tensor<double> dl_reconstruct<double>(const NetworkParams<double> &, const Tensor<double> &);
template FineResult<float> fine_edit<float>(const NetworkParams<float> &, const Fidelity<float> &,
                                            const FineConfig &);
template FineResult<double> fine_edit<double>(const NetworkParams<double> &, const Fidelity<double> &,
                                              const FineConfig &);

} // namespace fine
