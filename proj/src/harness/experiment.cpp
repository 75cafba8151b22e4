#include "fine/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "fine/core/rng.hpp"
#include "fine/core/tensor_ops.hpp"
#include "fine/physics/operators.hpp"

namespace fine {

const char *split_name(Split s)
{
  switch (s) {
  case Split::Train:
    return "train";
  case Split::Test:
    return "test";
  case Split::Ood:
    return "ood";
  }
  return "?";
}

std::vector<PhantomCase> Dataset::phantoms(Split s, std::size_t limit) const
{
  std::vector<PhantomCase> out;
  for (const auto &c : cases) {
    if (c.split == s && out.size() < limit) {
      out.push_back(c.phantom);
    }
  }
  return out;
}

std::vector<const DatasetCase *> Dataset::evaluation_cases() const
{
  std::vector<const DatasetCase *> out;
  for (const auto &c : cases) {
    if (c.split != Split::Train) {
      out.push_back(&c);
    }
  }
  std::sort(out.begin(), out.end(), [](const auto *a, const auto *b) { return a->id < b->id; });
  return out;
}

namespace {

std::string case_id(Split s, int i)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03d", split_name(s), i);
  return buf;
}

PhantomCase generate(const ExperimentConfig &cfg, std::uint64_t seed)
{
  const auto &d = cfg.dataset;
  if (cfg.application == PhantomKind::Qsm) {
    QsmPhantomSpec spec;
    spec.noise_sigma = d.noise_sigma;
    return generate_qsm_phantom(d.grid, spec, seed);
  }
  T2wPhantomSpec spec;
  spec.complex_valued = d.complex_valued;
  spec.noise_sigma = d.noise_sigma;
  spec.acceleration = d.acceleration;
  spec.center_fraction = d.center_fraction;
  spec.mask_seed = derive_seed(cfg.seed, 7);
  return generate_t2w_phantom(d.grid, spec, seed);
}

Shape network_shape(const Tensor<float> &image)
{
  Shape s{1};
  s.insert(s.end(), image.shape().begin(), image.shape().end());
  return s;
}

Tensor<float> support_of(const PhantomCase &c)
{
  Tensor<float> m(c.magnitude.shape());
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = c.magnitude[i] > 0.0f ? 1.0f : 0.0f;
  }
  return m;
}

} // namespace

Dataset build_dataset(const ExperimentConfig &cfg)
{
  cfg.validate();
  Dataset data;
  const auto &d = cfg.dataset;
  for (int i = 0; i < d.train_count; ++i) {
    data.cases.push_back({case_id(Split::Train, i), Split::Train, generate(cfg, derive_seed(cfg.seed, 1000 + i))});
  }
  for (int i = 0; i < d.test_count; ++i) {
    data.cases.push_back({case_id(Split::Test, i), Split::Test, generate(cfg, derive_seed(cfg.seed, 2000 + i))});
  }
  for (int i = 0; i < d.ood_count; ++i) {
    const std::uint64_t seed = derive_seed(cfg.seed, 3000 + i);
    PhantomCase c = generate(cfg, seed);
    for (int k = 0; k < d.lesion.count; ++k) {
      Rng rng(derive_seed(seed, 500 + k));
      const double v = d.lesion.value_min == d.lesion.value_max
                           ? d.lesion.value_min
                           : uniform(rng, d.lesion.value_min, d.lesion.value_max);
      c = inject_lesion(c, d.lesion.kind, v, d.lesion.radius);
    }
    data.cases.push_back({case_id(Split::Ood, i), Split::Ood, std::move(c)});
  }
  return data;
}

std::vector<TrainingPair> training_pairs(const ExperimentConfig &cfg, const Dataset &data, std::size_t train_limit)
{
  const auto cases = data.phantoms(Split::Train, train_limit);
  if (cfg.application == PhantomKind::Qsm) {
    return qsm_training_pairs(cases, cfg.patch_shape, cfg.patch_stride, cfg.rotations, cfg.qsm_scale);
  }
  return undersampled_training_pairs(cases);
}

TrainResult train_prior(const ExperimentConfig &cfg, const Dataset &data, std::size_t train_limit)
{
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, 11);
  return pretrain(training_pairs(cfg, data, train_limit), cfg.arch, tc);
}

Reconstruction reconstruct(const ExperimentConfig &cfg, Method method, const PhantomCase &c,
                           const NetworkParams<float> *prior, const FineConfig *fine_override)
{
  Reconstruction r;
  r.method = method;
  const bool qsm = c.kind == PhantomKind::Qsm;
  Tensor<float> qsm_weight;
  if (qsm) {
    qsm_weight = build_noise_weight<float>(cfg.weight, c.field.shape(), &c.magnitude).weights;
  }
  const bool weighted = qsm && cfg.weight != NoiseWeightMode::Identity;
  const auto fid = make_fidelity<float>(c, cfg.qsm_scale, weighted ? &qsm_weight : nullptr);
  const bool needs_prior = method == Method::Dl || method == Method::Dll2 || method == Method::Fine;
  if (needs_prior && !prior) {
    throw ConfigError(std::string("method ") + method_name(method) + " needs a pretrained checkpoint");
  }

  switch (method) {
  case Method::Dl: {
    r.image = fid->image(dl_reconstruct(*prior, fid->network_input()));
    break;
  }
  case Method::Fine:
  case Method::Dip: {
    FineConfig fc = fine_override ? *fine_override : cfg.fine;
    NetworkParams<float> start;
    if (method == Method::Dip) {
      fc.init = FineInit::Random;
      fc.seed = derive_seed(c.seed, 13);
      start = prior ? *prior : build_unet<float>(cfg.arch, fc.seed);
    } else {
      fc.init = FineInit::Pretrained;
      start = *prior;
    }
    auto res = fine_edit(start, *fid, fc);
    r.image = fid->image(res.output);
    r.trace = std::move(res.trace);
    r.weights = std::move(res.report);
    r.edited = std::move(res.params);
    r.initial_fidelity = res.initial_loss;
    r.final_fidelity = res.final_loss;
    break;
  }
  case Method::Dll2: {
    const Tensor<float> out = dl_reconstruct(*prior, fid->network_input());
    if (qsm) {
      const auto kernel = make_dipole_kernel<float>(c.field.shape(), c.voxel_size, c.b0_axis);
      const Tensor<float> dl = fid->image(out);
      const auto res = dll2_reconstruct<float>(c.field, qsm_operator(kernel), dl, cfg.solver,
                                               weighted ? &qsm_weight : nullptr);
      r.image = res.x;
      r.cg_iterations = res.cg_iterations;
      r.cg_residual = res.relative_residual;
    } else {
      const auto &uf = dynamic_cast<const UndersampledFidelity<float> &>(*fid);
      const auto res = dll2_reconstruct<cfloat>(c.kspace, undersampled_operator<float>(c.mask),
                                                uf.complex_image(out), cfg.solver);
      r.image = display_image(res.x, c.complex_valued());
      r.cg_iterations = res.cg_iterations;
      r.cg_residual = res.relative_residual;
    }
    break;
  }
  case Method::Tv: {
    if (qsm) {
      const auto kernel = make_dipole_kernel<float>(c.field.shape(), c.voxel_size, c.b0_axis);
      auto res = weighted_tv_reconstruct<float>(c.field, qsm_operator(kernel), weighted ? &qsm_weight : nullptr,
                                                no_edges(c.field.shape()), cfg.solver);
      r.image = std::move(res.x);
      r.solver_log = std::move(res.log);
    } else {
      auto res = tv_reconstruct<cfloat>(c.kspace, undersampled_operator<float>(c.mask), cfg.solver);
      r.image = display_image(res.x, c.complex_valued());
      r.solver_log = std::move(res.log);
    }
    break;
  }
  case Method::Medi: {
    if (!qsm) {
      throw ConfigError("method medi needs a qsm case");
    }
    const auto kernel = make_dipole_kernel<float>(c.field.shape(), c.voxel_size, c.b0_axis);
    Tensor<float> w = qsm_weight;
    auto res = medi_reconstruct<float>(c.field, kernel, w, c.magnitude, cfg.solver);
    r.image = std::move(res.x);
    r.solver_log = std::move(res.log);
    break;
  }
  }
  if (qsm && method != Method::Fine && method != Method::Dip) {
    const Tensor<float> as_output = (static_cast<float>(cfg.qsm_scale) * r.image).reshaped(network_shape(r.image));
    r.initial_fidelity = r.final_fidelity = fid->evaluate(as_output).value;
  }
  return r;
}

MetricReport evaluate(const ExperimentConfig &cfg, const std::string &case_id, const std::string &method_id,
                      const PhantomCase &c, const Tensor<float> &image)
{
  MetricReport m;
  m.case_id = case_id;
  m.method_id = method_id;
  Tensor<float> support;
  if (cfg.support_mask) {
    support = support_of(c);
  }
  const Tensor<float> *mask = cfg.support_mask ? &support : nullptr;
  m.psnr_db = psnr(image, c.truth, cfg.max_val, mask);
  SsimParams sp;
  sp.dynamic_range = cfg.max_val;
  m.ssim = ssim(image, c.truth, sp, mask);
  m.blur = blur_score_volume(image);
  for (std::size_t k = 0; k < c.lesions.size(); ++k) {
    m.lesion_stats.push_back(region_stats(image, lesion_mask(c.truth.shape(), c.lesions[k]), "lesion" + std::to_string(k)));
  }
  return m;
}

bool SuiteResult::complete() const
{
  for (const auto &c : cases) {
    for (const auto &id : method_ids) {
      auto it = c.methods.find(id);
      if (it == c.methods.end() || !it->second.report) {
        return false;
      }
    }
  }
  return true;
}

std::vector<SuiteColumn> default_columns(const ExperimentConfig &cfg)
{
  std::vector<SuiteColumn> cols;
  for (Method m : cfg.methods) {
    cols.push_back({method_name(m), m, std::nullopt});
  }
  return cols;
}

SuiteResult run_suite(const ExperimentConfig &cfg, const Dataset &data, const NetworkParams<float> &prior,
                      const std::vector<SuiteColumn> &columns, int jobs)
{
  SuiteResult res;
  for (const auto &col : columns) {
    res.method_ids.push_back(col.id);
  }
  const auto cases = data.evaluation_cases();
  res.cases.resize(cases.size());

  auto run_case = [&](std::size_t i) {
    const DatasetCase &dc = *cases[i];
    CaseOutcome &out = res.cases[i];
    out.case_id = dc.id;
    out.split = dc.split;
    for (const auto &l : dc.phantom.lesions) {
      out.truth_lesion_means.push_back(
          region_stats(dc.phantom.truth, lesion_mask(dc.phantom.truth.shape(), l), "truth").mean);
    }
    for (const auto &col : columns) {
      MethodOutcome mo;
      try {
        const auto r = reconstruct(cfg, col.method, dc.phantom, &prior, col.fine ? &*col.fine : nullptr);
        mo.report = evaluate(cfg, dc.id, col.id, dc.phantom, r.image);
        mo.initial_fidelity = r.initial_fidelity;
        mo.final_fidelity = r.final_fidelity;
        mo.weights = r.weights;
      } catch (const Error &e) {
        mo.error = e.what();
      }
      out.methods[col.id] = std::move(mo);
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), cases.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < cases.size(); ++i) {
      run_case(i);
    }
    return res;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < cases.size(); i = next++) {
        try {
          run_case(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) {
            failure = std::current_exception();
          }
        }
      }
    });
  }
  for (auto &t : pool) {
    t.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
  return res;
}

std::vector<WinRate> win_rates(const SuiteResult &r, const std::string &subject)
{
  std::vector<WinRate> out;
  for (const auto &other : r.method_ids) {
    if (other == subject) {
      continue;
    }
    WinRate psnr_win{subject + ">" + other + ":psnr"};
    WinRate lesion_win{subject + ">" + other + ":lesion"};
    for (const auto &c : r.cases) {
      const auto a = c.methods.find(subject), b = c.methods.find(other);
      if (a == c.methods.end() || b == c.methods.end() || !a->second.report || !b->second.report) {
        continue;
      }
      ++psnr_win.total;
      psnr_win.wins += a->second.report->psnr_db > b->second.report->psnr_db;
      for (std::size_t k = 0; k < c.truth_lesion_means.size(); ++k) {
        const double t = c.truth_lesion_means[k];
        ++lesion_win.total;
        lesion_win.wins += std::abs(a->second.report->lesion_stats[k].mean - t) <
                           std::abs(b->second.report->lesion_stats[k].mean - t);
      }
    }
    out.push_back(psnr_win);
    if (lesion_win.total > 0) {
      out.push_back(lesion_win);
    }
  }
  return out;
}

double mean_psnr(const SuiteResult &r, const std::string &method_id)
{
  double s = 0.0;
  int n = 0;
  for (const auto &c : r.cases) {
    const auto it = c.methods.find(method_id);
    if (it != c.methods.end() && it->second.report) {
      s += it->second.report->psnr_db;
      ++n;
    }
  }
  if (n == 0) {
    throw ConfigError("no results for method " + method_id);
  }
  return s / n;
}

} // namespace fine
