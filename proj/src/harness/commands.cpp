#include "fine/harness/commands.hpp"

#include <fstream>
#include <iostream>

#include "fine/core/image_export.hpp"
#include "fine/core/tensor_io.hpp"
#include "fine/net/checkpoint.hpp"
#include "fine/phantom/dataset_io.hpp"

namespace fine {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const fs::path &path, const json &j)
{
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << j.dump(2) << '\n';
}

json read_json(const fs::path &path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot read " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::exception &e) {
    throw IoError(path.string() + " is not valid JSON: " + e.what());
  }
}

json sidecar(const ExperimentConfig &cfg, const std::string &command)
{
  return {{"config_hash", hash_hex(config_hash(cfg))}, {"seed", cfg.seed}, {"command", command}};
}

// Adds artifacts (paths relative to output_dir) to MANIFEST.json.
void record(const ExperimentConfig &cfg, const std::string &command, const std::vector<fs::path> &paths)
{
  const fs::path mpath = cfg.output_dir / "MANIFEST.json";
  json m = fs::exists(mpath) ? read_json(mpath) : json::object();
  m["config_hash"] = hash_hex(config_hash(cfg));
  m["seed"] = cfg.seed;
  if (!m.contains("artifacts")) {
    m["artifacts"] = json::object();
  }
  for (const auto &p : paths) {
    m["artifacts"][fs::relative(p, cfg.output_dir).generic_string()] = {{"command", command}};
  }
  write_json(mpath, m);
}

Window preview_window(PhantomKind app)
{
  return app == PhantomKind::Qsm ? Window{-0.5, 0.5} : Window{0.0, 1.0};
}

fs::path checkpoint_dir(const ExperimentConfig &cfg)
{
  return cfg.output_dir / "checkpoint";
}

NetworkParams<float> load_prior(const ExperimentConfig &cfg)
{
  const fs::path dir = checkpoint_dir(cfg);
  if (!fs::exists(dir / "manifest.json")) {
    throw IoError("no checkpoint at " + dir.string() + "; run `train` first");
  }
  auto p = load_checkpoint<float>(dir);
  if (!(p.arch == cfg.arch)) {
    throw ConfigError("checkpoint architecture does not match the config");
  }
  return p;
}

void write_train_curves(const TrainResult &r, const fs::path &path)
{
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << "epoch,train_loss,validation_loss\n";
  for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
    out << e << ',' << format_number(r.train_loss[e]) << ',' << format_number(r.validation_loss[e]) << '\n';
  }
}

void write_solver_summary(const Reconstruction &r, const fs::path &path)
{
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << "cg_iterations,relative_residual\n" << r.cg_iterations << ',' << format_number(r.cg_residual) << '\n';
}

std::string method_list(const std::vector<std::string> &ids)
{
  std::string s;
  for (const auto &id : ids) {
    s += (s.empty() ? "" : ";") + id;
  }
  return s;
}

} // namespace

Tensor<float> preview_slice(const Tensor<float> &image)
{
  if (image.rank() == 2) {
    return image;
  }
  if (image.rank() != 3) {
    throw ShapeError("preview needs a 2D or 3D image");
  }
  const std::size_t a = image.extent(0), b = image.extent(1), k = image.extent(2) / 2;
  Tensor<float> s({a, b});
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      s.at(i, j) = image.at(i, j, k);
    }
  }
  return s;
}

void save_dataset(const ExperimentConfig &cfg, const Dataset &data)
{
  const fs::path dir = cfg.output_dir / "dataset";
  fs::create_directories(dir);
  json cases = json::array();
  for (const auto &c : data.cases) {
    save_case(c.phantom, dir / c.id);
    cases.push_back({{"id", c.id}, {"split", split_name(c.split)}, {"ood", c.split == Split::Ood},
                     {"seed", c.phantom.seed}, {"lesions", c.phantom.lesions.size()}});
  }
  json m = sidecar(cfg, "phantom");
  m["application"] = phantom_kind_name(cfg.application);
  m["cases"] = cases;
  write_json(dir / "manifest.json", m);
}

Dataset load_dataset(const fs::path &output_dir)
{
  const fs::path dir = output_dir / "dataset";
  if (!fs::exists(dir / "manifest.json")) {
    throw IoError("no dataset at " + dir.string() + "; run `phantom` first");
  }
  const json m = read_json(dir / "manifest.json");
  Dataset data;
  for (const auto &e : m.at("cases")) {
    DatasetCase c;
    c.id = e.at("id").get<std::string>();
    const std::string split = e.at("split").get<std::string>();
    c.split = split == "train" ? Split::Train : split == "test" ? Split::Test : Split::Ood;
    c.phantom = load_case(dir / c.id);
    data.cases.push_back(std::move(c));
  }
  return data;
}

int cmd_phantom(const ExperimentConfig &cfg, bool force)
{
  const fs::path dir = cfg.output_dir / "dataset";
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) {
      throw ConfigError(dir.string() + " is not empty; pass --force to overwrite");
    }
    fs::remove_all(dir);
  }
  const Dataset data = build_dataset(cfg);
  save_dataset(cfg, data);
  record(cfg, "phantom", {dir / "manifest.json"});
  std::cout << "wrote " << data.cases.size() << " cases to " << dir.string() << '\n';
  return 0;
}

int cmd_train(const ExperimentConfig &cfg)
{
  const Dataset data = load_dataset(cfg.output_dir);
  const TrainResult r = train_prior(cfg, data);
  const fs::path dir = checkpoint_dir(cfg);
  fs::remove_all(dir);
  save_checkpoint(r.params, dir, {optimizer_kind_name(cfg.train.optimizer), r.steps});
  write_train_curves(r, cfg.output_dir / "train_loss.csv");
  json side = sidecar(cfg, "train");
  side["fingerprint"] = hash_hex(r.params.fingerprint());
  side["train_patches"] = r.train_ids.size();
  side["validation_patches"] = r.validation_ids.size();
  write_json(cfg.output_dir / "train.json", side);
  record(cfg, "train", {dir / "manifest.json", cfg.output_dir / "train_loss.csv", cfg.output_dir / "train.json"});
  std::cout << "trained " << r.steps << " steps, loss " << format_number(r.train_loss.front()) << " -> "
            << format_number(r.train_loss.back()) << '\n';
  return 0;
}

int cmd_recon(const ExperimentConfig &cfg, Method method, const std::string &case_id)
{
  const fs::path case_dir = cfg.output_dir / "dataset" / case_id;
  if (!fs::exists(case_dir / "case.json")) {
    throw IoError("no case '" + case_id + "' under " + (cfg.output_dir / "dataset").string());
  }
  const PhantomCase c = load_case(case_dir);
  std::optional<NetworkParams<float>> prior;
  if (method != Method::Tv && method != Method::Medi) {
    if (method == Method::Dip && !fs::exists(checkpoint_dir(cfg) / "manifest.json")) {
      prior = build_unet<float>(cfg.arch, 0);
    } else {
      prior = load_prior(cfg);
    }
  }
  const Reconstruction r = reconstruct(cfg, method, c, prior ? &*prior : nullptr);
  const fs::path dir = cfg.output_dir / "recon" / method_name(method) / case_id;
  fs::create_directories(dir);
  std::vector<fs::path> written{dir / "recon.fnt", dir / "preview.pgm", dir / "sidecar.json"};
  save_tensor(r.image, dir / "recon.fnt");
  export_image(preview_slice(r.image), dir / "preview.pgm", preview_window(cfg.application));
  if (method == Method::Fine || method == Method::Dip) {
    write_loss_trace(r.trace, dir / "trace.csv");
    write_weight_report(*r.weights, dir / "weights.csv");
    fs::remove_all(dir / "checkpoint");
    save_checkpoint(*r.edited, dir / "checkpoint", {optimizer_kind_name(cfg.fine.optimizer), cfg.fine.iterations});
    written.insert(written.end(), {dir / "trace.csv", dir / "weights.csv", dir / "checkpoint" / "manifest.json"});
  } else if (method == Method::Tv || method == Method::Medi) {
    write_solver_log(dir / "trace.csv", r.solver_log);
    written.push_back(dir / "trace.csv");
  } else if (method == Method::Dll2) {
    write_solver_summary(r, dir / "trace.csv");
    written.push_back(dir / "trace.csv");
  }
  json side = sidecar(cfg, "recon");
  side["method"] = method_name(method);
  side["case"] = case_id;
  side["initial_fidelity"] = r.initial_fidelity;
  side["final_fidelity"] = r.final_fidelity;
  write_json(dir / "sidecar.json", side);
  record(cfg, "recon", written);
  std::cout << method_name(method) << " " << case_id << " -> " << (dir / "recon.fnt").string() << '\n';
  return 0;
}

int cmd_metrics(const ExperimentConfig &cfg)
{
  const fs::path root = cfg.output_dir / "recon";
  std::vector<std::pair<std::string, std::string>> found; // (case, method)
  if (fs::exists(root)) {
    for (const auto &m : fs::directory_iterator(root)) {
      for (const auto &c : fs::directory_iterator(m.path())) {
        if (fs::exists(c.path() / "recon.fnt")) {
          found.emplace_back(c.path().filename().string(), m.path().filename().string());
        }
      }
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<MetricReport> reports;
  for (const auto &[case_id, method] : found) {
    const PhantomCase c = load_case(cfg.output_dir / "dataset" / case_id);
    const auto image = load_tensor_as<float>(root / method / case_id / "recon.fnt");
    reports.push_back(evaluate(cfg, case_id, method, c, image));
  }
  write_metric_reports(reports, cfg.output_dir / "metrics.csv");
  record(cfg, "metrics", {cfg.output_dir / "metrics.csv"});
  std::cout << "evaluated " << reports.size() << " reconstructions\n";
  return 0;
}

int cmd_compare(const ExperimentConfig &cfg, int jobs)
{
  if (!fs::exists(cfg.output_dir / "dataset" / "manifest.json")) {
    cmd_phantom(cfg, false);
  }
  if (!fs::exists(checkpoint_dir(cfg) / "manifest.json")) {
    cmd_train(cfg);
  }
  const Dataset data = load_dataset(cfg.output_dir);
  const NetworkParams<float> prior = load_prior(cfg);
  const fs::path dir = cfg.output_dir / "compare";
  fs::create_directories(dir);
  std::vector<fs::path> written;

  const SuiteResult suite = run_suite(cfg, data, prior, default_columns(cfg), jobs);
  {
    std::ofstream out(dir / "summary.csv");
    out << metric_csv_header() << ",error\n";
    for (const auto &c : suite.cases) {
      for (const auto &id : suite.method_ids) {
        const MethodOutcome &mo = c.methods.at(id);
        if (mo.report) {
          out << metric_csv_row(*mo.report) << ",\n";
        } else {
          out << c.case_id << ',' << id << ",,,,," << '"' << mo.error << '"' << '\n';
        }
      }
    }
    written.push_back(dir / "summary.csv");
  }
  {
    std::ofstream out(dir / "winrate.csv");
    out << "comparison,wins,total\n";
    for (const auto &w : win_rates(suite)) {
      out << w.comparison << ',' << w.wins << ',' << w.total << '\n';
    }
    written.push_back(dir / "winrate.csv");
  }
  {
    std::ofstream out(dir / "fidelity.csv");
    out << "case_id,method,initial_fidelity,final_fidelity\n";
    for (const auto &c : suite.cases) {
      for (const auto &id : suite.method_ids) {
        const MethodOutcome &mo = c.methods.at(id);
        if (mo.report) {
          out << c.case_id << ',' << id << ',' << format_number(mo.initial_fidelity) << ','
              << format_number(mo.final_fidelity) << '\n';
        }
      }
    }
    written.push_back(dir / "fidelity.csv");
  }
  {
    // Lesion means of every method regressed on the true lesion means.
    std::ofstream out(dir / "regression.csv");
    out << "reference,method,slope,intercept,r2,n\n";
    for (const auto &id : suite.method_ids) {
      std::vector<double> ref, val;
      for (const auto &c : suite.cases) {
        const MethodOutcome &mo = c.methods.at(id);
        if (!mo.report) {
          continue;
        }
        for (std::size_t k = 0; k < c.truth_lesion_means.size(); ++k) {
          ref.push_back(c.truth_lesion_means[k]);
          val.push_back(mo.report->lesion_stats[k].mean);
        }
      }
      if (ref.size() < 2) {
        continue;
      }
      try {
        const auto g = lesion_regression(ref, val);
        out << "truth," << id << ',' << format_number(g.slope) << ',' << format_number(g.intercept) << ','
            << format_number(g.r2) << ',' << ref.size() << '\n';
      } catch (const NumericalError &) {
        out << "truth," << id << ",,,," << ref.size() << '\n';
      }
    }
    written.push_back(dir / "regression.csv");
  }
  if (!cfg.fine_sweep.empty()) {
    std::vector<SuiteColumn> cols;
    for (const auto &s : cfg.fine_sweep) {
      FineConfig fc = cfg.fine;
      fc.optimizer = s.optimizer;
      fc.learning_rate = s.learning_rate;
      cols.push_back({std::string(optimizer_kind_name(s.optimizer)) + "@" + format_number(s.learning_rate),
                      Method::Fine, fc});
    }
    const SuiteResult sweep = run_suite(cfg, data, prior, cols, jobs);
    std::ofstream out(dir / "sweep_fine.csv");
    out << "setting,mean_psnr_db\n";
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto &id : sweep.method_ids) {
      const double m = mean_psnr(sweep, id);
      lo = std::min(lo, m);
      hi = std::max(hi, m);
      out << id << ',' << format_number(m) << '\n';
    }
    out << "spread," << format_number(hi - lo) << '\n';
    written.push_back(dir / "sweep_fine.csv");
  }
  if (!cfg.train_size_sweep.empty()) {
    std::ofstream out(dir / "sweep_train_size.csv");
    out << "train_count,dl_mean_psnr_db,fine_mean_psnr_db\n";
    std::vector<double> dl_means;
    for (int n : cfg.train_size_sweep) {
      const auto r = train_prior(cfg, data, static_cast<std::size_t>(n));
      const SuiteResult s =
          run_suite(cfg, data, r.params, {{"dl", Method::Dl, std::nullopt}, {"fine", Method::Fine, std::nullopt}}, jobs);
      dl_means.push_back(mean_psnr(s, "dl"));
      out << n << ',' << format_number(dl_means.back()) << ',' << format_number(mean_psnr(s, "fine")) << '\n';
    }
    const bool monotone = std::is_sorted(dl_means.begin(), dl_means.end());
    out << "dl_monotone," << (monotone ? "yes" : "no") << ",\n";
    written.push_back(dir / "sweep_train_size.csv");
  }
  record(cfg, "compare", written);
  std::cout << "compared " << suite.cases.size() << " cases x " << suite.method_ids.size() << " methods ("
            << method_list(suite.method_ids) << ")\n";
  if (!suite.complete()) {
    std::cerr << "some reconstructions failed; see the error column of " << (dir / "summary.csv").string() << '\n';
    return 2;
  }
  return 0;
}

int cmd_weights_report(const fs::path &before, const fs::path &after, const fs::path &out)
{
  const auto a = load_checkpoint<float>(before);
  const auto b = load_checkpoint<float>(after);
  write_weight_report(weight_change_report(a, b), out);
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

} // namespace fine
