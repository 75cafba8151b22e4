#include <iostream>

#include <CLI11.hpp>

#include "fine/harness/commands.hpp"

namespace {

fine::ExperimentConfig load(const std::string &path, const std::string &output)
{
  auto cfg = fine::load_config(path);
  fine::apply_seed_override(cfg);
  if (!output.empty()) {
    cfg.output_dir = output;
  }
  return cfg;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Fidelity-imposed network edit experiments on synthetic phantoms.\n"
               "Exit codes: 0 success, 1 usage/config/io error, 2 numerical failure.\n"
               "FINE_SEED overrides the config seed."};
  app.require_subcommand(1);
  std::string config, output, method, case_id, before, after, report;
  bool force = false;
  int jobs = 1;

  auto add_common = [&](CLI::App *sub) {
    sub->add_option("-c,--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", output, "override the config's output_dir");
  };

  auto *phantom = app.add_subcommand("phantom", "generate the train/test/ood phantom dataset");
  add_common(phantom);
  phantom->add_flag("--force", force, "overwrite an existing dataset");

  auto *train = app.add_subcommand("train", "pretrain the prior network on the training split");
  add_common(train);

  auto *recon = app.add_subcommand("recon", "reconstruct one case with one method");
  add_common(recon);
  recon->add_option("-m,--method", method, "dl, dll2, fine, tv, medi or dip")->required();
  recon->add_option("--case", case_id, "case id from the dataset manifest")->required();

  auto *metrics = app.add_subcommand("metrics", "score every reconstruction under output_dir/recon");
  add_common(metrics);

  auto *compare = app.add_subcommand("compare", "run all methods and sweeps, write summary tables");
  add_common(compare);
  compare->add_option("-j,--jobs", jobs, "cases reconstructed in parallel")->check(CLI::PositiveNumber);

  auto *weights = app.add_subcommand("weights-report", "per-layer relative weight change between checkpoints");
  weights->add_option("--before", before, "checkpoint directory")->required();
  weights->add_option("--after", after, "checkpoint directory")->required();
  weights->add_option("--out", report, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*phantom) {
      return fine::cmd_phantom(load(config, output), force);
    }
    if (*train) {
      return fine::cmd_train(load(config, output));
    }
    if (*recon) {
      return fine::cmd_recon(load(config, output), fine::parse_method(method), case_id);
    }
    if (*metrics) {
      return fine::cmd_metrics(load(config, output));
    }
    if (*compare) {
      return fine::cmd_compare(load(config, output), jobs);
    }
    if (*weights) {
      return fine::cmd_weights_report(before, after, report);
    }
  } catch (const fine::NumericalError &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
