#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fine/core/rng.hpp"
#include "fine/core/tensor_io.hpp"
#include "fine/harness/commands.hpp"
#include "fine/net/checkpoint.hpp"

using namespace fine;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path &p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string &name)
{
  const fs::path p = fs::temp_directory_path() / ("fine_harness_" + name);
  fs::remove_all(p);
  return p;
}

json tiny_undersampled()
{
  return json::parse(R"({
    "version": 1, "application": "undersampled", "seed": 3,
    "dataset": {"grid": [16, 16], "train_count": 3, "test_count": 0, "ood_count": 2,
                "lesion": {"kind": "ms", "value_min": 0.8, "value_max": 0.9, "radius": 2.0}},
    "arch": {"depth": 1, "base_channels": 4},
    "train": {"epochs": 2, "batch_size": 2},
    "fine": {"iterations": 5},
    "solver": {"max_outer": 3, "max_cg": 20},
    "methods": ["dl", "fine", "tv", "dll2"],
    "evaluation": {"support_mask": false}
  })");
}

ExperimentConfig with_output(json j, const fs::path &out)
{
  j["output_dir"] = out.string();
  return config_from_json(j);
}

int run_cli(const std::string &args)
{
  const std::string cmd = std::string(FINE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("config parsing and validation")
{
  const auto c = config_from_json(tiny_undersampled());
  CHECK(c.application == PhantomKind::Undersampled);
  CHECK(c.arch.in_channels == 2);
  CHECK(c.arch.out_channels == 1);
  CHECK(c.fine.iterations == 5);
  CHECK(c.methods.size() == 4);
  CHECK(config_from_json(config_to_json(c)).methods == c.methods);
  CHECK(config_hash(config_from_json(config_to_json(c))) == config_hash(c));

  auto j = tiny_undersampled();
  j["dataset"]["gird"] = 1;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = tiny_undersampled();
  j["version"] = 2;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = tiny_undersampled();
  j["methods"] = {"medi"};
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = tiny_undersampled();
  j["methods"] = {"magic"};
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = tiny_undersampled();
  j["dataset"]["grid"] = {16, 16, 16};
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = tiny_undersampled();
  j.erase("application");
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
}

TEST_CASE("config hash ignores the output directory only")
{
  auto a = config_from_json(tiny_undersampled());
  auto b = a;
  b.output_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 4;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(hash_hex(0xabcULL) == "0000000000000abc");
}

TEST_CASE("FINE_SEED overrides the seed")
{
  auto c = config_from_json(tiny_undersampled());
  setenv("FINE_SEED", "42", 1);
  apply_seed_override(c);
  CHECK(c.seed == 42);
  setenv("FINE_SEED", "x1", 1);
  CHECK_THROWS_AS(apply_seed_override(c), ConfigError);
  unsetenv("FINE_SEED");
}

TEST_CASE("phantom command manifests and determinism")
{
  auto j = tiny_undersampled();
  j["dataset"]["train_count"] = 0;
  j["dataset"]["ood_count"] = 0;
  const auto empty_dir = scratch("empty");
  CHECK(cmd_phantom(with_output(j, empty_dir), false) == 0);
  CHECK(json::parse(slurp(empty_dir / "dataset" / "manifest.json"))["cases"].empty());

  j = json::parse(R"({"version": 1, "application": "qsm",
    "dataset": {"grid": [16, 16, 16], "train_count": 10, "ood_count": 2,
                "lesion": {"radius": 2.0}}})");
  const auto q = scratch("qsm12");
  cmd_phantom(with_output(j, q), false);
  const auto m = json::parse(slurp(q / "dataset" / "manifest.json"));
  REQUIRE(m["cases"].size() == 12);
  int ood = 0;
  for (const auto &c : m["cases"]) {
    ood += c["ood"].get<bool>();
  }
  CHECK(ood == 2);
  CHECK_THROWS_AS(cmd_phantom(with_output(j, q), false), ConfigError);
  CHECK(cmd_phantom(with_output(j, q), true) == 0);

  const auto a = scratch("det_a"), b = scratch("det_b");
  cmd_phantom(with_output(tiny_undersampled(), a), false);
  cmd_phantom(with_output(tiny_undersampled(), b), false);
  for (const auto &e : fs::recursive_directory_iterator(a / "dataset")) {
    if (e.is_regular_file()) {
      CHECK(slurp(e.path()) == slurp(b / "dataset" / fs::relative(e.path(), a / "dataset")));
    }
  }
  const Dataset loaded = load_dataset(a);
  const Dataset built = build_dataset(with_output(tiny_undersampled(), a));
  REQUIRE(loaded.cases.size() == built.cases.size());
  CHECK(loaded.cases[4].phantom.truth.data()[40] == built.cases[4].phantom.truth.data()[40]);
  CHECK(loaded.cases[4].phantom.lesions.size() == 1);
  for (const auto &p : {empty_dir, q, a, b}) {
    fs::remove_all(p);
  }
}

TEST_CASE("train and recon commands")
{
  const auto out = scratch("recon");
  auto cfg = with_output(tiny_undersampled(), out);
  CHECK_THROWS_AS(cmd_train(cfg), IoError);
  cmd_phantom(cfg, false);
  CHECK_THROWS_AS(cmd_recon(cfg, Method::Dl, "ood_000"), IoError);
  CHECK(cmd_train(cfg) == 0);
  CHECK(fs::exists(out / "checkpoint" / "manifest.json"));
  CHECK(fs::exists(out / "train_loss.csv"));

  auto zero = cfg;
  zero.train.epochs = 0;
  const auto init_dir = scratch("recon_init");
  zero.output_dir = init_dir;
  cmd_phantom(zero, false);
  cmd_train(zero);
  const auto init = load_checkpoint<float>(init_dir / "checkpoint");
  const auto expected = build_unet<float>(zero.arch, derive_seed(derive_seed(zero.seed, 11), 0));
  CHECK(init.fingerprint() == expected.fingerprint());
  fs::remove_all(init_dir);

  CHECK(cmd_recon(cfg, Method::Dl, "ood_000") == 0);
  const std::string dl = slurp(out / "recon" / "dl" / "ood_000" / "recon.fnt");
  auto fine0 = cfg;
  fine0.fine.iterations = 0;
  CHECK(cmd_recon(fine0, Method::Fine, "ood_000") == 0);
  CHECK(slurp(out / "recon" / "fine" / "ood_000" / "recon.fnt") == dl);
  CHECK(fs::exists(out / "recon" / "fine" / "ood_000" / "weights.csv"));
  CHECK(fs::exists(out / "recon" / "fine" / "ood_000" / "preview.pgm"));
  CHECK(cmd_recon(cfg, Method::Dip, "ood_001") == 0);
  CHECK(cmd_recon(cfg, Method::Tv, "ood_001") == 0);
  CHECK_THROWS_AS(cmd_recon(cfg, Method::Dl, "ood_999"), IoError);

  CHECK(cmd_metrics(cfg) == 0);
  std::ifstream in(out / "metrics.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
  }
  CHECK(rows == 1 + 4);

  CHECK(cmd_weights_report(out / "checkpoint", out / "recon" / "dip" / "ood_001" / "checkpoint",
                           out / "w.csv") == 0);
  const auto manifest = json::parse(slurp(out / "MANIFEST.json"));
  CHECK(manifest["artifacts"].contains("recon/dl/ood_000/recon.fnt"));
  CHECK(manifest["config_hash"] == hash_hex(config_hash(cfg)));
  fs::remove_all(out);
}

TEST_CASE("tv on a fully sampled noiseless case is fidelity dominated")
{
  auto j = tiny_undersampled();
  j["dataset"]["acceleration"] = 1.0;
  j["dataset"]["train_count"] = 0;
  j["solver"]["lambda"] = 1e-6;
  j["solver"]["max_cg"] = 50;
  j["solver"]["cg_tol"] = 1e-8;
  j["methods"] = {"tv"};
  const auto cfg = with_output(j, scratch("tv"));
  const Dataset data = build_dataset(cfg);
  const auto &c = data.cases.front().phantom;
  const auto r = reconstruct(cfg, Method::Tv, c, nullptr);
  CHECK(psnr(r.image, c.truth) > 60.0);
}

TEST_CASE("compare tables, gaps and reproducibility")
{
  auto j = tiny_undersampled();
  j["dataset"]["ood_count"] = 1;
  j["methods"] = {"dl"};
  const auto one = scratch("cmp_one");
  CHECK(cmd_compare(with_output(j, one), 1) == 0);
  std::ifstream in(one / "compare" / "summary.csv");
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(row.rfind("ood_000,dl,", 0) == 0);
  CHECK(!std::getline(in, extra));
  fs::remove_all(one);

  j = tiny_undersampled();
  j["sweeps"] = {{"fine_settings", {{{"optimizer", "adam"}, {"learning_rate", 1e-4}},
                                    {{"optimizer", "rmsprop"}, {"learning_rate", 1e-4}}}},
                 {"train_sizes", {1, 3}}};
  const auto a = scratch("cmp_a"), b = scratch("cmp_b"), p = scratch("cmp_p");
  CHECK(cmd_compare(with_output(j, a), 1) == 0);
  CHECK(cmd_compare(with_output(j, b), 1) == 0);
  CHECK(cmd_compare(with_output(j, p), 2) == 0);
  for (const char *f : {"summary.csv", "winrate.csv", "regression.csv", "sweep_fine.csv", "sweep_train_size.csv"}) {
    CHECK(slurp(a / "compare" / f) == slurp(b / "compare" / f));
    CHECK(slurp(a / "compare" / f) == slurp(p / "compare" / f));
  }
  CHECK(slurp(a / "compare" / "winrate.csv").find("fine>dl:psnr") != std::string::npos);

  // A method that cannot run leaves a gap and a nonzero exit.
  auto broken = with_output(j, a);
  broken.fine_sweep.clear();
  broken.train_size_sweep.clear();
  broken.methods = {Method::Dl, Method::Tv};
  broken.solver.max_cg = 0;
  fs::remove_all(a / "compare");
  CHECK(cmd_compare(broken, 1) == 2);
  const std::string summary = slurp(a / "compare" / "summary.csv");
  CHECK(summary.find("ood_000,dl,") != std::string::npos);
  CHECK(summary.find("ood_000,tv,,,,,") != std::string::npos);
  for (const auto &d : {a, b, p}) {
    fs::remove_all(d);
  }
}

TEST_CASE("cli exit codes")
{
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 1);
  CHECK(run_cli("bogus") == 1);
  CHECK(run_cli("recon --config /nonexistent.json -m dl --case x") == 1);

  const auto dir = scratch("cli");
  fs::create_directories(dir);
  auto j = tiny_undersampled();
  j["output_dir"] = (dir / "out").string();
  std::ofstream(dir / "cfg.json") << j.dump();
  CHECK(run_cli("phantom -c " + (dir / "cfg.json").string()) == 0);
  CHECK(run_cli("phantom -c " + (dir / "cfg.json").string()) == 1);
  CHECK(run_cli("recon -c " + (dir / "cfg.json").string() + " -m warp --case ood_000") == 1);
  CHECK(run_cli("recon -c " + (dir / "cfg.json").string() + " -m dl --case ood_000") == 1);
  CHECK(run_cli("recon -c " + (dir / "cfg.json").string() + " -m tv --case ood_000") == 0);
  j["train"]["learning_rate"] = 1e30;
  std::ofstream(dir / "blowup.json") << j.dump();
  CHECK(run_cli("train -c " + (dir / "blowup.json").string()) == 2);
  fs::remove_all(dir);
}
