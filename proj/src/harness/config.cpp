#include "fine/harness/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

namespace fine {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

const std::pair<Method, const char *> kMethods[] = {{Method::Dl, "dl"},   {Method::Dll2, "dll2"},
                                                    {Method::Fine, "fine"}, {Method::Tv, "tv"},
                                                    {Method::Medi, "medi"}, {Method::Dip, "dip"}};

// Rejects keys the schema does not know, so typos fail loudly.
void check_keys(const json &j, const char *block, std::initializer_list<const char *> allowed)
{
  if (!j.is_object()) {
    throw ConfigError(std::string("config block '") + block + "' must be an object");
  }
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto &item : j.items()) {
    if (!ok.count(item.key())) {
      throw ConfigError(std::string("unknown key '") + item.key() + "' in config block '" + block + "'");
    }
  }
}

template <typename V>
void read(const json &j, const char *key, V &out)
{
  if (!j.contains(key)) {
    return;
  }
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception &e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

Shape read_shape(const json &j, const char *key, Shape fallback)
{
  std::vector<std::size_t> v = fallback;
  read(j, key, v);
  return v;
}

} // namespace

Method parse_method(const std::string &s)
{
  for (const auto &[m, name] : kMethods) {
    if (s == name) {
      return m;
    }
  }
  throw ConfigError("unknown method '" + s + "' (expected dl, dll2, fine, tv, medi or dip)");
}

const char *method_name(Method m)
{
  for (const auto &[k, name] : kMethods) {
    if (k == m) {
      return name;
    }
  }
  return "?";
}

void ExperimentConfig::validate() const
{
  if (version != kSchemaVersion) {
    throw ConfigError("unsupported config version " + std::to_string(version));
  }
  const std::size_t rank = application == PhantomKind::Qsm ? 3 : 2;
  if (dataset.grid.size() != rank) {
    throw ConfigError("dataset.grid must have " + std::to_string(rank) + " extents for this application");
  }
  if (dataset.train_count < 0 || dataset.test_count < 0 || dataset.ood_count < 0) {
    throw ConfigError("dataset counts must be nonnegative");
  }
  if (dataset.noise_sigma < 0.0) {
    throw ConfigError("dataset.noise_sigma must be nonnegative");
  }
  if (dataset.lesion.count < 0 || dataset.lesion.value_min > dataset.lesion.value_max) {
    throw ConfigError("dataset.lesion: need count >= 0 and value_min <= value_max");
  }
  if (static_cast<std::size_t>(arch.spatial_rank) != rank) {
    throw ConfigError("arch.spatial_rank does not match the application");
  }
  arch.validate();
  train.validate();
  fine.validate();
  solver.validate();
  if (application == PhantomKind::Qsm && (patch_shape.size() != 3 || patch_stride.size() != 3)) {
    throw ConfigError("train.patch and train.stride need three extents");
  }
  if (!(qsm_scale > 0.0) || !(max_val > 0.0)) {
    throw ConfigError("qsm_scale and evaluation.max_val must be positive");
  }
  if (methods.empty()) {
    throw ConfigError("methods must not be empty");
  }
  for (Method m : methods) {
    if (m == Method::Medi && application != PhantomKind::Qsm) {
      throw ConfigError("method medi needs the qsm application");
    }
  }
  for (int n : train_size_sweep) {
    if (n < 1 || n > dataset.train_count) {
      throw ConfigError("sweeps.train_sizes entries must lie in [1, dataset.train_count]");
    }
  }
}

ExperimentConfig default_config(PhantomKind app)
{
  ExperimentConfig c;
  c.application = app;
  c.arch.in_channels = 1;
  c.arch.out_channels = 1;
  if (app == PhantomKind::Qsm) {
    c.arch.spatial_rank = 3;
    c.arch.depth = 2;
    c.arch.base_channels = 4;
    c.fine.iterations = 300;
  } else {
    c.dataset.grid = {64, 64};
    c.dataset.lesion = {LesionKind::Ms, 0.6, 1.0, 4.0, 1};
    c.arch.spatial_rank = 2;
    c.arch.in_channels = 2;
    c.arch.depth = 3;
    c.arch.base_channels = 8;
    c.train.epochs = 100;
    c.fine.iterations = 500;
  }
  return c;
}

ExperimentConfig config_from_json(const json &j)
{
  check_keys(j, "root",
             {"version", "application", "seed", "output_dir", "dataset", "arch", "train", "fine", "solver", "methods",
              "evaluation", "sweeps"});
  if (!j.contains("application")) {
    throw ConfigError("config needs an 'application' (qsm or undersampled)");
  }
  ExperimentConfig c = default_config(parse_phantom_kind(j.at("application").get<std::string>()));
  read(j, "version", c.version);
  read(j, "seed", c.seed);
  std::string out = c.output_dir.string();
  read(j, "output_dir", out);
  c.output_dir = out;

  if (j.contains("dataset")) {
    const json &d = j.at("dataset");
    check_keys(d, "dataset",
               {"grid", "train_count", "test_count", "ood_count", "noise_sigma", "lesion", "acceleration",
                "center_fraction", "complex"});
    c.dataset.grid = read_shape(d, "grid", c.dataset.grid);
    read(d, "train_count", c.dataset.train_count);
    read(d, "test_count", c.dataset.test_count);
    read(d, "ood_count", c.dataset.ood_count);
    read(d, "noise_sigma", c.dataset.noise_sigma);
    read(d, "acceleration", c.dataset.acceleration);
    read(d, "center_fraction", c.dataset.center_fraction);
    read(d, "complex", c.dataset.complex_valued);
    if (d.contains("lesion")) {
      const json &l = d.at("lesion");
      check_keys(l, "dataset.lesion", {"kind", "value_min", "value_max", "radius", "count"});
      std::string kind = lesion_kind_name(c.dataset.lesion.kind);
      read(l, "kind", kind);
      c.dataset.lesion.kind = parse_lesion_kind(kind);
      read(l, "value_min", c.dataset.lesion.value_min);
      read(l, "value_max", c.dataset.lesion.value_max);
      read(l, "radius", c.dataset.lesion.radius);
      read(l, "count", c.dataset.lesion.count);
    }
  }
  if (c.application == PhantomKind::Undersampled) {
    c.arch.out_channels = c.dataset.complex_valued ? 2 : 1;
  }
  if (j.contains("arch")) {
    const json &a = j.at("arch");
    check_keys(a, "arch", {"depth", "base_channels", "kernel_extent"});
    read(a, "depth", c.arch.depth);
    read(a, "base_channels", c.arch.base_channels);
    read(a, "kernel_extent", c.arch.kernel_extent);
  }
  if (j.contains("train")) {
    const json &t = j.at("train");
    check_keys(t, "train",
               {"epochs", "batch_size", "learning_rate", "loss", "optimizer", "validation_fraction", "patch", "stride",
                "rotations", "qsm_scale"});
    read(t, "epochs", c.train.epochs);
    read(t, "batch_size", c.train.batch_size);
    read(t, "learning_rate", c.train.learning_rate);
    read(t, "validation_fraction", c.train.validation_fraction);
    std::string loss = loss_kind_name(c.train.loss), opt = optimizer_kind_name(c.train.optimizer);
    read(t, "loss", loss);
    read(t, "optimizer", opt);
    c.train.loss = parse_loss_kind(loss);
    c.train.optimizer = parse_optimizer_kind(opt);
    c.patch_shape = read_shape(t, "patch", c.patch_shape);
    c.patch_stride = read_shape(t, "stride", c.patch_stride);
    read(t, "rotations", c.rotations);
    read(t, "qsm_scale", c.qsm_scale);
  }
  if (j.contains("fine")) {
    const json &f = j.at("fine");
    check_keys(f, "fine",
               {"optimizer", "learning_rate", "iterations", "early_stop_rel", "log_every", "return_best", "weight"});
    std::string opt = optimizer_kind_name(c.fine.optimizer);
    read(f, "optimizer", opt);
    c.fine.optimizer = parse_optimizer_kind(opt);
    read(f, "learning_rate", c.fine.learning_rate);
    read(f, "iterations", c.fine.iterations);
    if (f.contains("early_stop_rel") && !f.at("early_stop_rel").is_null()) {
      c.fine.early_stop_rel = f.at("early_stop_rel").get<double>();
    }
    read(f, "log_every", c.fine.log_every);
    read(f, "return_best", c.fine.return_best);
    std::string w = noise_weight_mode_name(c.weight);
    read(f, "weight", w);
    c.weight = parse_noise_weight_mode(w);
  }
  if (j.contains("solver")) {
    const json &s = j.at("solver");
    check_keys(s, "solver",
               {"lambda", "lambda2", "max_outer", "max_cg", "cg_tol", "epsilon_tv", "keep_fraction"});
    read(s, "lambda", c.solver.lambda);
    read(s, "lambda2", c.solver.lambda2);
    read(s, "max_outer", c.solver.max_outer);
    read(s, "max_cg", c.solver.max_cg);
    read(s, "cg_tol", c.solver.cg_tol);
    read(s, "epsilon_tv", c.solver.epsilon_tv);
    read(s, "keep_fraction", c.solver.keep_fraction);
  }
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto &m : j.at("methods")) {
      c.methods.push_back(parse_method(m.get<std::string>()));
    }
  }
  if (j.contains("evaluation")) {
    const json &e = j.at("evaluation");
    check_keys(e, "evaluation", {"max_val", "support_mask"});
    read(e, "max_val", c.max_val);
    read(e, "support_mask", c.support_mask);
  }
  if (j.contains("sweeps")) {
    const json &s = j.at("sweeps");
    check_keys(s, "sweeps", {"fine_settings", "train_sizes"});
    if (s.contains("fine_settings")) {
      for (const auto &e : s.at("fine_settings")) {
        check_keys(e, "sweeps.fine_settings", {"optimizer", "learning_rate"});
        FineSetting fs;
        std::string opt = "adam";
        read(e, "optimizer", opt);
        fs.optimizer = parse_optimizer_kind(opt);
        read(e, "learning_rate", fs.learning_rate);
        c.fine_sweep.push_back(fs);
      }
    }
    read(s, "train_sizes", c.train_size_sweep);
  }
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig &c)
{
  json j;
  j["version"] = c.version;
  j["application"] = phantom_kind_name(c.application);
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  const auto &d = c.dataset;
  j["dataset"] = {{"grid", d.grid},
                  {"train_count", d.train_count},
                  {"test_count", d.test_count},
                  {"ood_count", d.ood_count},
                  {"noise_sigma", d.noise_sigma},
                  {"lesion",
                   {{"kind", lesion_kind_name(d.lesion.kind)},
                    {"value_min", d.lesion.value_min},
                    {"value_max", d.lesion.value_max},
                    {"radius", d.lesion.radius},
                    {"count", d.lesion.count}}},
                  {"acceleration", d.acceleration},
                  {"center_fraction", d.center_fraction},
                  {"complex", d.complex_valued}};
  j["arch"] = {{"depth", c.arch.depth}, {"base_channels", c.arch.base_channels},
               {"kernel_extent", c.arch.kernel_extent}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"loss", loss_kind_name(c.train.loss)},
                {"optimizer", optimizer_kind_name(c.train.optimizer)},
                {"validation_fraction", c.train.validation_fraction},
                {"patch", c.patch_shape},
                {"stride", c.patch_stride},
                {"rotations", c.rotations},
                {"qsm_scale", c.qsm_scale}};
  j["fine"] = {{"optimizer", optimizer_kind_name(c.fine.optimizer)},
               {"learning_rate", c.fine.learning_rate},
               {"iterations", c.fine.iterations},
               {"early_stop_rel", c.fine.early_stop_rel ? json(*c.fine.early_stop_rel) : json(nullptr)},
               {"log_every", c.fine.log_every},
               {"return_best", c.fine.return_best},
               {"weight", noise_weight_mode_name(c.weight)}};
  j["solver"] = {{"lambda", c.solver.lambda},         {"lambda2", c.solver.lambda2},
                 {"max_outer", c.solver.max_outer},   {"max_cg", c.solver.max_cg},
                 {"cg_tol", c.solver.cg_tol},         {"epsilon_tv", c.solver.epsilon_tv},
                 {"keep_fraction", c.solver.keep_fraction}};
  json methods = json::array();
  for (Method m : c.methods) {
    methods.push_back(method_name(m));
  }
  j["methods"] = methods;
  j["evaluation"] = {{"max_val", c.max_val}, {"support_mask", c.support_mask}};
  json sweep = json::array();
  for (const auto &s : c.fine_sweep) {
    sweep.push_back({{"optimizer", optimizer_kind_name(s.optimizer)}, {"learning_rate", s.learning_rate}});
  }
  j["sweeps"] = {{"fine_settings", sweep}, {"train_sizes", c.train_size_sweep}};
  return j;
}

ExperimentConfig load_config(const std::filesystem::path &path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config " + path.string());
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception &e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::uint64_t config_hash(const ExperimentConfig &c)
{
  json j = config_to_json(c);
  j.erase("output_dir");
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h)
{
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void apply_seed_override(ExperimentConfig &c)
{
  if (const char *s = std::getenv("FINE_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(s, &used);
      if (used != std::string(s).size()) {
        throw std::invalid_argument(s);
      }
      c.seed = v;
    } catch (const std::exception &) {
      throw ConfigError(std::string("FINE_SEED must be a nonnegative integer, got '") + s + "'");
    }
  }
}

} // namespace fine
