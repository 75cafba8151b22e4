#include "fine/net/checkpoint.hpp"

#include <fstream>
#include <json.hpp>

#include "fine/core/tensor_io.hpp"
#include "fine/core/tensor_ops.hpp"

namespace fine {

namespace {

nlohmann::json arch_json(const UNetConfig &c)
{
  return {{"spatial_rank", c.spatial_rank}, {"in_channels", c.in_channels}, {"out_channels", c.out_channels},
          {"depth", c.depth},               {"base_channels", c.base_channels}, {"kernel_extent", c.kernel_extent}};
}

UNetConfig arch_from_json(const nlohmann::json &j)
{
  UNetConfig c;
  c.spatial_rank = j.at("spatial_rank");
  c.in_channels = j.at("in_channels");
  c.out_channels = j.at("out_channels");
  c.depth = j.at("depth");
  c.base_channels = j.at("base_channels");
  c.kernel_extent = j.at("kernel_extent");
  c.validate();
  return c;
}

template <typename T>
Tensor<T> load_real(const std::filesystem::path &path)
{
  return std::visit(
      [&](auto &&t) -> Tensor<T> {
        using E = typename std::decay_t<decltype(t)>::value_type;
        if constexpr (is_complex_v<E>) {
          throw TypeError("checkpoint tensor " + path.string() + " is complex");
        } else {
          return cast<T>(t);
        }
      },
      load_tensor(path));
}

} // namespace

template <typename T>
void save_checkpoint(const NetworkParams<T> &params, const std::filesystem::path &dir, const CheckpointInfo &info)
{
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["format"] = "fine-checkpoint";
  j["version"] = 1;
  j["arch"] = arch_json(params.arch);
  j["dtype"] = dtype_name(dtype_of<T>());
  j["optimizer"] = info.optimizer;
  j["step"] = info.step;
  j["fingerprint"] = params.fingerprint();
  nlohmann::json layers = nlohmann::json::array();
  for (const auto &l : params.layers) {
    const std::string w = l.id + ".weight.fnt";
    const std::string b = l.id + ".bias.fnt";
    save_tensor(l.weight, dir / w);
    save_tensor(l.bias, dir / b);
    layers.push_back({{"id", l.id}, {"weight", w}, {"bias", b}, {"weight_shape", l.weight.shape()}});
  }
  j["layers"] = layers;
  std::ofstream out(dir / "manifest.json");
  if (!out) {
    throw IoError("cannot write " + (dir / "manifest.json").string());
  }
  out << j.dump(2) << "\n";
}

template <typename T>
NetworkParams<T> load_checkpoint(const std::filesystem::path &dir, CheckpointInfo *info)
{
  std::ifstream in(dir / "manifest.json");
  if (!in) {
    throw IoError("checkpoint manifest missing: " + (dir / "manifest.json").string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw IoError("checkpoint manifest unreadable: " + std::string(e.what()));
  }
  NetworkParams<T> p;
  p.arch = arch_from_json(j.at("arch"));
  const auto specs = unet_layer_specs(p.arch);
  const auto &layers = j.at("layers");
  if (layers.size() != specs.size()) {
    throw ShapeError("checkpoint has " + std::to_string(layers.size()) + " layers, architecture needs " +
                     std::to_string(specs.size()));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto &lj = layers[i];
    if (lj.at("id") != specs[i].id) {
      throw ShapeError("checkpoint layer " + std::to_string(i) + " is '" + lj.at("id").get<std::string>() +
                       "', expected '" + specs[i].id + "'");
    }
    ConvParams<T> c;
    c.id = specs[i].id;
    c.weight = load_real<T>(dir / lj.at("weight").get<std::string>());
    c.bias = load_real<T>(dir / lj.at("bias").get<std::string>());
    p.layers.push_back(std::move(c));
  }
  check_same_architecture(p, build_unet<T>(p.arch, 0));
  if (info) {
    info->optimizer = j.value("optimizer", "adam");
    info->step = j.value("step", 0L);
  }
  return p;
}

template void save_checkpoint<float>(const NetworkParams<float> &, const std::filesystem::path &,
                                     const CheckpointInfo &);
template void save_checkpoint<double>(const NetworkParams<double> &, const std::filesystem::path &,
                                      const CheckpointInfo &);
template NetworkParams<float> load_checkpoint<float>(const std::filesystem::path &, CheckpointInfo *);
template NetworkParams<double> load_checkpoint<double>(const std::filesystem::path &, CheckpointInfo *);

} // namespace fine
