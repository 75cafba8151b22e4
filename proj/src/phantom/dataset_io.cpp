#include "fine/phantom/dataset_io.hpp"

#include <fstream>

#include <json.hpp>

#include "fine/core/tensor_io.hpp"

namespace fine {

void save_case(const PhantomCase &c, const std::filesystem::path &dir)
{
  std::filesystem::create_directories(dir);
  save_tensor(c.truth, dir / "truth.fnt");
  save_tensor(c.magnitude, dir / "magnitude.fnt");
  nlohmann::json j;
  j["kind"] = phantom_kind_name(c.kind);
  j["seed"] = c.seed;
  j["noise_sigma"] = c.noise_sigma;
  j["noise_seed"] = c.noise_seed;
  j["spec"] = c.spec_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(c.spec_json);
  j["lesions"] = nlohmann::json::array();
  for (const auto &l : c.lesions) {
    j["lesions"].push_back(
        {{"kind", lesion_kind_name(l.kind)}, {"center", l.center}, {"radius", l.radius}, {"value", l.value}});
  }
  if (c.kind == PhantomKind::Qsm) {
    save_tensor(c.field, dir / "field.fnt");
    j["operator"] = {{"type", "dipole"}, {"voxel_size", c.voxel_size}, {"b0_axis", axis_name(c.b0_axis)}};
  } else {
    save_tensor(c.kspace, dir / "kspace.fnt");
    if (c.complex_valued()) {
      save_tensor(c.phase, dir / "phase.fnt");
    }
    save_sampling_mask(c.mask, dir / "mask");
    j["operator"] = {{"type", "undersampled_fourier"}, {"mask", "mask"}};
  }
  std::ofstream out(dir / "case.json");
  if (!out) {
    throw IoError("cannot write " + (dir / "case.json").string());
  }
  out << j.dump(2) << "\n";
}

PhantomCase load_case(const std::filesystem::path &dir)
{
  std::ifstream in(dir / "case.json");
  if (!in) {
    throw IoError("missing case manifest " + (dir / "case.json").string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw IoError("unreadable case manifest " + (dir / "case.json").string() + ": " + e.what());
  }
  PhantomCase c;
  c.kind = parse_phantom_kind(j.at("kind"));
  c.seed = j.at("seed");
  c.noise_sigma = j.at("noise_sigma");
  c.noise_seed = j.at("noise_seed");
  c.spec_json = j.at("spec").dump();
  for (const auto &l : j.at("lesions")) {
    c.lesions.push_back({parse_lesion_kind(l.at("kind")), l.at("center"), l.at("radius"), l.at("value")});
  }
  c.truth = load_tensor_as<float>(dir / "truth.fnt");
  c.magnitude = load_tensor_as<float>(dir / "magnitude.fnt");
  if (c.kind == PhantomKind::Qsm) {
    c.field = load_tensor_as<float>(dir / "field.fnt");
    c.voxel_size = j.at("operator").at("voxel_size");
    c.b0_axis = parse_axis(j.at("operator").at("b0_axis"));
  } else {
    c.kspace = load_tensor_as<cfloat>(dir / "kspace.fnt");
    if (std::filesystem::exists(dir / "phase.fnt")) {
      c.phase = load_tensor_as<float>(dir / "phase.fnt");
    }
    c.mask = load_sampling_mask(dir / "mask");
  }
  return c;
}

} // namespace fine
