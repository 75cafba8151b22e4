#include "fine/physics/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "fine/core/fft.hpp"
#include "fine/core/rng.hpp"
#include "fine/core/tensor_io.hpp"
#include "fine/physics/dipole.hpp"

namespace fine {

std::size_t SamplingMask::sampled_count() const
{
  std::size_t n = 0;
  for (float v : mask.data()) {
    n += v != 0.0f ? 1 : 0;
  }
  return n;
}

namespace {

// Distance of every grid point from the k-space origin, in index units.
std::vector<double> radii(const Shape &grid)
{
  const std::size_t n = element_count(grid);
  std::vector<double> r(n);
  std::vector<std::size_t> idx(grid.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t a = 0; a < grid.size(); ++a) {
      const double f = fft_frequency_index(idx[a], grid[a]);
      s += f * f;
    }
    r[i] = std::sqrt(s);
    for (std::size_t a = grid.size(); a-- > 0;) {
      if (++idx[a] < grid[a]) {
        break;
      }
      idx[a] = 0;
    }
  }
  return r;
}

} // namespace

SamplingMask make_sampling_mask(const Shape &grid_shape, double acceleration, double center_fraction,
                                std::uint64_t seed)
{
  if (grid_shape.empty()) {
    throw ShapeError("sampling mask needs a non-empty grid");
  }
  if (!(acceleration > 1.0)) {
    throw ConfigError("acceleration must be > 1, got " + std::to_string(acceleration));
  }
  if (!(center_fraction > 0.0 && center_fraction < 1.0)) {
    throw ConfigError("center_fraction must lie in (0, 1)");
  }
  const std::size_t n = element_count(grid_shape);
  const auto r = radii(grid_shape);
  const double center_radius = center_fraction * static_cast<double>(*std::min_element(grid_shape.begin(), grid_shape.end())) / 2.0;
  double r_max = 0.0;
  for (auto e : grid_shape) {
    r_max += (static_cast<double>(e) / 2.0) * (static_cast<double>(e) / 2.0);
  }
  r_max = std::sqrt(r_max);

  SamplingMask m;
  m.grid_shape = grid_shape;
  m.mask = Tensor<float>(grid_shape, 0.0f);
  m.requested_acceleration = acceleration;
  m.center_fraction = center_fraction;
  m.seed = seed;

  std::vector<std::size_t> outer;
  std::size_t center = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (r[i] <= center_radius) {
      m.mask[i] = 1.0f;
      ++center;
    } else {
      outer.push_back(i);
    }
  }
  const auto budget = static_cast<std::size_t>(std::llround(static_cast<double>(n) / acceleration));
  if (center > budget) {
    throw ConfigError("acceleration " + std::to_string(acceleration) + " infeasible: the fully sampled centre alone holds " +
                      std::to_string(center) + " of " + std::to_string(budget) + " allowed samples");
  }
  const std::size_t want = std::min(budget - center, outer.size());

  auto density = [&](std::size_t i, double p) { return std::pow(std::max(0.0, 1.0 - r[i] / r_max), p); };
  auto expected = [&](double p) {
    double s = 0.0;
    for (auto i : outer) {
      s += density(i, p);
    }
    return s;
  };
  // Expected count decreases monotonically in p.
  double lo = 0.0, hi = 1.0;
  while (expected(hi) > static_cast<double>(want) && hi < 1e6) {
    hi *= 2.0;
  }
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (expected(mid) > static_cast<double>(want)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  m.density_power = 0.5 * (lo + hi);

  // Efraimidis-Spirakis keys log(u) / w; the `want` largest are kept.
  Rng rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(outer.size());
  for (auto i : outer) {
    const double u = std::max(u01(rng), 1e-300);
    const double w = density(i, m.density_power);
    keys.emplace_back(w > 0.0 ? std::log(u) / w : -std::numeric_limits<double>::infinity(), i);
  }
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(want), keys.end(),
                    [](const auto &a, const auto &b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  for (std::size_t k = 0; k < want; ++k) {
    m.mask[keys[k].second] = 1.0f;
  }
  m.acceleration = static_cast<double>(n) / static_cast<double>(m.sampled_count());
  return m;
}

SamplingMask full_mask(const Shape &grid_shape)
{
  SamplingMask m;
  m.grid_shape = grid_shape;
  m.mask = Tensor<float>(grid_shape, 1.0f);
  return m;
}

template <typename R>
Tensor<std::complex<R>> undersample_forward(const SamplingMask &mask, const Tensor<std::complex<R>> &image)
{
  if (image.shape() != mask.grid_shape) {
    throw ShapeError("undersample_forward: image " + shape_string(image.shape()) + " vs mask " +
                     shape_string(mask.grid_shape));
  }
  Tensor<std::complex<R>> k = image;
  const auto axes = all_axes(k.shape());
  fft_inplace(k, axes, false);
  const R scale = R(1) / std::sqrt(static_cast<R>(k.size()));
  for (std::size_t i = 0; i < k.size(); ++i) {
    k[i] *= mask.mask[i] * scale;
  }
  return k;
}

template <typename R>
Tensor<std::complex<R>> undersample_adjoint(const SamplingMask &mask, const Tensor<std::complex<R>> &kspace)
{
  if (kspace.shape() != mask.grid_shape) {
    throw ShapeError("undersample_adjoint: k-space " + shape_string(kspace.shape()) + " vs mask " +
                     shape_string(mask.grid_shape));
  }
  Tensor<std::complex<R>> x = kspace;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] *= mask.mask[i];
  }
  const auto axes = all_axes(x.shape());
  fft_inplace(x, axes, true);
  const R scale = std::sqrt(static_cast<R>(x.size()));
  for (auto &v : x.data()) {
    v *= scale;
  }
  return x;
}

void save_sampling_mask(const SamplingMask &m, const std::filesystem::path &dir)
{
  std::filesystem::create_directories(dir);
  save_tensor(m.mask, dir / "mask.fnt");
  nlohmann::json j;
  j["grid_shape"] = m.grid_shape;
  j["seed"] = m.seed;
  j["acceleration"] = m.requested_acceleration;
  j["realized_acceleration"] = m.acceleration;
  j["center_fraction"] = m.center_fraction;
  j["density_power"] = m.density_power;
  std::ofstream(dir / "mask.json") << j.dump(2) << "\n";
}

SamplingMask load_sampling_mask(const std::filesystem::path &dir)
{
  std::ifstream f(dir / "mask.json");
  if (!f) {
    throw IoError("missing " + (dir / "mask.json").string());
  }
  const auto j = nlohmann::json::parse(f);
  SamplingMask m;
  m.mask = load_tensor_as<float>(dir / "mask.fnt");
  m.grid_shape = j.at("grid_shape").get<Shape>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.requested_acceleration = j.at("acceleration").get<double>();
  m.acceleration = j.at("realized_acceleration").get<double>();
  m.center_fraction = j.at("center_fraction").get<double>();
  m.density_power = j.at("density_power").get<double>();
  return m;
}

template Tensor<cfloat> undersample_forward<float>(const SamplingMask &, const Tensor<cfloat> &);
template Tensor<cdouble> undersample_forward<double>(const SamplingMask &, const Tensor<cdouble> &);
template Tensor<cfloat> undersample_adjoint<float>(const SamplingMask &, const Tensor<cfloat> &);
template Tensor<cdouble> undersample_adjoint<double>(const SamplingMask &, const Tensor<cdouble> &);

} // namespace fine
