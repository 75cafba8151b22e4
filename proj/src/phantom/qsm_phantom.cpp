#include <cmath>
#include <numbers>

#include <json.hpp>

#include "fine/core/rng.hpp"
#include "fine/core/tensor_ops.hpp"
#include "fine/phantom/phantom.hpp"
#include "fine/physics/noise.hpp"

namespace fine {

const char *phantom_kind_name(PhantomKind k)
{
  return k == PhantomKind::Qsm ? "qsm" : "undersampled";
}

PhantomKind parse_phantom_kind(const std::string &s)
{
  if (s == "qsm") {
    return PhantomKind::Qsm;
  }
  if (s == "undersampled") {
    return PhantomKind::Undersampled;
  }
  throw ConfigError("application must be qsm or undersampled, got '" + s + "'");
}

const char *lesion_kind_name(LesionKind k)
{
  return k == LesionKind::Hemorrhage ? "hemorrhage" : "ms";
}

LesionKind parse_lesion_kind(const std::string &s)
{
  if (s == "hemorrhage") {
    return LesionKind::Hemorrhage;
  }
  if (s == "ms") {
    return LesionKind::Ms;
  }
  throw ConfigError("lesion kind must be hemorrhage or ms, got '" + s + "'");
}

QsmPhantomSpec QsmPhantomSpec::empty()
{
  QsmPhantomSpec s;
  s.random_shapes_min = 0;
  s.random_shapes_max = 0;
  s.head_support = false;
  s.background_amplitude = 0.0;
  return s;
}

namespace {

bool inside(const PhantomShape &s, double x, double y, double z)
{
  const double p[3] = {x - s.center[0], y - s.center[1], z - s.center[2]};
  switch (s.family) {
  case ShapeFamily::Sphere:
    return p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= s.radii[0] * s.radii[0];
  case ShapeFamily::Ellipsoid: {
    double q = 0.0;
    for (int a = 0; a < 3; ++a) {
      q += p[a] * p[a] / (s.radii[a] * s.radii[a]);
    }
    return q <= 1.0;
  }
  case ShapeFamily::Cylinder: {
    double q = 0.0;
    for (int a = 0; a < 3; ++a) {
      if (a != s.axis) {
        q += p[a] * p[a] / (s.radii[a] * s.radii[a]);
      }
    }
    return q <= 1.0 && std::abs(p[s.axis]) <= s.radii[s.axis];
  }
  }
  return false;
}

const char *family_name(ShapeFamily f)
{
  switch (f) {
  case ShapeFamily::Sphere: return "sphere";
  case ShapeFamily::Ellipsoid: return "ellipsoid";
  case ShapeFamily::Cylinder: return "cylinder";
  }
  return "?";
}

// Ellipsoidal tissue support centred in the grid.
PhantomShape head_shape(const Shape &g)
{
  PhantomShape h;
  h.family = ShapeFamily::Ellipsoid;
  for (int a = 0; a < 3; ++a) {
    h.center[a] = (static_cast<double>(g[a]) - 1.0) / 2.0;
    h.radii[a] = 0.42 * static_cast<double>(g[a]);
  }
  return h;
}

} // namespace

PhantomCase generate_qsm_phantom(const Shape &grid_shape, const QsmPhantomSpec &spec, std::uint64_t seed)
{
  if (grid_shape.size() != 3) {
    throw ShapeError("qsm phantom needs a 3D grid, got " + shape_string(grid_shape));
  }
  for (auto n : grid_shape) {
    if (n < 4 || (n & (n - 1)) != 0) {
      throw SizeError("qsm phantom extents must be powers of two >= 4, got " + shape_string(grid_shape));
    }
  }
  if (spec.random_shapes_min < 0 || spec.random_shapes_max < spec.random_shapes_min) {
    throw ConfigError("qsm phantom: invalid random shape count range");
  }
  if (!(spec.chi_min <= spec.chi_max) || spec.noise_sigma < 0.0) {
    throw ConfigError("qsm phantom: invalid value range or noise level");
  }
  Rng rng(derive_seed(seed, 0));
  const PhantomShape head = head_shape(grid_shape);
  std::vector<PhantomShape> shapes = spec.shapes;
  const int count =
      spec.random_shapes_max > 0
          ? static_cast<int>(std::uniform_int_distribution<int>(spec.random_shapes_min, spec.random_shapes_max)(rng))
          : 0;
  for (int i = 0; i < count; ++i) {
    PhantomShape s;
    const double f = uniform(rng, 0.0, 1.0);
    s.family = f < 0.4 ? ShapeFamily::Ellipsoid : (f < 0.7 ? ShapeFamily::Sphere : ShapeFamily::Cylinder);
    s.axis = static_cast<int>(std::uniform_int_distribution<int>(0, 2)(rng));
    for (int a = 0; a < 3; ++a) {
      const double n = static_cast<double>(grid_shape[a]);
      s.radii[a] = uniform(rng, 0.05, 0.14) * std::max(n, 32.0);
      s.radii[a] = std::min(s.radii[a], 0.2 * n + 1.0);
    }
    if (s.family == ShapeFamily::Sphere) {
      const double r = std::min({s.radii[0], s.radii[1], s.radii[2]});
      s.radii = {r, r, r};
    }
    // Centre somewhere in the inner part of the support.
    for (;;) {
      double q = 0.0;
      for (int a = 0; a < 3; ++a) {
        s.center[a] = head.center[a] + uniform(rng, -0.6, 0.6) * head.radii[a];
        const double d = (s.center[a] - head.center[a]) / head.radii[a];
        q += d * d;
      }
      if (q <= 0.36) {
        break;
      }
    }
    s.value = uniform(rng, spec.chi_min, spec.chi_max);
    shapes.push_back(s);
  }
  // Smooth background inside the support: a few low-frequency cosines.
  std::array<std::array<double, 4>, 3> waves{};
  for (auto &w : waves) {
    w = {uniform(rng, 0.5, 2.0), uniform(rng, 0.5, 2.0), uniform(rng, 0.5, 2.0), uniform(rng, 0.0, 6.28)};
  }
  const double mag_texture_phase = uniform(rng, 0.0, 6.28);

  PhantomCase c;
  c.kind = PhantomKind::Qsm;
  c.seed = seed;
  c.truth = Tensor<float>(grid_shape);
  c.magnitude = Tensor<float>(grid_shape);
  c.noise_sigma = spec.noise_sigma;
  c.noise_seed = derive_seed(seed, 1);
  c.voxel_size = spec.voxel_size;
  c.b0_axis = spec.b0_axis;
  for (std::size_t i = 0; i < grid_shape[0]; ++i) {
    for (std::size_t j = 0; j < grid_shape[1]; ++j) {
      for (std::size_t k = 0; k < grid_shape[2]; ++k) {
        const double x = static_cast<double>(i), y = static_cast<double>(j), z = static_cast<double>(k);
        double chi = 0.0;
        double mag = 0.0;
        if (spec.head_support && inside(head, x, y, z)) {
          const double u[3] = {x / static_cast<double>(grid_shape[0]), y / static_cast<double>(grid_shape[1]),
                               z / static_cast<double>(grid_shape[2])};
          double bg = 0.0;
          for (const auto &w : waves) {
            bg += std::cos(2.0 * std::numbers::pi * (w[0] * u[0] + w[1] * u[1] + w[2] * u[2]) + w[3]);
          }
          chi = spec.background_amplitude * bg / 3.0;
          mag = 0.55 + 0.05 * std::sin(2.0 * std::numbers::pi * (u[0] + u[1]) + mag_texture_phase);
        }
        for (const auto &s : shapes) {
          if (inside(s, x, y, z)) {
            chi = s.value;
            mag = 0.55 - 0.8 * s.value;
          }
        }
        c.truth.at(i, j, k) = static_cast<float>(chi);
        c.magnitude.at(i, j, k) = static_cast<float>(mag);
      }
    }
  }
  nlohmann::json js;
  js["random_shapes"] = {spec.random_shapes_min, spec.random_shapes_max};
  js["chi_range"] = {spec.chi_min, spec.chi_max};
  js["head_support"] = spec.head_support;
  js["background_amplitude"] = spec.background_amplitude;
  js["noise_sigma"] = spec.noise_sigma;
  js["explicit_shapes"] = nlohmann::json::array();
  for (const auto &s : spec.shapes) {
    js["explicit_shapes"].push_back(
        {{"family", family_name(s.family)}, {"center", s.center}, {"radii", s.radii}, {"axis", s.axis},
         {"value", s.value}});
  }
  c.spec_json = js.dump();
  regenerate_measurement(c);
  return c;
}

Tensor<cfloat> PhantomCase::truth_image() const
{
  Tensor<cfloat> out(truth.shape());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    out[i] = phase.empty() ? cfloat(truth[i], 0.0f) : std::polar(truth[i], phase[i]);
  }
  return out;
}

void regenerate_measurement(PhantomCase &c)
{
  if (c.kind == PhantomKind::Qsm) {
    const auto kernel = make_dipole_kernel<float>(c.truth.shape(), c.voxel_size, c.b0_axis);
    c.field = apply_noise(dipole_convolve(kernel, c.truth), c.noise_sigma, c.noise_seed);
    return;
  }
  Tensor<cfloat> k = undersample_forward<float>(c.mask, c.truth_image());
  k = apply_noise(k, c.noise_sigma, c.noise_seed);
  for (std::size_t i = 0; i < k.size(); ++i) {
    k[i] *= c.mask.mask[i];
  }
  c.kspace = std::move(k);
}

std::pair<double, double> lesion_value_range(PhantomKind app, LesionKind kind)
{
  if (app == PhantomKind::Qsm) {
    return kind == LesionKind::Hemorrhage ? std::pair{0.5, 1.0} : std::pair{0.05, 0.15};
  }
  if (kind == LesionKind::Ms) {
    return {0.6, 1.0}; // T2-hyperintense spot
  }
  throw ConfigError("hemorrhage lesions are defined for qsm cases only");
}

Tensor<float> lesion_mask(const Shape &grid_shape, const Lesion &lesion)
{
  Tensor<float> m(grid_shape);
  const std::size_t n = m.size();
  const std::size_t rank = grid_shape.size();
  for (std::size_t idx = 0; idx < n; ++idx) {
    double d2 = 0.0;
    for (std::size_t a = 0; a < rank; ++a) {
      const double p = static_cast<double>((idx / m.stride(a)) % grid_shape[a]) - lesion.center[a];
      d2 += p * p;
    }
    m[idx] = d2 <= lesion.radius * lesion.radius ? 1.0f : 0.0f;
  }
  return m;
}

PhantomCase inject_lesion(const PhantomCase &c, LesionKind kind, double value, double radius,
                          std::optional<std::array<double, 3>> center)
{
  const auto [lo, hi] = lesion_value_range(c.kind, kind);
  if (value != 0.0 && (value < lo || value > hi)) {
    throw ConfigError(std::string(lesion_kind_name(kind)) + " lesion value " + std::to_string(value) +
                      " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  if (!(radius > 0.0)) {
    throw ConfigError("lesion radius must be positive");
  }
  const Shape &g = c.truth.shape();
  const std::size_t rank = g.size();
  auto fits = [&](const std::array<double, 3> &p) {
    for (std::size_t a = 0; a < rank; ++a) {
      if (p[a] - radius < 0.0 || p[a] + radius > static_cast<double>(g[a]) - 1.0) {
        return false;
      }
    }
    return true;
  };
  auto disjoint = [&](const std::array<double, 3> &p) {
    for (const auto &l : c.lesions) {
      double d2 = 0.0;
      for (std::size_t a = 0; a < rank; ++a) {
        d2 += (p[a] - l.center[a]) * (p[a] - l.center[a]);
      }
      if (std::sqrt(d2) <= radius + l.radius + 1.0) {
        return false;
      }
    }
    return true;
  };
  Lesion les{kind, {}, radius, value};
  if (center) {
    les.center = *center;
    if (!fits(les.center)) {
      throw ConfigError("lesion does not fit inside the grid");
    }
    if (!disjoint(les.center)) {
      throw ConfigError("lesion overlaps an existing lesion");
    }
  } else {
    Rng rng(derive_seed(c.seed, 100 + c.lesions.size()));
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      std::array<double, 3> p{};
      for (std::size_t a = 0; a < rank; ++a) {
        p[a] = std::round(uniform(rng, radius, static_cast<double>(g[a]) - 1.0 - radius));
      }
      if (!fits(p) || !disjoint(p)) {
        continue;
      }
      // Entire lesion inside the tissue support.
      const Tensor<float> m = lesion_mask(g, Lesion{kind, p, radius + 1.0, value});
      bool in_tissue = true;
      for (std::size_t i = 0; i < m.size() && in_tissue; ++i) {
        in_tissue = m[i] == 0.0f || c.magnitude[i] > 0.0f;
      }
      if (in_tissue) {
        les.center = p;
        placed = true;
      }
    }
    if (!placed) {
      throw ConfigError("could not place a lesion of radius " + std::to_string(radius) + " in the tissue support");
    }
  }
  PhantomCase out = c;
  out.lesions.push_back(les);
  if (value == 0.0) {
    return out;
  }
  const Tensor<float> m = lesion_mask(g, les);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] > 0.0f) {
      out.truth[i] = static_cast<float>(value);
      if (out.kind == PhantomKind::Qsm) {
        out.magnitude[i] *= kind == LesionKind::Hemorrhage ? 0.4f : 0.9f;
      } else {
        out.magnitude[i] = static_cast<float>(value);
      }
    }
  }
  regenerate_measurement(out);
  return out;
}

} // namespace fine
