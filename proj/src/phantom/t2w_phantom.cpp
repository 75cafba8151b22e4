#include <cmath>
#include <numbers>

#include <json.hpp>

#include "fine/core/rng.hpp"
#include "fine/phantom/phantom.hpp"

namespace fine {

namespace {

struct Ellipse
{
  double cx, cy, rx, ry, theta;

  // Normalized elliptical radius of (x, y); 1 on the boundary.
  double rho(double x, double y) const
  {
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(theta), s = std::sin(theta);
    const double u = (c * dx + s * dy) / rx, v = (-s * dx + c * dy) / ry;
    return std::sqrt(u * u + v * v);
  }
};

} // namespace

PhantomCase generate_t2w_phantom(const Shape &grid_shape, const T2wPhantomSpec &spec, std::uint64_t seed)
{
  if (grid_shape.size() != 2) {
    throw ShapeError("t2w phantom needs a 2D grid, got " + shape_string(grid_shape));
  }
  for (auto n : grid_shape) {
    if (n < 8 || (n & (n - 1)) != 0) {
      throw SizeError("t2w phantom extents must be powers of two >= 8, got " + shape_string(grid_shape));
    }
  }
  if (spec.noise_sigma < 0.0 || spec.acceleration < 1.0) {
    throw ConfigError("t2w phantom: invalid noise level or acceleration");
  }
  Rng rng(derive_seed(seed, 0));
  const double n0 = static_cast<double>(grid_shape[0]), n1 = static_cast<double>(grid_shape[1]);
  const double nmin = std::min(n0, n1);
  const Ellipse head{(n0 - 1) / 2 + uniform(rng, -1.5, 1.5), (n1 - 1) / 2 + uniform(rng, -1.5, 1.5),
                     uniform(rng, 0.40, 0.46) * n0, uniform(rng, 0.36, 0.44) * n1, uniform(rng, -0.3, 0.3)};
  const double scalp = uniform(rng, 0.25, 0.40);
  const double white = uniform(rng, 0.35, 0.45);
  const double grey = uniform(rng, 0.55, 0.65);
  const double csf = uniform(rng, 0.85, 0.95);
  const double vent_off = uniform(rng, 0.06, 0.10) * nmin;
  const double vrx = uniform(rng, 0.10, 0.16) * nmin, vry = uniform(rng, 0.04, 0.07) * nmin;
  std::vector<Ellipse> ventricles;
  for (int side : {-1, 1}) {
    ventricles.push_back({head.cx + uniform(rng, -1.0, 1.0), head.cy + side * vent_off, vrx * uniform(rng, 0.85, 1.1),
                          vry * uniform(rng, 0.85, 1.1), head.theta + side * uniform(rng, 0.0, 0.3)});
  }
  std::vector<std::pair<Ellipse, double>> nuclei;
  const int nn = std::uniform_int_distribution<int>(2, 4)(rng);
  for (int i = 0; i < nn; ++i) {
    const double ang = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double rad = uniform(rng, 0.25, 0.55);
    nuclei.push_back({{head.cx + rad * head.rx * std::cos(ang), head.cy + rad * head.ry * std::sin(ang),
                       uniform(rng, 0.04, 0.08) * nmin, uniform(rng, 0.04, 0.08) * nmin, uniform(rng, 0.0, 3.14)},
                      uniform(rng, 0.50, 0.62)});
  }
  std::array<std::array<double, 3>, 3> waves{};
  for (auto &w : waves) {
    w = {uniform(rng, 1.0, 4.0), uniform(rng, 1.0, 4.0), uniform(rng, 0.0, 6.28)};
  }
  const std::array<double, 4> ph{uniform(rng, -0.8, 0.8), uniform(rng, -0.6, 0.6), uniform(rng, -0.6, 0.6),
                                 uniform(rng, -0.4, 0.4)};

  PhantomCase c;
  c.kind = PhantomKind::Undersampled;
  c.seed = seed;
  c.truth = Tensor<float>(grid_shape);
  if (spec.complex_valued) {
    c.phase = Tensor<float>(grid_shape);
  }
  c.noise_sigma = spec.noise_sigma;
  c.noise_seed = derive_seed(seed, 1);
  for (std::size_t i = 0; i < grid_shape[0]; ++i) {
    for (std::size_t j = 0; j < grid_shape[1]; ++j) {
      const double x = static_cast<double>(i), y = static_cast<double>(j);
      const double r = head.rho(x, y);
      double v = 0.0;
      if (r <= 1.0) {
        v = scalp;
      }
      if (r <= 0.9) {
        v = r > 0.75 ? grey : white;
        double tex = 0.0;
        for (const auto &w : waves) {
          tex += std::cos(2.0 * std::numbers::pi * (w[0] * x / n0 + w[1] * y / n1) + w[2]);
        }
        v += 0.01 * tex;
        for (const auto &[e, val] : nuclei) {
          if (e.rho(x, y) <= 1.0) {
            v = val;
          }
        }
        for (const auto &e : ventricles) {
          if (e.rho(x, y) <= 1.0) {
            v = csf;
          }
        }
      }
      c.truth.at(i, j) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      if (spec.complex_valued) {
        const double u = 2.0 * x / (n0 - 1) - 1.0, w = 2.0 * y / (n1 - 1) - 1.0;
        c.phase.at(i, j) = static_cast<float>(ph[0] + ph[1] * u + ph[2] * w + ph[3] * (u * u + w * w));
      }
    }
  }
  c.magnitude = c.truth;
  c.mask = spec.acceleration == 1.0 ? full_mask(grid_shape)
                                    : make_sampling_mask(grid_shape, spec.acceleration, spec.center_fraction,
                                                         spec.mask_seed);
  nlohmann::json js{{"complex_valued", spec.complex_valued}, {"noise_sigma", spec.noise_sigma},
                    {"acceleration", spec.acceleration},     {"center_fraction", spec.center_fraction},
                    {"mask_seed", spec.mask_seed}};
  c.spec_json = js.dump();
  regenerate_measurement(c);
  return c;
}

} // namespace fine
