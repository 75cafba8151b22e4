#include "fine/solvers/edge_mask.hpp"

#include <algorithm>
#include <cmath>

#include "fine/solvers/finite_difference.hpp"

namespace fine {

template <typename R>
EdgeMask edge_mask(const Tensor<R> &magnitude, double keep_fraction)
{
  if (!(keep_fraction > 0.0 && keep_fraction < 1.0)) {
    throw ConfigError("edge mask keep_fraction must lie in (0, 1)");
  }
  const Tensor<R> g = gradient(magnitude);
  std::vector<double> mags(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    mags[i] = std::abs(static_cast<double>(g[i]));
  }
  std::vector<double> sorted = mags;
  const auto rank = static_cast<std::size_t>(std::ceil((1.0 - keep_fraction) * static_cast<double>(sorted.size())));
  const std::size_t k = std::clamp<std::size_t>(rank, 1, sorted.size()) - 1;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
  EdgeMask m{Tensor<float>(g.shape(), 1.0f), keep_fraction, sorted[k]};
  for (std::size_t i = 0; i < mags.size(); ++i) {
    if (mags[i] > m.threshold) {
      m.mask[i] = 0.0f;
    }
  }
  return m;
}

EdgeMask no_edges(const Shape &image_shape)
{
  Shape s{image_shape.size()};
  s.insert(s.end(), image_shape.begin(), image_shape.end());
  return EdgeMask{Tensor<float>(s, 1.0f), 0.0, 0.0};
}

template EdgeMask edge_mask<float>(const Tensor<float> &, double);
template EdgeMask edge_mask<double>(const Tensor<double> &, double);

} // namespace fine
