#include "fine/phantom/patches.hpp"

#include <cmath>
#include <numbers>

namespace fine {

template <typename T>
std::vector<Tensor<T>> extract_patches(const Tensor<T> &volume, const Shape &patch_shape, const Shape &stride)
{
  const std::size_t rank = volume.rank();
  if (patch_shape.size() != rank || stride.size() != rank) {
    throw ShapeError("extract_patches: patch " + shape_string(patch_shape) + " and stride " + shape_string(stride) +
                     " must match volume rank " + std::to_string(rank));
  }
  std::vector<std::size_t> counts(rank);
  for (std::size_t a = 0; a < rank; ++a) {
    if (patch_shape[a] == 0 || patch_shape[a] > volume.extent(a)) {
      throw ShapeError("extract_patches: patch " + shape_string(patch_shape) + " larger than volume " +
                       shape_string(volume.shape()));
    }
    if (stride[a] == 0) {
      throw ConfigError("extract_patches: stride must be positive");
    }
    counts[a] = (volume.extent(a) - patch_shape[a]) / stride[a] + 1;
  }
  const std::size_t total = element_count(counts);
  const std::size_t patch_size = element_count(patch_shape);
  std::vector<Tensor<T>> out;
  out.reserve(total);
  std::vector<std::size_t> origin(rank), pos(rank);
  for (std::size_t p = 0; p < total; ++p) {
    std::size_t rem = p;
    for (std::size_t a = rank; a-- > 0;) {
      origin[a] = (rem % counts[a]) * stride[a];
      rem /= counts[a];
    }
    Tensor<T> t(patch_shape);
    for (std::size_t i = 0; i < patch_size; ++i) {
      std::size_t r = i, src = 0;
      for (std::size_t a = rank; a-- > 0;) {
        pos[a] = r % patch_shape[a] + origin[a];
        r /= patch_shape[a];
      }
      for (std::size_t a = 0; a < rank; ++a) {
        src += pos[a] * volume.stride(a);
      }
      t[i] = volume[src];
    }
    out.push_back(std::move(t));
  }
  return out;
}

template <typename T>
Tensor<T> augment_rotate(const Tensor<T> &patch, double angle_deg)
{
  if (std::abs(angle_deg) > 15.0) {
    throw ConfigError("rotation angle must lie within +-15 degrees, got " + std::to_string(angle_deg));
  }
  if (patch.rank() < 2) {
    throw ShapeError("augment_rotate needs at least two axes");
  }
  if (angle_deg == 0.0) {
    return patch;
  }
  const std::size_t n0 = patch.extent(0), n1 = patch.extent(1);
  const std::size_t inner = patch.size() / (n0 * n1);
  const double th = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  const double c0 = (static_cast<double>(n0) - 1.0) / 2.0, c1 = (static_cast<double>(n1) - 1.0) / 2.0;
  Tensor<T> out(patch.shape());
  auto sample = [&](long i, long j, std::size_t k) -> T {
    if (i < 0 || j < 0 || i >= static_cast<long>(n0) || j >= static_cast<long>(n1)) {
      return T{};
    }
    return patch[(static_cast<std::size_t>(i) * n1 + static_cast<std::size_t>(j)) * inner + k];
  };
  for (std::size_t i = 0; i < n0; ++i) {
    for (std::size_t j = 0; j < n1; ++j) {
      // Inverse mapping: source position of output pixel (i, j).
      const double di = static_cast<double>(i) - c0, dj = static_cast<double>(j) - c1;
      const double si = c * di + s * dj + c0, sj = -s * di + c * dj + c1;
      const double fi = std::floor(si), fj = std::floor(sj);
      const auto i0 = static_cast<long>(fi), j0 = static_cast<long>(fj);
      const auto wi = static_cast<real_t<T>>(si - fi), wj = static_cast<real_t<T>>(sj - fj);
      const real_t<T> one(1);
      for (std::size_t k = 0; k < inner; ++k) {
        out[(i * n1 + j) * inner + k] = (one - wi) * (one - wj) * sample(i0, j0, k) +
                                        (one - wi) * wj * sample(i0, j0 + 1, k) +
                                        wi * (one - wj) * sample(i0 + 1, j0, k) + wi * wj * sample(i0 + 1, j0 + 1, k);
      }
    }
  }
  return out;
}

template std::vector<Tensor<float>> extract_patches<float>(const Tensor<float> &, const Shape &, const Shape &);
template std::vector<Tensor<double>> extract_patches<double>(const Tensor<double> &, const Shape &, const Shape &);
template std::vector<Tensor<cfloat>> extract_patches<cfloat>(const Tensor<cfloat> &, const Shape &, const Shape &);
template Tensor<float> augment_rotate<float>(const Tensor<float> &, double);
template Tensor<double> augment_rotate<double>(const Tensor<double> &, double);
template Tensor<cfloat> augment_rotate<cfloat>(const Tensor<cfloat> &, double);

} // namespace fine
