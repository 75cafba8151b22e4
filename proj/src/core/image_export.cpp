#include "fine/core/image_export.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace fine {

std::vector<std::uint16_t> window_to_gray(std::span<const double> values, Window window)
{
  if (!(window.lo < window.hi)) {
    throw ConfigError("image window requires lo < hi");
  }
  std::vector<std::uint16_t> gray(values.size());
  const double span = window.hi - window.lo;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::clamp(values[i], window.lo, window.hi);
    gray[i] = static_cast<std::uint16_t>(std::lround((v - window.lo) / span * 65535.0));
  }
  return gray;
}

template <typename T>
void export_image(const Tensor<T> &t, const std::filesystem::path &path, Window window)
{
  if (t.rank() != 2) {
    throw ShapeError("export_image needs a 2D tensor, got " + shape_string(t.shape()));
  }
  std::vector<double> values(t.data().begin(), t.data().end());
  const auto gray = window_to_gray(values, window);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  f << "P5\n" << t.extent(1) << " " << t.extent(0) << "\n65535\n";
  for (auto g : gray) {
    const char b[2] = {static_cast<char>(g >> 8), static_cast<char>(g & 0xff)};
    f.write(b, 2);
  }
  if (!f) {
    throw IoError("write failed: " + path.string());
  }
}

template void export_image<float>(const Tensor<float> &, const std::filesystem::path &, Window);
template void export_image<double>(const Tensor<double> &, const std::filesystem::path &, Window);

} // namespace fine
