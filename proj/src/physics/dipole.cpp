#include "fine/physics/dipole.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "fine/core/fft.hpp"
#include "fine/core/tensor_io.hpp"
#include "fine/core/tensor_ops.hpp"

namespace fine {

Axis parse_axis(const std::string &name)
{
  if (name == "x") {
    return Axis::X;
  }
  if (name == "y") {
    return Axis::Y;
  }
  if (name == "z") {
    return Axis::Z;
  }
  throw ConfigError("b0 axis must be one of x, y, z; got '" + name + "'");
}

const char *axis_name(Axis a)
{
  switch (a) {
  case Axis::X: return "x";
  case Axis::Y: return "y";
  case Axis::Z: return "z";
  }
  return "?";
}

template <typename T>
DipoleKernel<T> make_dipole_kernel(const Shape &grid_shape, std::array<double, 3> voxel_size, Axis b0_axis)
{
  if (grid_shape.size() != 3) {
    throw ShapeError("dipole kernel needs a 3D grid, got " + shape_string(grid_shape));
  }
  for (double d : voxel_size) {
    if (!(d > 0.0)) {
      throw ConfigError("voxel sizes must be positive");
    }
  }
  DipoleKernel<T> k{grid_shape, voxel_size, b0_axis, Tensor<T>(grid_shape)};
  const auto b = static_cast<std::size_t>(b0_axis);
  std::array<double, 3> f{};
  for (std::size_t i = 0; i < grid_shape[0]; ++i) {
    f[0] = fft_frequency_index(i, grid_shape[0]) / (static_cast<double>(grid_shape[0]) * voxel_size[0]);
    for (std::size_t j = 0; j < grid_shape[1]; ++j) {
      f[1] = fft_frequency_index(j, grid_shape[1]) / (static_cast<double>(grid_shape[1]) * voxel_size[1]);
      for (std::size_t l = 0; l < grid_shape[2]; ++l) {
        f[2] = fft_frequency_index(l, grid_shape[2]) / (static_cast<double>(grid_shape[2]) * voxel_size[2]);
        const double k2 = f[0] * f[0] + f[1] * f[1] + f[2] * f[2];
        double d = 0.0;
        if (k2 > 0.0) {
          d = (1.0 - 3.0 * (f[b] * f[b] / k2)) / 3.0;
          if (std::abs(d) < 1e-12) {
            d = 0.0;
          }
        }
        k.values.at(i, j, l) = static_cast<T>(d);
      }
    }
  }
  return k;
}

template <typename T>
Tensor<T> dipole_convolve(const DipoleKernel<T> &kernel, const Tensor<T> &chi)
{
  const bool channel_layout = chi.rank() == 4;
  if (channel_layout && chi.extent(0) != 1) {
    throw ShapeError("dipole_convolve: expected a single channel, got " + shape_string(chi.shape()));
  }
  Shape spatial = chi.shape();
  if (channel_layout) {
    spatial.erase(spatial.begin());
  }
  if (spatial != kernel.grid_shape) {
    throw ShapeError("dipole_convolve: susceptibility " + shape_string(chi.shape()) + " does not match kernel grid " +
                     shape_string(kernel.grid_shape));
  }
  using C = std::complex<T>;
  Tensor<C> spec(spatial);
  for (std::size_t i = 0; i < chi.size(); ++i) {
    spec[i] = C(chi[i], T(0));
  }
  const std::array<std::size_t, 3> axes{0, 1, 2};
  fft_inplace(spec, axes, false);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    spec[i] *= kernel.values[i];
  }
  fft_inplace(spec, axes, true);
  Tensor<T> out(chi.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = spec[i].real();
  }
  return out;
}

template <typename T>
void save_dipole_kernel(const DipoleKernel<T> &k, const std::filesystem::path &dir)
{
  std::filesystem::create_directories(dir);
  save_tensor(k.values, dir / "kernel.fnt");
  nlohmann::json j;
  j["grid_shape"] = k.grid_shape;
  j["voxel_size"] = k.voxel_size;
  j["b0_axis"] = axis_name(k.b0_axis);
  std::ofstream(dir / "kernel.json") << j.dump(2) << "\n";
}

template DipoleKernel<float> make_dipole_kernel<float>(const Shape &, std::array<double, 3>, Axis);
template DipoleKernel<double> make_dipole_kernel<double>(const Shape &, std::array<double, 3>, Axis);
template Tensor<float> dipole_convolve<float>(const DipoleKernel<float> &, const Tensor<float> &);
template Tensor<double> dipole_convolve<double>(const DipoleKernel<double> &, const Tensor<double> &);
template void save_dipole_kernel<float>(const DipoleKernel<float> &, const std::filesystem::path &);
template void save_dipole_kernel<double>(const DipoleKernel<double> &, const std::filesystem::path &);

} // namespace fine
