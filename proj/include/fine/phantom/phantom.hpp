#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fine/physics/dipole.hpp"
#include "fine/physics/sampling.hpp"

namespace fine {

enum class PhantomKind { Qsm, Undersampled };
enum class LesionKind { Hemorrhage, Ms };
enum class ShapeFamily { Sphere, Ellipsoid, Cylinder };

const char *phantom_kind_name(PhantomKind k);
PhantomKind parse_phantom_kind(const std::string &s);
const char *lesion_kind_name(LesionKind k);
LesionKind parse_lesion_kind(const std::string &s);

struct Lesion
{
  LesionKind kind = LesionKind::Hemorrhage;
  std::array<double, 3> center{}; // voxel coordinates; third entry unused in 2D
  double radius = 0.0;
  double value = 0.0;
};

// Axis-aligned solid. Cylinders run along `axis` with radii[axis] as half-length.
struct PhantomShape
{
  ShapeFamily family = ShapeFamily::Sphere;
  std::array<double, 3> center{};
  std::array<double, 3> radii{};
  int axis = 2;
  double value = 0.0;
};

struct QsmPhantomSpec
{
  std::vector<PhantomShape> shapes; // painted before the random ones
  int random_shapes_min = 5;
  int random_shapes_max = 15;
  double chi_min = -0.1;
  double chi_max = 0.2;
  bool head_support = true; // ellipsoidal tissue region with a smooth background
  double background_amplitude = 0.02;
  double noise_sigma = 0.0;
  std::array<double, 3> voxel_size{1.0, 1.0, 1.0};
  Axis b0_axis = Axis::Z;

  // No shapes, no support, no noise.
  static QsmPhantomSpec empty();
};

struct T2wPhantomSpec
{
  bool complex_valued = false;
  double noise_sigma = 0.0;
  double acceleration = 3.24; // 1 means fully sampled
  double center_fraction = 0.08;
  std::uint64_t mask_seed = 0;
};

struct PhantomCase
{
  PhantomKind kind = PhantomKind::Qsm;
  std::uint64_t seed = 0;
  Tensor<float> truth;     // chi in ppm, or T2w magnitude in [0, 1]
  Tensor<float> phase;     // complex T2w variant only
  Tensor<float> field;     // QSM measurement
  Tensor<cfloat> kspace;   // undersampled measurement
  Tensor<float> magnitude; // anatomy image used by the edge mask
  std::vector<Lesion> lesions;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
  std::array<double, 3> voxel_size{1.0, 1.0, 1.0};
  Axis b0_axis = Axis::Z;
  SamplingMask mask;
  std::string spec_json; // generator settings, kept for the dataset manifest

  bool complex_valued() const { return !phase.empty(); }
  // truth * exp(i phase) for undersampled cases.
  Tensor<cfloat> truth_image() const;
};

PhantomCase generate_qsm_phantom(const Shape &grid_shape, const QsmPhantomSpec &spec, std::uint64_t seed);
PhantomCase generate_t2w_phantom(const Shape &grid_shape, const T2wPhantomSpec &spec, std::uint64_t seed);

// Recomputes field or k-space from truth, the recorded operator and noise seed.
void regenerate_measurement(PhantomCase &c);

// Value ranges a lesion of this kind may take in this application.
std::pair<double, double> lesion_value_range(PhantomKind app, LesionKind kind);

// Overwrites truth inside a sphere (disc in 2D) and regenerates the measurement.
// A value of 0 only records the lesion. Without a center, one is drawn inside
// the tissue support from the case seed.
PhantomCase inject_lesion(const PhantomCase &c, LesionKind kind, double value, double radius,
                          std::optional<std::array<double, 3>> center = std::nullopt);

// Binary mask of one lesion on the case grid.
Tensor<float> lesion_mask(const Shape &grid_shape, const Lesion &lesion);

} // namespace fine
