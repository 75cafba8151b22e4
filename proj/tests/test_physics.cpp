#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fine/core/tensor_ops.hpp"
#include "fine/physics/dipole.hpp"
#include "fine/physics/noise.hpp"
#include "fine/physics/operators.hpp"
#include "fine/physics/sampling.hpp"

using namespace fine;

namespace {

template <typename T>
Tensor<T> random_real(const Shape &s, unsigned seed)
{
  std::mt19937 rng(seed);
  std::normal_distribution<double> n;
  Tensor<T> t(s);
  for (auto &v : t.data()) v = static_cast<T>(n(rng));
  return t;
}

template <typename R>
Tensor<std::complex<R>> random_complex(const Shape &s, unsigned seed)
{
  std::mt19937 rng(seed);
  std::normal_distribution<double> n;
  Tensor<std::complex<R>> t(s);
  for (auto &v : t.data()) v = {static_cast<R>(n(rng)), static_cast<R>(n(rng))};
  return t;
}

// Spatial dipole kernel by direct inverse DFT of the k-space formula, then a
// brute-force circular convolution.
Tensor<double> spatial_dipole_field(const Tensor<double> &chi)
{
  const std::size_t N = chi.extent(0);
  auto freq = [&](std::size_t n) { return (n < N / 2 ? double(n) : double(n) - double(N)) / double(N); };
  Tensor<double> h({N, N, N});
  for (std::size_t x = 0; x < N; ++x)
    for (std::size_t y = 0; y < N; ++y)
      for (std::size_t z = 0; z < N; ++z) {
        cdouble acc = 0;
        for (std::size_t u = 0; u < N; ++u)
          for (std::size_t v = 0; v < N; ++v)
            for (std::size_t w = 0; w < N; ++w) {
              const double kx = freq(u), ky = freq(v), kz = freq(w);
              const double k2 = kx * kx + ky * ky + kz * kz;
              const double d = k2 > 0 ? 1.0 / 3.0 - kz * kz / k2 : 0.0;
              const double ph = 2.0 * std::numbers::pi * double(u * x + v * y + w * z) / double(N);
              acc += d * std::polar(1.0, ph);
            }
        h.at(x, y, z) = acc.real() / double(N * N * N);
      }
  Tensor<double> f({N, N, N});
  for (std::size_t x = 0; x < N; ++x)
    for (std::size_t y = 0; y < N; ++y)
      for (std::size_t z = 0; z < N; ++z) {
        double acc = 0;
        for (std::size_t a = 0; a < N; ++a)
          for (std::size_t b = 0; b < N; ++b)
            for (std::size_t c = 0; c < N; ++c)
              acc += chi.at(a, b, c) * h.at((x + N - a) % N, (y + N - b) % N, (z + N - c) % N);
        f.at(x, y, z) = acc;
      }
  return f;
}

} // namespace

TEST_CASE("dipole kernel special values")
{
  const auto k = make_dipole_kernel<double>({8, 8, 8});
  CHECK(k.values.at(0, 0, 0) == 0.0);
  CHECK(k.values.at(0, 0, 1) == -2.0 / 3.0);
  CHECK(k.values.at(0, 0, 5) == -2.0 / 3.0);
  CHECK(k.values.at(1, 0, 0) == 1.0 / 3.0);
  CHECK(k.values.at(3, 2, 0) == 1.0 / 3.0);
  // kz^2 / |k|^2 == 1/3 when 2 kz^2 == kx^2 + ky^2
  CHECK(k.values.at(1, 1, 1) == 0.0);
  CHECK(k.values.at(7, 1, 7) == 0.0);
  CHECK(k.values.at(2, 2, 2) == 0.0);
  const auto kf = make_dipole_kernel<float>({8, 8, 8});
  CHECK(kf.values.at(0, 0, 1) == -2.0f / 3.0f);
  CHECK(kf.values.at(1, 1, 1) == 0.0f);
}

TEST_CASE("dipole kernel bounds and symmetry")
{
  const auto k = make_dipole_kernel<double>({8, 16, 4}, {1.0, 0.5, 2.0});
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 16; ++j)
      for (std::size_t l = 0; l < 4; ++l) {
        const double d = k.values.at(i, j, l);
        CHECK(d >= -2.0 / 3.0);
        CHECK(d <= 1.0 / 3.0);
        CHECK(d == k.values.at((8 - i) % 8, (16 - j) % 16, (4 - l) % 4));
      }
}

TEST_CASE("dipole kernel follows the b0 axis")
{
  const auto k = make_dipole_kernel<double>({8, 8, 8}, {1, 1, 1}, Axis::X);
  CHECK(k.values.at(1, 0, 0) == -2.0 / 3.0);
  CHECK(k.values.at(0, 0, 1) == 1.0 / 3.0);
  CHECK_THROWS_AS(parse_axis("w"), ConfigError);
  CHECK_THROWS_AS(make_dipole_kernel<double>({8, 8}), ShapeError);
}

TEST_CASE("dipole convolution trivial inputs")
{
  const auto k = make_dipole_kernel<float>({8, 8, 8});
  CHECK(norm(dipole_convolve(k, Tensor<float>({8, 8, 8}))) == 0.0);
  CHECK(norm(dipole_convolve(k, Tensor<float>({8, 8, 8}, 0.7f))) < 1e-5);
  CHECK_THROWS_AS(dipole_convolve(k, Tensor<float>({8, 8, 4})), ShapeError);
}

TEST_CASE("dipole convolution matches a spatial-domain oracle on 8^3")
{
  const auto k = make_dipole_kernel<double>({8, 8, 8});
  Tensor<double> point({8, 8, 8});
  point.at(3, 2, 5) = 1.0;
  CHECK(relative_error(dipole_convolve(k, point), spatial_dipole_field(point)) < 1e-4);
  const auto chi = random_real<double>({8, 8, 8}, 5);
  CHECK(relative_error(dipole_convolve(k, chi), spatial_dipole_field(chi)) < 1e-4);
  const auto kf = make_dipole_kernel<float>({8, 8, 8});
  CHECK(relative_error(cast<double>(dipole_convolve(kf, cast<float>(chi))), spatial_dipole_field(chi)) < 1e-4);
}

TEST_CASE("dipole convolution is linear and self-adjoint")
{
  const auto k = make_dipole_kernel<float>({16, 16, 8});
  const auto x = random_real<float>({16, 16, 8}, 1);
  const auto y = random_real<float>({16, 16, 8}, 2);
  const double lhs = dot(dipole_convolve(k, x), y);
  const double rhs = dot(x, dipole_convolve(k, y));
  CHECK(std::abs(lhs - rhs) / (norm(x) * norm(y)) < 1e-5);
  const auto combo = 2.0f * x + (-0.5f) * y;
  const auto expect = 2.0f * dipole_convolve(k, x) + (-0.5f) * dipole_convolve(k, y);
  CHECK(relative_error(dipole_convolve(k, combo), expect) < 1e-5);
  const auto net = dipole_convolve(k, x.reshaped({1, 16, 16, 8}));
  CHECK(net.shape() == Shape{1, 16, 16, 8});
}

TEST_CASE("sampling mask meets the requested acceleration")
{
  const auto m = make_sampling_mask({64, 64}, 3.24, 0.08, 1);
  CHECK(std::abs(double(m.sampled_count()) - 4096.0 / 3.24) / (4096.0 / 3.24) < 0.02);
  CHECK(std::abs(m.acceleration - 3.24) / 3.24 < 0.02);
  for (auto v : m.mask.data()) CHECK((v == 0.0f || v == 1.0f));
  // central disc of radius 0.08 * 64 / 2 around DC
  const double radius = 0.08 * 64 / 2;
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j) {
      const double r = std::hypot(fft_frequency_index(i, 64), fft_frequency_index(j, 64));
      if (r <= radius) CHECK(m.mask.at(i, j) == 1.0f);
    }
  const auto again = make_sampling_mask({64, 64}, 3.24, 0.08, 1);
  CHECK(again.mask == m.mask);
}

TEST_CASE("sampling mask acceleration holds across 100 seeds")
{
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto m = make_sampling_mask({64, 64}, 3.24, 0.08, s);
    CHECK(std::abs(m.acceleration - 3.24) / 3.24 < 0.02);
  }
}

TEST_CASE("sampling mask limits and errors")
{
  CHECK_THROWS_AS(make_sampling_mask({64, 64}, 1.0, 0.08, 1), ConfigError);
  CHECK_THROWS_AS(make_sampling_mask({64, 64}, 3.0, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(make_sampling_mask({64, 64}, 8.0, 0.9, 1), ConfigError);
  const auto near_full = make_sampling_mask({32, 32}, 1.001, 0.08, 1);
  CHECK(near_full.sampled_count() >= 1022);
}

TEST_CASE("undersampled operator adjoint and unitarity")
{
  const auto m = make_sampling_mask({64, 64}, 3.24, 0.08, 9);
  const auto op = undersampled_operator<float>(m);
  const auto x = random_complex<float>({64, 64}, 1);
  const auto y = random_complex<float>({64, 64}, 2);
  const auto lhs = inner(op.forward(x), y);
  const auto rhs = inner(x, op.adjoint(y));
  CHECK(std::abs(lhs - rhs) / (norm(x) * norm(y)) < 1e-5);
  const auto full = undersampled_operator<float>(full_mask({64, 64}));
  CHECK(relative_error(full.adjoint(full.forward(x)), x) < 1e-5);
  auto zero = m;
  zero.mask.fill(0.0f);
  CHECK(norm(undersample_forward<float>(zero, x)) == 0.0);
  const auto combo = [&] {
    Tensor<cfloat> c(x.shape());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = cfloat(2, 1) * x[i] - y[i];
    return c;
  }();
  const auto ax = op.forward(x), ay = op.forward(y);
  Tensor<cfloat> expect(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) expect[i] = cfloat(2, 1) * ax[i] - ay[i];
  CHECK(relative_error(op.forward(combo), expect) < 1e-5);
}

TEST_CASE("noise statistics and weights")
{
  const Tensor<float> zero({64, 64});
  CHECK(apply_noise(zero, 0.0, 3) == zero);
  const auto noisy = apply_noise(zero, 0.05, 3);
  const double sd = std::sqrt(squared_norm(noisy) / double(noisy.size()));
  CHECK(std::abs(sd - 0.05) / 0.05 < 0.05);
  const auto cn = apply_noise(Tensor<cfloat>({64, 64}), 0.05, 4);
  const double csd = std::sqrt(squared_norm(cn) / double(cn.size()));
  CHECK(std::abs(csd - 0.05) / 0.05 < 0.05);
  CHECK_THROWS_AS(apply_noise(zero, -1.0, 3), ConfigError);
  const auto w = build_noise_weight<float>(NoiseWeightMode::Identity, {4, 4});
  for (auto v : w.weights.data()) CHECK(v == 1.0f);
  Tensor<float> mag({2, 2}, std::vector<float>{1, 2, 4, 0});
  const auto wm = build_noise_weight<float>(NoiseWeightMode::MagnitudeProportional, {2, 2}, &mag);
  CHECK(wm.weights == Tensor<float>({2, 2}, std::vector<float>{0.25f, 0.5f, 1.0f, 0.0f}));
}
