#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "fine/core/tensor_ops.hpp"
#include "fine/phantom/dataset_io.hpp"
#include "fine/phantom/patches.hpp"
#include "fine/phantom/phantom.hpp"
#include "fine/physics/operators.hpp"
#include "support/oracles.hpp"

using namespace fine;

namespace {

double masked_mean(const Tensor<float> &t, const Tensor<float> &m)
{
  double s = 0.0, n = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    s += m[i] * t[i];
    n += m[i];
  }
  return s / n;
}

} // namespace

TEST_CASE("empty qsm spec gives zero susceptibility and field")
{
  const auto c = generate_qsm_phantom({16, 16, 8}, QsmPhantomSpec::empty(), 3);
  CHECK(norm(c.truth) == 0.0);
  CHECK(norm(c.field) == 0.0);
}

TEST_CASE("sphere field matches the analytic dipole pattern")
{
  const std::size_t N = 64;
  const double a = 8.0, chi = 0.1, c0 = 32.0;
  auto spec = QsmPhantomSpec::empty();
  spec.shapes = {{ShapeFamily::Sphere, {c0, c0, c0}, {a, a, a}, 2, chi}};
  const auto c = generate_qsm_phantom({N, N, N}, spec, 1);
  double volume = 0.0;
  for (auto v : c.truth.data()) volume += v > 0.0f;
  // Exterior field chi V (3 cos^2 - 1) / (4 pi r^3) of the discretized sphere's
  // moment, summed over periodic images; both fields compared with zero mean.
  Tensor<double> oracle({N, N, N});
  const int R = 2;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t k = 0; k < N; ++k) {
        double acc = 0.0;
        for (int p = -R; p <= R; ++p)
          for (int q = -R; q <= R; ++q)
            for (int t = -R; t <= R; ++t) {
              const double x = double(i) - c0 + double(N) * p, y = double(j) - c0 + double(N) * q,
                           z = double(k) - c0 + double(N) * t;
              const double r = std::sqrt(x * x + y * y + z * z);
              if (r > a) acc += chi * volume / (4.0 * std::numbers::pi) * (3.0 * z * z / (r * r) - 1.0) / (r * r * r);
            }
        oracle.at(i, j, k) = acc;
      }
  const double mo = mean(oracle), mf = mean(c.field);
  double num = 0.0, den = 0.0, in_sum = 0.0, in_sq = 0.0, in_n = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t k = 0; k < N; ++k) {
        const double x = double(i) - c0, y = double(j) - c0, z = double(k) - c0;
        const double r = std::sqrt(x * x + y * y + z * z);
        const double f = c.field.at(i, j, k) - mf, o = oracle.at(i, j, k) - mo;
        if (r >= 1.5 * a) {
          num += (f - o) * (f - o);
          den += o * o;
        }
        if (r <= a - 1.5) {
          in_sum += f;
          in_sq += f * f;
          in_n += 1.0;
        }
      }
  CHECK(std::sqrt(num / den) < 1e-2);
  const double in_mean = in_sum / in_n;
  const double in_std = std::sqrt(std::max(0.0, in_sq / in_n - in_mean * in_mean));
  CHECK(in_std < 0.03 * chi / 3.0);
}

TEST_CASE("qsm phantom is seed-deterministic and in distribution")
{
  QsmPhantomSpec spec;
  spec.noise_sigma = 0.001;
  const auto a = generate_qsm_phantom({32, 32, 16}, spec, 9);
  const auto b = generate_qsm_phantom({32, 32, 16}, spec, 9);
  const auto c = generate_qsm_phantom({32, 32, 16}, spec, 10);
  CHECK(a.truth == b.truth);
  CHECK(a.field == b.field);
  CHECK(a.magnitude == b.magnitude);
  CHECK(!(a.truth == c.truth));
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto p = generate_qsm_phantom({32, 32, 16}, spec, s);
    for (auto v : p.truth.data()) {
      CHECK(v <= 0.2f);
      CHECK(v >= -0.1f);
    }
  }
  auto re = a;
  re.field = Tensor<float>();
  regenerate_measurement(re);
  CHECK(re.field == a.field);
}

TEST_CASE("lesion injection")
{
  QsmPhantomSpec spec;
  const auto base = generate_qsm_phantom({64, 64, 32}, spec, 4);
  const auto h = inject_lesion(base, LesionKind::Hemorrhage, 0.63, 5.0, std::array<double, 3>{32, 32, 16});
  REQUIRE(h.lesions.size() == 1);
  const auto m = lesion_mask(h.truth.shape(), h.lesions[0]);
  CHECK(masked_mean(h.truth, m) == doctest::Approx(0.63).epsilon(1e-6));
  CHECK(!(h.field == base.field));

  const auto ms = inject_lesion(base, LesionKind::Ms, 0.1, 3.0);
  const auto ms_mask = lesion_mask(ms.truth.shape(), ms.lesions[0]);
  CHECK(masked_mean(ms.truth, ms_mask) == doctest::Approx(0.1).epsilon(1e-6));
  bool in_tissue = true;
  for (std::size_t i = 0; i < ms.truth.size(); ++i) {
    in_tissue = in_tissue && (ms_mask[i] == 0.0f || base.magnitude[i] > 0.0f);
  }
  CHECK(in_tissue);

  const auto zero = inject_lesion(base, LesionKind::Hemorrhage, 0.0, 5.0);
  CHECK(zero.truth == base.truth);
  CHECK(zero.field == base.field);
  CHECK(zero.lesions.size() == 1);

  CHECK_THROWS_AS(inject_lesion(base, LesionKind::Hemorrhage, 0.3, 5.0), ConfigError);
  CHECK_THROWS_AS(inject_lesion(base, LesionKind::Ms, 0.5, 3.0), ConfigError);
  CHECK_THROWS_AS(inject_lesion(base, LesionKind::Hemorrhage, 0.7, 5.0, std::array<double, 3>{2, 32, 16}),
                  ConfigError);
  CHECK_THROWS_AS(inject_lesion(h, LesionKind::Hemorrhage, 0.7, 5.0, std::array<double, 3>{36, 32, 16}), ConfigError);

  auto two = inject_lesion(h, LesionKind::Hemorrhage, 0.8, 4.0);
  const auto m1 = lesion_mask(two.truth.shape(), two.lesions[0]);
  const auto m2 = lesion_mask(two.truth.shape(), two.lesions[1]);
  CHECK(dot(m1, m2) == 0.0);
}

TEST_CASE("t2w phantom")
{
  T2wPhantomSpec spec;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto c = generate_t2w_phantom({64, 64}, spec, s);
    for (auto v : c.truth.data()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
  const auto a = generate_t2w_phantom({64, 64}, spec, 2);
  CHECK(a.truth == generate_t2w_phantom({64, 64}, spec, 2).truth);
  CHECK(a.kspace == generate_t2w_phantom({64, 64}, spec, 2).kspace);
  CHECK(std::abs(a.mask.acceleration - 3.24) / 3.24 < 0.02);

  T2wPhantomSpec full;
  full.acceleration = 1.0;
  full.complex_valued = true;
  const auto f = generate_t2w_phantom({64, 64}, full, 5);
  CHECK(f.complex_valued());
  const auto recon = undersampled_operator<float>(f.mask).adjoint(f.kspace);
  CHECK(relative_error(recon, f.truth_image()) < 1e-5);

  T2wPhantomSpec noisy;
  noisy.noise_sigma = 0.01;
  const auto n = generate_t2w_phantom({64, 64}, noisy, 5);
  for (std::size_t i = 0; i < n.kspace.size(); ++i) {
    if (n.mask.mask[i] == 0.0f) CHECK(n.kspace[i] == cfloat(0.0f, 0.0f));
  }
  const auto les = inject_lesion(a, LesionKind::Ms, 0.95, 2.5);
  CHECK(masked_mean(les.truth, lesion_mask(les.truth.shape(), les.lesions[0])) == doctest::Approx(0.95));
  CHECK_THROWS_AS(inject_lesion(a, LesionKind::Hemorrhage, 0.7, 2.0), ConfigError);
}

TEST_CASE("patch extraction counts")
{
  const Tensor<float> vol({64, 64, 64});
  CHECK(extract_patches(vol, {64, 64, 32}, {64, 64, 32}).size() == 2);
  const auto single = extract_patches(oracle::random_tensor<float>({8, 4}, 1), {8, 4}, {1, 1});
  REQUIRE(single.size() == 1);
  Tensor<float> small({4, 4});
  for (std::size_t i = 0; i < 16; ++i) small[i] = float(i);
  const auto p = extract_patches(small, {2, 2}, {1, 1});
  CHECK(p.size() == 9);
  CHECK(p[4] == Tensor<float>({2, 2}, std::vector<float>{5, 6, 9, 10}));
  CHECK(extract_patches(vol, {32, 32, 16}, {16, 16, 16}).size() == 3 * 3 * 4);
  CHECK_THROWS_AS(extract_patches(small, {5, 2}, {1, 1}), ShapeError);
}

TEST_CASE("in-plane rotation")
{
  const auto x = oracle::random_tensor<float>({16, 16, 4}, 2);
  CHECK(augment_rotate(x, 0.0) == x);
  CHECK_THROWS_AS(augment_rotate(x, 20.0), ConfigError);
  Tensor<double> smooth({64, 64});
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j) {
      const double di = double(i) - 31.5, dj = double(j) - 31.5;
      smooth.at(i, j) = std::exp(-(di * di + dj * dj) / 200.0) * (1.0 + 0.3 * std::cos(0.15 * di));
    }
  const auto back = augment_rotate(augment_rotate(smooth, 15.0), -15.0);
  CHECK(relative_error(back, smooth) < 5e-2);
  const auto rc = augment_rotate(Tensor<double>({32, 32}, 2.0), 12.0);
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j < 32; ++j) {
      const double di = double(i) - 15.5, dj = double(j) - 15.5;
      if (std::sqrt(di * di + dj * dj) <= 14.5) CHECK(rc.at(i, j) == doctest::Approx(2.0));
    }
}

TEST_CASE("case directories round trip")
{
  const auto dir = std::filesystem::temp_directory_path() / "fine_test_cases";
  std::filesystem::remove_all(dir);
  QsmPhantomSpec qs;
  qs.noise_sigma = 0.002;
  const auto q = inject_lesion(generate_qsm_phantom({32, 32, 16}, qs, 3), LesionKind::Hemorrhage, 0.7, 3.0);
  save_case(q, dir / "q");
  const auto q2 = load_case(dir / "q");
  CHECK(q2.truth == q.truth);
  CHECK(q2.field == q.field);
  CHECK(q2.lesions.size() == 1);
  CHECK(q2.lesions[0].center == q.lesions[0].center);
  auto regen = q2;
  regenerate_measurement(regen);
  CHECK(regen.field == q.field);

  T2wPhantomSpec ts;
  ts.complex_valued = true;
  ts.noise_sigma = 0.01;
  const auto t = generate_t2w_phantom({32, 32}, ts, 8);
  save_case(t, dir / "t");
  const auto t2 = load_case(dir / "t");
  CHECK(t2.kspace == t.kspace);
  CHECK(t2.phase == t.phase);
  CHECK(t2.mask.mask == t.mask.mask);
  auto tr = t2;
  regenerate_measurement(tr);
  CHECK(tr.kspace == t.kspace);
}
