#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "fine/core/tensor_ops.hpp"
#include "fine/net/layers.hpp"

// Slow, obviously-correct reference implementations shared by the unit tests
// and the acceptance suite.
namespace fine::oracle {

template <typename T>
Tensor<T> random_tensor(const Shape &s, std::uint64_t seed, double scale = 1.0)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Tensor<T> t(s);
  for (auto &v : t.data()) {
    if constexpr (is_complex_v<T>) {
      v = T(static_cast<real_t<T>>(n(rng)), static_cast<real_t<T>>(n(rng)));
    } else {
      v = static_cast<T>(n(rng));
    }
  }
  return t;
}

// Direct zero-padded "same" convolution on [C, n0, n1, n2] activations.
inline Tensor<double> naive_conv(const Tensor<double> &in, const Tensor<double> &w, const Tensor<double> &bias,
                                 layers::Dims3 k)
{
  const std::size_t ci = in.extent(0), a = in.extent(1), b = in.extent(2), c = in.extent(3);
  const std::size_t co = bias.size();
  Tensor<double> out({co, a, b, c});
  const long p0 = long(k[0] / 2), p1 = long(k[1] / 2), p2 = long(k[2] / 2);
  for (std::size_t q = 0; q < co; ++q)
    for (std::size_t x = 0; x < a; ++x)
      for (std::size_t y = 0; y < b; ++y)
        for (std::size_t z = 0; z < c; ++z) {
          double s = bias[q];
          for (std::size_t r = 0; r < ci; ++r)
            for (std::size_t t0 = 0; t0 < k[0]; ++t0)
              for (std::size_t t1 = 0; t1 < k[1]; ++t1)
                for (std::size_t t2 = 0; t2 < k[2]; ++t2) {
                  const long X = long(x + t0) - p0, Y = long(y + t1) - p1, Z = long(z + t2) - p2;
                  if (X < 0 || Y < 0 || Z < 0 || X >= long(a) || Y >= long(b) || Z >= long(c)) {
                    continue;
                  }
                  const std::size_t tap = (t0 * k[1] + t1) * k[2] + t2;
                  s += w[(q * ci + r) * k[0] * k[1] * k[2] + tap] * in.at(r, std::size_t(X), std::size_t(Y),
                                                                           std::size_t(Z));
                }
          out.at(q, x, y, z) = s;
        }
  return out;
}

// Gaussian elimination with partial pivoting on a dense row-major system.
inline std::vector<double> dense_solve(std::vector<double> A, std::vector<double> b)
{
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(A[r * n + col]) > std::abs(A[piv * n + col])) {
        piv = r;
      }
    }
    if (A[piv * n + col] == 0.0) {
      throw std::runtime_error("dense_solve: singular matrix");
    }
    for (std::size_t j = 0; j < n; ++j) {
      std::swap(A[col * n + j], A[piv * n + j]);
    }
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = A[r * n + col] / A[col * n + col];
      for (std::size_t j = col; j < n; ++j) {
        A[r * n + j] -= f * A[col * n + j];
      }
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      s -= A[i * n + j] * x[j];
    }
    x[i] = s / A[i * n + i];
  }
  return x;
}

// Dense matrix of a linear map on real vectors of length n, built column by column.
inline std::vector<double> dense_matrix(const std::function<std::vector<double>(const std::vector<double> &)> &f,
                                        std::size_t n)
{
  std::vector<double> M(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    const auto col = f(e);
    for (std::size_t i = 0; i < n; ++i) {
      M[i * n + j] = col[i];
    }
  }
  return M;
}

// Central differences of a scalar function with respect to every entry of x.
inline Tensor<double> numeric_gradient(const std::function<double(const Tensor<double> &)> &f, Tensor<double> x,
                                       double h)
{
  Tensor<double> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double gradient_error(const Tensor<double> &analytic, const Tensor<double> &numeric)
{
  const double scale = std::max(norm(numeric), 1e-300);
  return norm(analytic - numeric) / scale;
}

} // namespace fine::oracle
