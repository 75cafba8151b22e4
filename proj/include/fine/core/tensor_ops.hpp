#pragma once

#include <cmath>
#include <complex>

#include "fine/core/tensor.hpp"

// Elementwise helpers shared by the solvers, physics operators and metrics.
namespace fine {

template <typename T>
Tensor<T> operator+(const Tensor<T> &a, const Tensor<T> &b)
{
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = a[i] + b[i];
  }
  return out;
}

template <typename T>
Tensor<T> operator-(const Tensor<T> &a, const Tensor<T> &b)
{
  require_same_shape(a, b, "subtract");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = a[i] - b[i];
  }
  return out;
}

template <typename T, typename S>
Tensor<T> operator*(S s, const Tensor<T> &a)
{
  Tensor<T> out(a.shape());
  const T sv = static_cast<T>(s);
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = sv * a[i];
  }
  return out;
}

// y += alpha * x
template <typename T, typename S>
void axpy(S alpha, const Tensor<T> &x, Tensor<T> &y)
{
  require_same_shape(x, y, "axpy");
  const T a = static_cast<T>(alpha);
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] += a * x[i];
  }
}

template <typename T>
Tensor<T> hadamard(const Tensor<T> &a, const Tensor<real_t<T>> &w)
{
  if (a.shape() != w.shape()) {
    throw ShapeError("hadamard: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(w.shape()));
  }
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = a[i] * w[i];
  }
  return out;
}

// Real part of the Hermitian inner product, accumulated in double.
template <typename T>
double dot(const Tensor<T> &a, const Tensor<T> &b)
{
  require_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if constexpr (is_complex_v<T>) {
      acc += static_cast<double>(a[i].real()) * b[i].real() + static_cast<double>(a[i].imag()) * b[i].imag();
    } else {
      acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
  }
  return acc;
}

// Full complex inner product <a, b> = sum conj(a) b.
template <typename T>
std::complex<double> inner(const Tensor<T> &a, const Tensor<T> &b)
{
  require_same_shape(a, b, "inner");
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += std::conj(std::complex<double>(a[i])) * std::complex<double>(b[i]);
  }
  return acc;
}

template <typename T>
double squared_norm(const Tensor<T> &a)
{
  double acc = 0.0;
  for (const auto &v : a.data()) {
    acc += static_cast<double>(std::norm(v));
  }
  return acc;
}

template <typename T>
double norm(const Tensor<T> &a)
{
  return std::sqrt(squared_norm(a));
}

template <typename T>
double relative_error(const Tensor<T> &x, const Tensor<T> &ref)
{
  const double denom = norm(ref);
  const double num = norm(x - ref);
  return denom > 0.0 ? num / denom : num;
}

template <typename T>
bool all_finite(const Tensor<T> &a)
{
  for (const auto &v : a.data()) {
    if constexpr (is_complex_v<T>) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        return false;
      }
    } else if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

template <typename U, typename T>
Tensor<U> cast(const Tensor<T> &a)
{
  Tensor<U> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if constexpr (is_complex_v<U> && is_complex_v<T>) {
      out[i] = U(static_cast<real_t<U>>(a[i].real()), static_cast<real_t<U>>(a[i].imag()));
    } else if constexpr (is_complex_v<U>) {
      out[i] = U(static_cast<real_t<U>>(a[i]), 0);
    } else {
      static_assert(!is_complex_v<T>, "use real_part() to drop the imaginary part");
      out[i] = static_cast<U>(a[i]);
    }
  }
  return out;
}

template <typename R>
Tensor<std::complex<R>> to_complex(const Tensor<R> &a)
{
  return cast<std::complex<R>>(a);
}

template <typename R>
Tensor<R> real_part(const Tensor<std::complex<R>> &a)
{
  Tensor<R> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = a[i].real();
  }
  return out;
}

template <typename R>
Tensor<R> abs_value(const Tensor<std::complex<R>> &a)
{
  Tensor<R> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = std::abs(a[i]);
  }
  return out;
}

template <typename T>
double mean(const Tensor<T> &a)
  requires(!is_complex_v<T>)
{
  double acc = 0.0;
  for (const auto &v : a.data()) {
    acc += v;
  }
  return acc / static_cast<double>(a.size());
}

} // namespace fine
