#include "fine/core/fft.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace fine {

bool is_power_of_two(std::size_t n)
{
  return n != 0 && (n & (n - 1)) == 0;
}

std::vector<std::size_t> all_axes(const Shape &shape)
{
  std::vector<std::size_t> axes(shape.size());
  for (std::size_t a = 0; a < shape.size(); ++a) {
    axes[a] = a;
  }
  return axes;
}

namespace {

template <typename R>
struct Radix2Plan
{
  std::size_t n = 0;
  std::vector<std::size_t> bitrev;
  std::vector<std::complex<R>> twiddle; // exp(-2 pi i k / n), k < n/2

  explicit Radix2Plan(std::size_t len)
    : n(len)
    , bitrev(len)
    , twiddle(len / 2)
  {
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) {
      ++bits;
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) {
        r |= ((i >> b) & 1u) << (bits - 1 - b);
      }
      bitrev[i] = r;
    }
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle[k] = std::complex<R>(static_cast<R>(std::cos(ang)), static_cast<R>(std::sin(ang)));
    }
  }

  void run(std::complex<R> *x, bool inverse) const
  {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = bitrev[i];
      if (i < j) {
        std::swap(x[i], x[j]);
      }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t step = n / len;
      for (std::size_t start = 0; start < n; start += len) {
        for (std::size_t j = 0; j < half; ++j) {
          std::complex<R> w = twiddle[j * step];
          if (inverse) {
            w = std::conj(w);
          }
          const std::complex<R> a = x[start + j];
          const std::complex<R> b = x[start + j + half];
          // Written out to avoid the NaN-checking complex multiply.
          const R br = b.real() * w.real() - b.imag() * w.imag();
          const R bi = b.real() * w.imag() + b.imag() * w.real();
          x[start + j] = std::complex<R>(a.real() + br, a.imag() + bi);
          x[start + j + half] = std::complex<R>(a.real() - br, a.imag() - bi);
        }
      }
    }
  }
};

} // namespace

template <typename R>
void fft_inplace(Tensor<std::complex<R>> &t, std::span<const std::size_t> axes, bool inverse)
{
  const Shape &shape = t.shape();
  for (auto axis : axes) {
    if (axis >= shape.size()) {
      throw ShapeError("fft axis " + std::to_string(axis) + " out of range for rank " + std::to_string(shape.size()));
    }
    if (!is_power_of_two(shape[axis])) {
      throw SizeError("fft extent " + std::to_string(shape[axis]) + " on axis " + std::to_string(axis) +
                      " is not a power of two");
    }
  }
  std::complex<R> *data = t.raw();
  std::vector<std::complex<R>> line;
  for (auto axis : axes) {
    const std::size_t n = shape[axis];
    if (n == 1) {
      continue;
    }
    const std::size_t inner = t.stride(axis);
    const std::size_t outer = t.size() / (n * inner);
    const Radix2Plan<R> plan(n);
    line.resize(n);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        std::complex<R> *base = data + o * n * inner + i;
        if (inner == 1) {
          plan.run(base, inverse);
          continue;
        }
        for (std::size_t k = 0; k < n; ++k) {
          line[k] = base[k * inner];
        }
        plan.run(line.data(), inverse);
        for (std::size_t k = 0; k < n; ++k) {
          base[k * inner] = line[k];
        }
      }
    }
  }
  if (inverse) {
    std::size_t total = 1;
    for (auto axis : axes) {
      total *= shape[axis];
    }
    const R scale = R(1) / static_cast<R>(total);
    for (auto &v : t.data()) {
      v *= scale;
    }
  }
}

template <typename R>
Tensor<std::complex<R>> fft_nd(const Tensor<std::complex<R>> &t, std::span<const std::size_t> axes)
{
  Tensor<std::complex<R>> out = t;
  fft_inplace(out, axes, false);
  return out;
}

template <typename R>
Tensor<std::complex<R>> ifft_nd(const Tensor<std::complex<R>> &t, std::span<const std::size_t> axes)
{
  Tensor<std::complex<R>> out = t;
  fft_inplace(out, axes, true);
  return out;
}

namespace {

AnyTensor dispatch(const AnyTensor &t, std::span<const std::size_t> axes, bool inverse)
{
  return std::visit(
    [&](const auto &x) -> AnyTensor {
      using T = typename std::decay_t<decltype(x)>::value_type;
      if constexpr (is_complex_v<T>) {
        auto out = x;
        fft_inplace(out, axes, inverse);
        return out;
      } else {
        throw TypeError(std::string("fft requires complex input, got ") + dtype_name(dtype_of<T>()) +
                        "; promote explicitly");
      }
    },
    t);
}

} // namespace

AnyTensor fft_nd(const AnyTensor &t, std::span<const std::size_t> axes)
{
  return dispatch(t, axes, false);
}

AnyTensor ifft_nd(const AnyTensor &t, std::span<const std::size_t> axes)
{
  return dispatch(t, axes, true);
}

template void fft_inplace<float>(Tensor<cfloat> &, std::span<const std::size_t>, bool);
template void fft_inplace<double>(Tensor<cdouble> &, std::span<const std::size_t>, bool);
template Tensor<cfloat> fft_nd<float>(const Tensor<cfloat> &, std::span<const std::size_t>);
template Tensor<cdouble> fft_nd<double>(const Tensor<cdouble> &, std::span<const std::size_t>);
template Tensor<cfloat> ifft_nd<float>(const Tensor<cfloat> &, std::span<const std::size_t>);
template Tensor<cdouble> ifft_nd<double>(const Tensor<cdouble> &, std::span<const std::size_t>);

} // namespace fine
