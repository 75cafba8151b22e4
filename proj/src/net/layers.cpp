#include "fine/net/layers.hpp"

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

namespace fine::layers {

namespace {

struct Geometry
{
  std::size_t channels, n0, n1, n2;
  std::size_t volume() const { return n0 * n1 * n2; }
};

Geometry geometry_of(const Shape &s, const char *where)
{
  if (s.size() != 4) {
    throw ShapeError(std::string(where) + ": expected [C, n0, n1, n2], got " + shape_string(s));
  }
  return {s[0], s[1], s[2], s[3]};
}

// Valid output index range [lo, hi) for tap offset d = t - pad on an axis of extent n.
inline void tap_range(std::size_t n, std::ptrdiff_t d, std::size_t &lo, std::size_t &hi)
{
  const auto sn = static_cast<std::ptrdiff_t>(n);
  lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -d));
  hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(sn - d, 0, sn));
}

// dst[x] += sum_t w[t] * src[x + t - p] over valid x for a row of length n.
template <typename T>
inline void row_accumulate(T *__restrict dst, const T *__restrict src, const T *w, std::size_t k, std::size_t n)
{
  if (k == 1) {
    const T w0 = w[0];
    for (std::size_t x = 0; x < n; ++x) {
      dst[x] += w0 * src[x];
    }
    return;
  }
  if (k == 3 && n >= 2) {
    const T w0 = w[0], w1 = w[1], w2 = w[2];
    dst[0] += w1 * src[0] + w2 * src[1];
    for (std::size_t x = 1; x + 1 < n; ++x) {
      dst[x] += w0 * src[x - 1] + w1 * src[x] + w2 * src[x + 1];
    }
    dst[n - 1] += w0 * src[n - 2] + w1 * src[n - 1];
    return;
  }
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  for (std::size_t t = 0; t < k; ++t) {
    std::size_t lo, hi;
    tap_range(n, static_cast<std::ptrdiff_t>(t) - pad, lo, hi);
    const T wt = w[t];
    const T *s = src + (static_cast<std::ptrdiff_t>(t) - pad);
    for (std::size_t x = lo; x < hi; ++x) {
      dst[x] += wt * s[x];
    }
  }
}

// Generic path: any odd kernel and row length.
template <typename T>
void conv_accumulate_generic(const Tensor<T> &in, const T *weight, std::size_t cout, Dims3 kernel, T *out)
{
  const Geometry g = geometry_of(in.shape(), "conv");
  const std::size_t cin = g.channels;
  const std::size_t taps = kernel[0] * kernel[1] * kernel[2];
  const auto p0 = static_cast<std::ptrdiff_t>(kernel[0] / 2);
  const auto p1 = static_cast<std::ptrdiff_t>(kernel[1] / 2);
  const T *src = in.raw();
  const std::size_t vol = g.volume();
  for (std::size_t co = 0; co < cout; ++co) {
    T *oc = out + co * vol;
    for (std::size_t i0 = 0; i0 < g.n0; ++i0) {
      for (std::size_t i1 = 0; i1 < g.n1; ++i1) {
        T *row = oc + (i0 * g.n1 + i1) * g.n2;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const T *ic = src + ci * vol;
          const T *wc = weight + (co * cin + ci) * taps;
          for (std::size_t t0 = 0; t0 < kernel[0]; ++t0) {
            const auto j0 = static_cast<std::ptrdiff_t>(i0) + static_cast<std::ptrdiff_t>(t0) - p0;
            if (j0 < 0 || j0 >= static_cast<std::ptrdiff_t>(g.n0)) {
              continue;
            }
            for (std::size_t t1 = 0; t1 < kernel[1]; ++t1) {
              const auto j1 = static_cast<std::ptrdiff_t>(i1) + static_cast<std::ptrdiff_t>(t1) - p1;
              if (j1 < 0 || j1 >= static_cast<std::ptrdiff_t>(g.n1)) {
                continue;
              }
              const T *srow = ic + (static_cast<std::size_t>(j0) * g.n1 + static_cast<std::size_t>(j1)) * g.n2;
              row_accumulate(row, srow, wc + (t0 * kernel[1] + t1) * kernel[2], kernel[2], g.n2);
            }
          }
        }
      }
    }
  }
}

// Copy of a [C, n0, n1, n2] activation with `pad` zeros on both ends of each
// innermost row, so the row kernels below need no boundary tests.
template <typename T>
std::vector<T> pad_rows(const T *src, const Geometry &g, std::size_t pad)
{
  const std::size_t rows = g.channels * g.n0 * g.n1;
  const std::size_t width = g.n2 + 2 * pad;
  std::vector<T> out(rows * width, T(0));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(src + r * g.n2, g.n2, out.data() + r * width + pad);
  }
  return out;
}

// SIMD chunk of at most 64 bytes covering part of an N2-long row.
template <typename T, std::size_t N2>
struct RowVec
{
  static constexpr std::size_t lanes = std::min<std::size_t>(N2, 64 / sizeof(T));
  static constexpr std::size_t chunks = N2 / lanes;
  typedef T type __attribute__((vector_size(lanes * sizeof(T))));

  static type load(const T *p)
  {
    type v;
    std::memcpy(&v, p, sizeof(type));
    return v;
  }
  static void store(T *p, const type &v) { std::memcpy(p, &v, sizeof(type)); }
};

// Output rows for CB output channels at once; accumulators stay in registers.
template <typename T, std::size_t CB, std::size_t K2, std::size_t N2>
void conv_rows_block(const T *padded, const Geometry &g, Dims3 kernel, const T *weight, std::size_t co0, T *out)
{
  using RV = RowVec<T, N2>;
  using V = typename RV::type;
  constexpr std::size_t L = RV::lanes;
  constexpr std::size_t NC = RV::chunks;
  const std::size_t cin = g.channels;
  const std::size_t taps = kernel[0] * kernel[1] * K2;
  const std::size_t width = N2 + 2 * (K2 / 2);
  const auto p0 = static_cast<std::ptrdiff_t>(kernel[0] / 2);
  const auto p1 = static_cast<std::ptrdiff_t>(kernel[1] / 2);
  const std::size_t vol = g.volume();
  for (std::size_t i0 = 0; i0 < g.n0; ++i0) {
    for (std::size_t i1 = 0; i1 < g.n1; ++i1) {
      V acc[CB][NC];
      for (std::size_t c = 0; c < CB; ++c) {
        const T *o = out + (co0 + c) * vol + (i0 * g.n1 + i1) * N2;
        for (std::size_t k = 0; k < NC; ++k) {
          acc[c][k] = RV::load(o + k * L);
        }
      }
      for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t t0 = 0; t0 < kernel[0]; ++t0) {
          const auto j0 = static_cast<std::ptrdiff_t>(i0) + static_cast<std::ptrdiff_t>(t0) - p0;
          if (j0 < 0 || j0 >= static_cast<std::ptrdiff_t>(g.n0)) {
            continue;
          }
          for (std::size_t t1 = 0; t1 < kernel[1]; ++t1) {
            const auto j1 = static_cast<std::ptrdiff_t>(i1) + static_cast<std::ptrdiff_t>(t1) - p1;
            if (j1 < 0 || j1 >= static_cast<std::ptrdiff_t>(g.n1)) {
              continue;
            }
            const T *s = padded + ((ci * g.n0 + static_cast<std::size_t>(j0)) * g.n1 + static_cast<std::size_t>(j1)) * width;
            const std::size_t tbase = (t0 * kernel[1] + t1) * K2;
            for (std::size_t t2 = 0; t2 < K2; ++t2) {
              V sv[NC];
              for (std::size_t k = 0; k < NC; ++k) {
                sv[k] = RV::load(s + t2 + k * L);
              }
              for (std::size_t c = 0; c < CB; ++c) {
                const T w = weight[((co0 + c) * cin + ci) * taps + tbase + t2];
                for (std::size_t k = 0; k < NC; ++k) {
                  acc[c][k] += w * sv[k];
                }
              }
            }
          }
        }
      }
      for (std::size_t c = 0; c < CB; ++c) {
        T *o = out + (co0 + c) * vol + (i0 * g.n1 + i1) * N2;
        for (std::size_t k = 0; k < NC; ++k) {
          RV::store(o + k * L, acc[c][k]);
        }
      }
    }
  }
}

template <typename T, std::size_t K2, std::size_t N2>
void conv_accumulate_fast(const Tensor<T> &in, const T *weight, std::size_t cout, Dims3 kernel, T *out)
{
  const Geometry g = geometry_of(in.shape(), "conv");
  const auto padded = pad_rows(in.raw(), g, K2 / 2);
  std::size_t co = 0;
  for (; co + 4 <= cout; co += 4) {
    conv_rows_block<T, 4, K2, N2>(padded.data(), g, kernel, weight, co, out);
  }
  for (; co < cout; ++co) {
    conv_rows_block<T, 1, K2, N2>(padded.data(), g, kernel, weight, co, out);
  }
}

template <typename T, std::size_t K2>
void conv_accumulate_rows(const Tensor<T> &in, const T *weight, std::size_t cout, Dims3 kernel, T *out)
{
  switch (in.shape()[3]) {
  case 4: return conv_accumulate_fast<T, K2, 4>(in, weight, cout, kernel, out);
  case 8: return conv_accumulate_fast<T, K2, 8>(in, weight, cout, kernel, out);
  case 16: return conv_accumulate_fast<T, K2, 16>(in, weight, cout, kernel, out);
  case 32: return conv_accumulate_fast<T, K2, 32>(in, weight, cout, kernel, out);
  case 64: return conv_accumulate_fast<T, K2, 64>(in, weight, cout, kernel, out);
  default: return conv_accumulate_generic(in, weight, cout, kernel, out);
  }
}

template <typename T>
void conv_accumulate(const Tensor<T> &in, const T *weight, std::size_t cout, Dims3 kernel, T *out)
{
  if (kernel[2] == 1) {
    return conv_accumulate_rows<T, 1>(in, weight, cout, kernel, out);
  }
  if (kernel[2] == 3) {
    return conv_accumulate_rows<T, 3>(in, weight, cout, kernel, out);
  }
  conv_accumulate_generic(in, weight, cout, kernel, out);
}

// dW[co, ci, t] = sum_i g[co, i] * in[ci, i + t - p] for CB output channels and
// one kernel row (t0, t1); lane partial sums are reduced in a fixed order.
template <typename T, std::size_t CB, std::size_t K2, std::size_t N2>
void weight_grad_block(const T *padded, const T *grad, const Geometry &g, Dims3 kernel, std::size_t co0,
                       std::size_t ci, T *dw)
{
  using RV = RowVec<T, N2>;
  using V = typename RV::type;
  constexpr std::size_t L = RV::lanes;
  constexpr std::size_t NC = RV::chunks;
  const std::size_t cin = g.channels;
  const std::size_t taps = kernel[0] * kernel[1] * K2;
  const std::size_t width = N2 + 2 * (K2 / 2);
  const auto p0 = static_cast<std::ptrdiff_t>(kernel[0] / 2);
  const auto p1 = static_cast<std::ptrdiff_t>(kernel[1] / 2);
  const std::size_t vol = g.volume();
  for (std::size_t t0 = 0; t0 < kernel[0]; ++t0) {
    for (std::size_t t1 = 0; t1 < kernel[1]; ++t1) {
      V acc[CB][K2];
      for (std::size_t c = 0; c < CB; ++c) {
        for (std::size_t t2 = 0; t2 < K2; ++t2) {
          acc[c][t2] = V{};
        }
      }
      for (std::size_t i0 = 0; i0 < g.n0; ++i0) {
        const auto j0 = static_cast<std::ptrdiff_t>(i0) + static_cast<std::ptrdiff_t>(t0) - p0;
        if (j0 < 0 || j0 >= static_cast<std::ptrdiff_t>(g.n0)) {
          continue;
        }
        for (std::size_t i1 = 0; i1 < g.n1; ++i1) {
          const auto j1 = static_cast<std::ptrdiff_t>(i1) + static_cast<std::ptrdiff_t>(t1) - p1;
          if (j1 < 0 || j1 >= static_cast<std::ptrdiff_t>(g.n1)) {
            continue;
          }
          const T *s = padded + ((ci * g.n0 + static_cast<std::size_t>(j0)) * g.n1 + static_cast<std::size_t>(j1)) * width;
          for (std::size_t k = 0; k < NC; ++k) {
            V sv[K2];
            for (std::size_t t2 = 0; t2 < K2; ++t2) {
              sv[t2] = RV::load(s + t2 + k * L);
            }
            for (std::size_t c = 0; c < CB; ++c) {
              const V gv = RV::load(grad + (co0 + c) * vol + (i0 * g.n1 + i1) * N2 + k * L);
              for (std::size_t t2 = 0; t2 < K2; ++t2) {
                acc[c][t2] += gv * sv[t2];
              }
            }
          }
        }
      }
      for (std::size_t c = 0; c < CB; ++c) {
        for (std::size_t t2 = 0; t2 < K2; ++t2) {
          double sum = 0.0;
          for (std::size_t x = 0; x < L; ++x) {
            sum += acc[c][t2][x];
          }
          dw[((co0 + c) * cin + ci) * taps + (t0 * kernel[1] + t1) * K2 + t2] = static_cast<T>(sum);
        }
      }
    }
  }
}

template <typename T, std::size_t K2, std::size_t N2>
void weight_grad_fast(const Tensor<T> &in, const Tensor<T> &grad_out, Dims3 kernel, T *dw)
{
  const Geometry g = geometry_of(in.shape(), "conv_backward");
  const std::size_t cout = grad_out.shape()[0];
  const auto padded = pad_rows(in.raw(), g, K2 / 2);
  for (std::size_t ci = 0; ci < g.channels; ++ci) {
    std::size_t co = 0;
    for (; co + 4 <= cout; co += 4) {
      weight_grad_block<T, 4, K2, N2>(padded.data(), grad_out.raw(), g, kernel, co, ci, dw);
    }
    for (; co < cout; ++co) {
      weight_grad_block<T, 1, K2, N2>(padded.data(), grad_out.raw(), g, kernel, co, ci, dw);
    }
  }
}

template <typename T>
void weight_grad_generic(const Tensor<T> &in, const Tensor<T> &grad_out, Dims3 kernel, T *dw)
{
  const Geometry g = geometry_of(in.shape(), "conv_backward");
  const std::size_t cin = g.channels;
  const std::size_t cout = grad_out.shape()[0];
  const std::size_t k0 = kernel[0], k1 = kernel[1], k2 = kernel[2];
  const std::size_t taps = k0 * k1 * k2;
  const auto p0 = static_cast<std::ptrdiff_t>(k0 / 2);
  const auto p1 = static_cast<std::ptrdiff_t>(k1 / 2);
  const auto p2 = static_cast<std::ptrdiff_t>(k2 / 2);
  const std::size_t vol = g.volume();
  std::vector<T> acc(taps * g.n2);
  for (std::size_t co = 0; co < cout; ++co) {
    const T *gc = grad_out.raw() + co * vol;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T *ic = in.raw() + ci * vol;
      std::fill(acc.begin(), acc.end(), T(0));
      for (std::size_t i0 = 0; i0 < g.n0; ++i0) {
        for (std::size_t i1 = 0; i1 < g.n1; ++i1) {
          const T *grow = gc + (i0 * g.n1 + i1) * g.n2;
          for (std::size_t t0 = 0; t0 < k0; ++t0) {
            const auto j0 = static_cast<std::ptrdiff_t>(i0) + static_cast<std::ptrdiff_t>(t0) - p0;
            if (j0 < 0 || j0 >= static_cast<std::ptrdiff_t>(g.n0)) {
              continue;
            }
            for (std::size_t t1 = 0; t1 < k1; ++t1) {
              const auto j1 = static_cast<std::ptrdiff_t>(i1) + static_cast<std::ptrdiff_t>(t1) - p1;
              if (j1 < 0 || j1 >= static_cast<std::ptrdiff_t>(g.n1)) {
                continue;
              }
              const T *srow = ic + (static_cast<std::size_t>(j0) * g.n1 + static_cast<std::size_t>(j1)) * g.n2;
              for (std::size_t t2 = 0; t2 < k2; ++t2) {
                std::size_t lo, hi;
                tap_range(g.n2, static_cast<std::ptrdiff_t>(t2) - p2, lo, hi);
                T *a = acc.data() + ((t0 * k1 + t1) * k2 + t2) * g.n2;
                const T *s = srow + (static_cast<std::ptrdiff_t>(t2) - p2);
                for (std::size_t x = lo; x < hi; ++x) {
                  a[x] += grow[x] * s[x];
                }
              }
            }
          }
        }
      }
      T *wg = dw + (co * cin + ci) * taps;
      for (std::size_t t = 0; t < taps; ++t) {
        double s = 0.0;
        const T *a = acc.data() + t * g.n2;
        for (std::size_t x = 0; x < g.n2; ++x) {
          s += a[x];
        }
        wg[t] = static_cast<T>(s);
      }
    }
  }
}

template <typename T, std::size_t K2>
void weight_grad_dispatch_rows(const Tensor<T> &in, const Tensor<T> &grad_out, Dims3 kernel, T *dw)
{
  switch (in.shape()[3]) {
  case 4: return weight_grad_fast<T, K2, 4>(in, grad_out, kernel, dw);
  case 8: return weight_grad_fast<T, K2, 8>(in, grad_out, kernel, dw);
  case 16: return weight_grad_fast<T, K2, 16>(in, grad_out, kernel, dw);
  case 32: return weight_grad_fast<T, K2, 32>(in, grad_out, kernel, dw);
  case 64: return weight_grad_fast<T, K2, 64>(in, grad_out, kernel, dw);
  default: return weight_grad_generic(in, grad_out, kernel, dw);
  }
}

template <typename T>
void weight_grad(const Tensor<T> &in, const Tensor<T> &grad_out, Dims3 kernel, T *dw)
{
  if (kernel[2] == 1) {
    return weight_grad_dispatch_rows<T, 1>(in, grad_out, kernel, dw);
  }
  if (kernel[2] == 3) {
    return weight_grad_dispatch_rows<T, 3>(in, grad_out, kernel, dw);
  }
  weight_grad_generic(in, grad_out, kernel, dw);
}

void check_kernel(Dims3 kernel)
{
  for (auto k : kernel) {
    if (k % 2 == 0) {
      throw ShapeError("convolution kernel extents must be odd");
    }
  }
}

} // namespace

template <typename T>
Tensor<T> conv_forward(const Tensor<T> &in, const Tensor<T> &weight, const Tensor<T> &bias, Dims3 kernel)
{
  check_kernel(kernel);
  const Geometry g = geometry_of(in.shape(), "conv_forward");
  const std::size_t taps = kernel[0] * kernel[1] * kernel[2];
  if (weight.size() % (g.channels * taps) != 0) {
    throw ShapeError("conv_forward: weight " + shape_string(weight.shape()) + " incompatible with " +
                     std::to_string(g.channels) + " input channels");
  }
  const std::size_t cout = weight.size() / (g.channels * taps);
  if (bias.size() != cout) {
    throw ShapeError("conv_forward: bias has " + std::to_string(bias.size()) + " entries, need " + std::to_string(cout));
  }
  Tensor<T> out(Shape{cout, g.n0, g.n1, g.n2});
  const std::size_t vol = g.volume();
  for (std::size_t co = 0; co < cout; ++co) {
    std::fill_n(out.raw() + co * vol, vol, bias[co]);
  }
  conv_accumulate(in, weight.raw(), cout, kernel, out.raw());
  return out;
}

template <typename T>
ConvGrads<T> conv_backward(const Tensor<T> &in, const Tensor<T> &weight, const Tensor<T> &grad_out, Dims3 kernel,
                           bool need_input_grad)
{
  check_kernel(kernel);
  const Geometry g = geometry_of(in.shape(), "conv_backward");
  const Geometry go = geometry_of(grad_out.shape(), "conv_backward");
  const std::size_t cin = g.channels;
  const std::size_t cout = go.channels;
  const std::size_t k0 = kernel[0], k1 = kernel[1], k2 = kernel[2];
  const std::size_t taps = k0 * k1 * k2;
  if (go.n0 != g.n0 || go.n1 != g.n1 || go.n2 != g.n2 || weight.size() != cout * cin * taps) {
    throw ShapeError("conv_backward: inconsistent shapes");
  }
  const std::size_t vol = g.volume();
  ConvGrads<T> grads;

  grads.bias = Tensor<T>(Shape{cout});
  for (std::size_t co = 0; co < cout; ++co) {
    double acc = 0.0;
    const T *gc = grad_out.raw() + co * vol;
    for (std::size_t v = 0; v < vol; ++v) {
      acc += gc[v];
    }
    grads.bias[co] = static_cast<T>(acc);
  }

  grads.weight = Tensor<T>(weight.shape());
  weight_grad(in, grad_out, kernel, grads.weight.raw());

  if (need_input_grad) {
    // Transposed same-convolution: swap channel roles and flip the taps.
    std::vector<T> flipped(cin * cout * taps);
    for (std::size_t co = 0; co < cout; ++co) {
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const T *w = weight.raw() + (co * cin + ci) * taps;
        T *f = flipped.data() + (ci * cout + co) * taps;
        for (std::size_t t = 0; t < taps; ++t) {
          f[taps - 1 - t] = w[t];
        }
      }
    }
    grads.input = Tensor<T>(in.shape());
    conv_accumulate(grad_out, flipped.data(), cin, kernel, grads.input.raw());
  }
  return grads;
}

template <typename T>
Tensor<T> leaky_relu_forward(const Tensor<T> &x)
{
  Tensor<T> out(x.shape());
  const T slope = static_cast<T>(kLeakySlope);
  const T *s = x.raw();
  T *d = out.raw();
  for (std::size_t i = 0; i < x.size(); ++i) {
    d[i] = s[i] > T(0) ? s[i] : slope * s[i];
  }
  return out;
}

template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T> &out, const Tensor<T> &grad_out)
{
  require_same_shape(out, grad_out, "leaky_relu_backward");
  Tensor<T> g(out.shape());
  const T slope = static_cast<T>(kLeakySlope);
  for (std::size_t i = 0; i < out.size(); ++i) {
    g[i] = out[i] > T(0) ? grad_out[i] : slope * grad_out[i];
  }
  return g;
}

template <typename T>
Tensor<T> avg_pool_forward(const Tensor<T> &x, Dims3 factor)
{
  const Geometry g = geometry_of(x.shape(), "avg_pool");
  if (g.n0 % factor[0] || g.n1 % factor[1] || g.n2 % factor[2]) {
    throw ShapeError("avg_pool: extents " + shape_string(x.shape()) + " not divisible by the pooling factor");
  }
  const std::size_t m0 = g.n0 / factor[0], m1 = g.n1 / factor[1], m2 = g.n2 / factor[2];
  Tensor<T> out(Shape{g.channels, m0, m1, m2});
  const T scale = T(1) / static_cast<T>(factor[0] * factor[1] * factor[2]);
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i0 = 0; i0 < m0; ++i0) {
      for (std::size_t i1 = 0; i1 < m1; ++i1) {
        for (std::size_t i2 = 0; i2 < m2; ++i2) {
          T s = 0;
          for (std::size_t a = 0; a < factor[0]; ++a) {
            for (std::size_t b = 0; b < factor[1]; ++b) {
              for (std::size_t e = 0; e < factor[2]; ++e) {
                s += x.at(c, i0 * factor[0] + a, i1 * factor[1] + b, i2 * factor[2] + e);
              }
            }
          }
          out.at(c, i0, i1, i2) = s * scale;
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> avg_pool_backward(const Tensor<T> &grad_out, const Shape &in_shape, Dims3 factor)
{
  const Geometry g = geometry_of(in_shape, "avg_pool_backward");
  Tensor<T> gin(in_shape);
  const T scale = T(1) / static_cast<T>(factor[0] * factor[1] * factor[2]);
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i0 = 0; i0 < g.n0; ++i0) {
      for (std::size_t i1 = 0; i1 < g.n1; ++i1) {
        for (std::size_t i2 = 0; i2 < g.n2; ++i2) {
          gin.at(c, i0, i1, i2) = grad_out.at(c, i0 / factor[0], i1 / factor[1], i2 / factor[2]) * scale;
        }
      }
    }
  }
  return gin;
}

template <typename T>
Tensor<T> upsample_forward(const Tensor<T> &x, Dims3 factor)
{
  const Geometry g = geometry_of(x.shape(), "upsample");
  Tensor<T> out(Shape{g.channels, g.n0 * factor[0], g.n1 * factor[1], g.n2 * factor[2]});
  const Geometry go = geometry_of(out.shape(), "upsample");
  for (std::size_t c = 0; c < go.channels; ++c) {
    for (std::size_t i0 = 0; i0 < go.n0; ++i0) {
      for (std::size_t i1 = 0; i1 < go.n1; ++i1) {
        for (std::size_t i2 = 0; i2 < go.n2; ++i2) {
          out.at(c, i0, i1, i2) = x.at(c, i0 / factor[0], i1 / factor[1], i2 / factor[2]);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> upsample_backward(const Tensor<T> &grad_out, const Shape &in_shape, Dims3 factor)
{
  const Geometry g = geometry_of(in_shape, "upsample_backward");
  Tensor<T> gin(in_shape);
  const Geometry go = geometry_of(grad_out.shape(), "upsample_backward");
  for (std::size_t c = 0; c < go.channels; ++c) {
    for (std::size_t i0 = 0; i0 < go.n0; ++i0) {
      for (std::size_t i1 = 0; i1 < go.n1; ++i1) {
        for (std::size_t i2 = 0; i2 < go.n2; ++i2) {
          gin.at(c, i0 / factor[0], i1 / factor[1], i2 / factor[2]) += grad_out.at(c, i0, i1, i2);
        }
      }
    }
  }
  (void)g;
  return gin;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T> &a, const Tensor<T> &b)
{
  const Geometry ga = geometry_of(a.shape(), "concat");
  const Geometry gb = geometry_of(b.shape(), "concat");
  if (ga.n0 != gb.n0 || ga.n1 != gb.n1 || ga.n2 != gb.n2) {
    throw ShapeError("concat: spatial mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tensor<T> out(Shape{ga.channels + gb.channels, ga.n0, ga.n1, ga.n2});
  std::copy(a.data().begin(), a.data().end(), out.raw());
  std::copy(b.data().begin(), b.data().end(), out.raw() + a.size());
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T> &g, std::size_t first_channels)
{
  const Geometry gg = geometry_of(g.shape(), "split");
  if (first_channels == 0 || first_channels >= gg.channels) {
    throw ShapeError("split: bad channel split");
  }
  const std::size_t vol = gg.volume();
  Tensor<T> a(Shape{first_channels, gg.n0, gg.n1, gg.n2});
  Tensor<T> b(Shape{gg.channels - first_channels, gg.n0, gg.n1, gg.n2});
  std::copy_n(g.raw(), a.size(), a.raw());
  std::copy_n(g.raw() + first_channels * vol, b.size(), b.raw());
  return {std::move(a), std::move(b)};
}

#define FINE_INSTANTIATE_LAYERS(T)                                                                                \
  template Tensor<T> conv_forward<T>(const Tensor<T> &, const Tensor<T> &, const Tensor<T> &, Dims3);             \
  template ConvGrads<T> conv_backward<T>(const Tensor<T> &, const Tensor<T> &, const Tensor<T> &, Dims3, bool);   \
  template Tensor<T> leaky_relu_forward<T>(const Tensor<T> &);                                                    \
  template Tensor<T> leaky_relu_backward<T>(const Tensor<T> &, const Tensor<T> &);                                \
  template Tensor<T> avg_pool_forward<T>(const Tensor<T> &, Dims3);                                               \
  template Tensor<T> avg_pool_backward<T>(const Tensor<T> &, const Shape &, Dims3);                               \
  template Tensor<T> upsample_forward<T>(const Tensor<T> &, Dims3);                                               \
  template Tensor<T> upsample_backward<T>(const Tensor<T> &, const Shape &, Dims3);                               \
  template Tensor<T> concat_channels<T>(const Tensor<T> &, const Tensor<T> &);                                    \
  template std::pair<Tensor<T>, Tensor<T>> split_channels<T>(const Tensor<T> &, std::size_t);

FINE_INSTANTIATE_LAYERS(float)
FINE_INSTANTIATE_LAYERS(double)

} // namespace fine::layers
