#include "fine/solvers/finite_difference.hpp"

namespace fine {

template <typename E>
Tensor<E> gradient(const Tensor<E> &x)
{
  const Shape &s = x.shape();
  const std::size_t rank = s.size();
  Shape gs{rank};
  gs.insert(gs.end(), s.begin(), s.end());
  Tensor<E> g(gs);
  const std::size_t n = x.size();
  for (std::size_t a = 0; a < rank; ++a) {
    const std::size_t stride = x.stride(a);
    const std::size_t extent = s[a];
    E *ga = g.raw() + a * n;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ia = (i / stride) % extent;
      ga[i] = ia + 1 < extent ? x[i + stride] - x[i] : E{};
    }
  }
  return g;
}

template <typename E>
Tensor<E> gradient_adjoint(const Tensor<E> &g, const Shape &image_shape)
{
  const std::size_t rank = image_shape.size();
  if (g.rank() != rank + 1 || g.extent(0) != rank) {
    throw ShapeError("gradient_adjoint: gradient field " + shape_string(g.shape()) + " does not match image " +
                     shape_string(image_shape));
  }
  Tensor<E> out(image_shape);
  const std::size_t n = out.size();
  for (std::size_t a = 0; a < rank; ++a) {
    const std::size_t stride = out.stride(a);
    const std::size_t extent = image_shape[a];
    const E *ga = g.raw() + a * n;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ia = (i / stride) % extent;
      E v{};
      if (ia + 1 < extent) {
        v -= ga[i];
      }
      if (ia > 0) {
        v += ga[i - stride];
      }
      out[i] += v;
    }
  }
  return out;
}

template Tensor<float> gradient<float>(const Tensor<float> &);
template Tensor<double> gradient<double>(const Tensor<double> &);
template Tensor<cfloat> gradient<cfloat>(const Tensor<cfloat> &);
template Tensor<cdouble> gradient<cdouble>(const Tensor<cdouble> &);
template Tensor<float> gradient_adjoint<float>(const Tensor<float> &, const Shape &);
template Tensor<double> gradient_adjoint<double>(const Tensor<double> &, const Shape &);
template Tensor<cfloat> gradient_adjoint<cfloat>(const Tensor<cfloat> &, const Shape &);
template Tensor<cdouble> gradient_adjoint<cdouble>(const Tensor<cdouble> &, const Shape &);

} // namespace fine
