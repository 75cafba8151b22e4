#pragma once

#include <functional>

#include "fine/physics/dipole.hpp"
#include "fine/physics/sampling.hpp"

namespace fine {

// A linear forward model whose measurement shares the image's element type.
template <typename E>
struct LinearOperator
{
  std::function<Tensor<E>(const Tensor<E> &)> forward;
  std::function<Tensor<E>(const Tensor<E> &)> adjoint;
};

// d * chi. The dipole kernel is real and even, so the operator is self-adjoint.
template <typename T>
LinearOperator<T> qsm_operator(const DipoleKernel<T> &kernel)
{
  auto apply = [kernel](const Tensor<T> &x) { return dipole_convolve(kernel, x); };
  return {apply, apply};
}

template <typename R>
LinearOperator<std::complex<R>> undersampled_operator(const SamplingMask &mask)
{
  return {[mask](const Tensor<std::complex<R>> &x) { return undersample_forward<R>(mask, x); },
          [mask](const Tensor<std::complex<R>> &k) { return undersample_adjoint<R>(mask, k); }};
}

} // namespace fine
