#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "fine/core/tensor_ops.hpp"

namespace fine {

template <typename E>
struct CgResult
{
  Tensor<E> x;
  int iterations = 0;
  double relative_residual = 0.0; // |A x - rhs| / |rhs|
};

// Conjugate gradients for a symmetric positive semidefinite operator, started
// from x0. Stops when |r| / |rhs| <= tol or after max_iter iterations.
template <typename E>
CgResult<E> conjugate_gradient(const std::function<Tensor<E>(const Tensor<E> &)> &apply, const Tensor<E> &rhs,
                               const Tensor<E> &x0, int max_iter, double tol)
{
  CgResult<E> res{x0, 0, 0.0};
  const double rhs_norm = norm(rhs);
  Tensor<E> r = rhs - apply(x0);
  double rr = squared_norm(r);
  if (rhs_norm == 0.0) {
    // Zero right-hand side: the minimum-norm answer is zero.
    res.x = Tensor<E>(rhs.shape());
    return res;
  }
  res.relative_residual = std::sqrt(rr) / rhs_norm;
  if (res.relative_residual <= tol) {
    return res;
  }
  Tensor<E> p = r;
  for (int it = 0; it < max_iter; ++it) {
    const Tensor<E> q = apply(p);
    const double pq = dot(p, q);
    if (!std::isfinite(pq)) {
      throw NumericalError("conjugate gradient: non-finite curvature at iteration " + std::to_string(it));
    }
    if (pq <= 0.0) {
      break; // search direction in the null space; nothing left to reduce
    }
    const double alpha = rr / pq;
    axpy(alpha, p, res.x);
    axpy(-alpha, q, r);
    const double rr_new = squared_norm(r);
    if (!std::isfinite(rr_new)) {
      throw NumericalError("conjugate gradient: non-finite residual at iteration " + std::to_string(it));
    }
    res.iterations = it + 1;
    res.relative_residual = std::sqrt(rr_new) / rhs_norm;
    if (res.relative_residual <= tol) {
      break;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = r[i] + static_cast<real_t<E>>(beta) * p[i];
    }
  }
  return res;
}

} // namespace fine
