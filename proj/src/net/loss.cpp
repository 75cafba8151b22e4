#include "fine/net/loss.hpp"

#include <cmath>

#include "fine/core/tensor_ops.hpp"
#include "fine/solvers/finite_difference.hpp"

namespace fine {

LossKind parse_loss_kind(const std::string &name)
{
  if (name == "l1") {
    return LossKind::L1;
  }
  if (name == "l2") {
    return LossKind::L2;
  }
  if (name == "qsm_composite") {
    return LossKind::QsmComposite;
  }
  throw ConfigError("unknown loss kind '" + name + "' (expected l1, l2 or qsm_composite)");
}

const char *loss_kind_name(LossKind k)
{
  switch (k) {
  case LossKind::L1:
    return "l1";
  case LossKind::L2:
    return "l2";
  case LossKind::QsmComposite:
    return "qsm_composite";
  }
  return "?";
}

namespace {

template <typename T>
T sign(T v)
{
  return static_cast<T>((v > T(0)) - (v < T(0)));
}

// Mean absolute value of r and its derivative, scaled by weight.
template <typename T>
double l1_term(const Tensor<T> &r, double weight, Tensor<T> &dr)
{
  double acc = 0.0;
  const double n = static_cast<double>(r.size());
  dr = Tensor<T>(r.shape());
  for (std::size_t i = 0; i < r.size(); ++i) {
    acc += std::abs(static_cast<double>(r[i]));
    dr[i] = static_cast<T>(weight / n) * sign(r[i]);
  }
  return weight * acc / n;
}

} // namespace

template <typename T>
LossValue<T> compute_loss(LossKind kind, const Tensor<T> &prediction, const Tensor<T> &target, const LossAux<T> &aux)
{
  require_same_shape(prediction, target, "loss");
  const Tensor<T> r = prediction - target;
  const double n = static_cast<double>(r.size());
  LossValue<T> out;
  switch (kind) {
  case LossKind::L1:
    out.value = l1_term(r, 1.0, out.grad);
    break;
  case LossKind::L2: {
    out.grad = Tensor<T>(r.shape());
    double acc = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      acc += static_cast<double>(r[i]) * static_cast<double>(r[i]);
      out.grad[i] = static_cast<T>(2.0 / n) * r[i];
    }
    out.value = acc / n;
    break;
  }
  case LossKind::QsmComposite: {
    if (r.rank() < 2 || r.extent(0) != 1) {
      throw ShapeError("qsm_composite expects a single-channel prediction, got " + shape_string(r.shape()));
    }
    const CompositeWeights &w = aux.weights;
    const Shape spatial(r.shape().begin() + 1, r.shape().end());
    const Tensor<T> rs = r.reshaped(spatial);
    out.value = l1_term(r, w.image, out.grad);
    if (w.gradient != 0.0) {
      Tensor<T> dg;
      out.value += l1_term(gradient(rs), w.gradient, dg);
      axpy(1.0, gradient_adjoint(dg, spatial).reshaped(r.shape()), out.grad);
    }
    if (w.field != 0.0) {
      if (!aux.kernel) {
        throw ConfigError("qsm_composite field term needs a dipole kernel");
      }
      Tensor<T> df;
      out.value += l1_term(dipole_convolve(*aux.kernel, rs), w.field, df);
      axpy(1.0, dipole_convolve(*aux.kernel, df).reshaped(r.shape()), out.grad);
    }
    break;
  }
  }
  return out;
}

template LossValue<float> compute_loss<float>(LossKind, const Tensor<float> &, const Tensor<float> &,
                                              const LossAux<float> &);
template LossValue<double> compute_loss<double>(LossKind, const Tensor<double> &, const Tensor<double> &,
                                                const LossAux<double> &);

} // namespace fine
