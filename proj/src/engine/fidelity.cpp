#include "fine/engine/fidelity.hpp"

#include "fine/core/tensor_ops.hpp"

namespace fine {

template <typename R>
QsmFidelity<R>::QsmFidelity(DipoleKernel<R> kernel, Tensor<R> field, Tensor<R> weight, double scale)
  : kernel_(std::move(kernel))
  , field_(std::move(field))
  , weight_(std::move(weight))
  , scale_(scale)
{
  require_same_shape(field_.shape(), kernel_.grid_shape, "qsm fidelity: field");
  if (!weight_.empty()) {
    require_same_shape(weight_.shape(), field_.shape(), "qsm fidelity: weight");
  }
  if (!(scale_ > 0.0)) {
    throw ConfigError("qsm fidelity scale must be positive");
  }
}

template <typename R>
Tensor<R> QsmFidelity<R>::network_input() const
{
  Shape s{1};
  s.insert(s.end(), field_.shape().begin(), field_.shape().end());
  return (static_cast<R>(scale_) * field_).reshaped(s);
}

template <typename R>
LossValue<R> QsmFidelity<R>::evaluate(const Tensor<R> &output) const
{
  const Tensor<R> chi = image(output);
  Tensor<R> r = dipole_convolve(kernel_, chi) - field_;
  if (!weight_.empty()) {
    r = hadamard(r, weight_);
  }
  LossValue<R> lv;
  lv.value = 0.5 * squared_norm(r);
  if (!weight_.empty()) {
    r = hadamard(r, weight_);
  }
  lv.grad = (static_cast<R>(1.0 / scale_) * dipole_convolve(kernel_, r)).reshaped(output.shape());
  return lv;
}

template <typename R>
Tensor<R> QsmFidelity<R>::image(const Tensor<R> &output) const
{
  Shape s{1};
  s.insert(s.end(), field_.shape().begin(), field_.shape().end());
  if (output.shape() != s) {
    throw ShapeError("qsm fidelity: network output " + shape_string(output.shape()) + ", expected " +
                     shape_string(s));
  }
  return (static_cast<R>(1.0 / scale_) * output).reshaped(field_.shape());
}

template <typename R>
UndersampledFidelity<R>::UndersampledFidelity(SamplingMask mask, Tensor<std::complex<R>> kspace, bool complex_output)
  : mask_(std::move(mask))
  , kspace_(std::move(kspace))
  , complex_output_(complex_output)
{
  require_same_shape(kspace_.shape(), mask_.grid_shape, "undersampled fidelity: k-space");
}

template <typename R>
Tensor<R> complex_to_channels(const Tensor<std::complex<R>> &x)
{
  Shape s{2};
  s.insert(s.end(), x.shape().begin(), x.shape().end());
  Tensor<R> out(s);
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i].real();
    out[n + i] = x[i].imag();
  }
  return out;
}

template <typename R>
Tensor<R> UndersampledFidelity<R>::network_input() const
{
  return complex_to_channels(undersample_adjoint<R>(mask_, kspace_));
}

template <typename R>
Tensor<std::complex<R>> UndersampledFidelity<R>::complex_image(const Tensor<R> &output) const
{
  Shape s{output_channels()};
  s.insert(s.end(), kspace_.shape().begin(), kspace_.shape().end());
  if (output.shape() != s) {
    throw ShapeError("undersampled fidelity: network output " + shape_string(output.shape()) + ", expected " +
                     shape_string(s));
  }
  Tensor<std::complex<R>> x(kspace_.shape());
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = {output[i], complex_output_ ? output[n + i] : R(0)};
  }
  return x;
}

template <typename R>
LossValue<R> UndersampledFidelity<R>::evaluate(const Tensor<R> &output) const
{
  const Tensor<std::complex<R>> r = undersample_forward<R>(mask_, complex_image(output)) - kspace_;
  LossValue<R> lv;
  lv.value = 0.5 * squared_norm(r);
  const Tensor<std::complex<R>> g = undersample_adjoint<R>(mask_, r);
  lv.grad = Tensor<R>(output.shape());
  const std::size_t n = g.size();
  for (std::size_t i = 0; i < n; ++i) {
    lv.grad[i] = g[i].real();
    if (complex_output_) {
      lv.grad[n + i] = g[i].imag();
    }
  }
  return lv;
}

template <typename R>
Tensor<R> display_image(const Tensor<std::complex<R>> &x, bool complex_valued)
{
  return complex_valued ? abs_value(x) : real_part(x);
}

template <typename R>
Tensor<R> UndersampledFidelity<R>::image(const Tensor<R> &output) const
{
  return display_image(complex_image(output), complex_output_);
}

template <typename R>
std::unique_ptr<Fidelity<R>> make_fidelity(const PhantomCase &c, double qsm_scale, const Tensor<float> *qsm_weight)
{
  if (c.kind == PhantomKind::Qsm) {
    return std::make_unique<QsmFidelity<R>>(make_dipole_kernel<R>(c.field.shape(), c.voxel_size, c.b0_axis),
                                            cast<R>(c.field), qsm_weight ? cast<R>(*qsm_weight) : Tensor<R>(),
                                            qsm_scale);
  }
  Tensor<std::complex<R>> k(c.kspace.shape());
  for (std::size_t i = 0; i < k.size(); ++i) {
    k[i] = {static_cast<R>(c.kspace[i].real()), static_cast<R>(c.kspace[i].imag())};
  }
  return std::make_unique<UndersampledFidelity<R>>(c.mask, std::move(k), c.complex_valued());
}

template class QsmFidelity<float>;
template class QsmFidelity<double>;
template class UndersampledFidelity<float>;
template class UndersampledFidelity<double>;
template Tensor<float> display_image<float>(const Tensor<cfloat> &, bool);
template Tensor<double> display_image<double>(const Tensor<cdouble> &, bool);
template Tensor<float> complex_to_channels<float>(const Tensor<cfloat> &);
template Tensor<double> complex_to_channels<double>(const Tensor<cdouble> &);
template std::unique_ptr<Fidelity<float>> make_fidelity<float>(const PhantomCase &, double, const Tensor<float> *);
template std::unique_ptr<Fidelity<double>> make_fidelity<double>(const PhantomCase &, double, const Tensor<float> *);

} // namespace fine
