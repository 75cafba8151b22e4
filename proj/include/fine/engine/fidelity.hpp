#pragma once

#include <memory>

#include "fine/net/loss.hpp"
#include "fine/phantom/phantom.hpp"
#include "fine/physics/dipole.hpp"
#include "fine/physics/sampling.hpp"

namespace fine {

// Data-consistency term 1/2 |W (A x - y)|^2 of one test case, expressed on the
// network's input/output tensors ([C, spatial...]).
template <typename R>
class Fidelity
{
public:
  virtual ~Fidelity() = default;
  virtual Tensor<R> network_input() const = 0;
  virtual std::size_t output_channels() const = 0;
  // Loss value and its gradient with respect to the network output.
  virtual LossValue<R> evaluate(const Tensor<R> &output) const = 0;
  // Reconstruction image (chi, or T2w intensity) from a network output.
  virtual Tensor<R> image(const Tensor<R> &output) const = 0;
};

// QSM: network maps scale * f to scale * chi.
template <typename R>
class QsmFidelity final : public Fidelity<R>
{
public:
  QsmFidelity(DipoleKernel<R> kernel, Tensor<R> field, Tensor<R> weight = {}, double scale = 1.0);

  Tensor<R> network_input() const override;
  std::size_t output_channels() const override { return 1; }
  LossValue<R> evaluate(const Tensor<R> &output) const override;
  Tensor<R> image(const Tensor<R> &output) const override;

  const DipoleKernel<R> &kernel() const { return kernel_; }
  const Tensor<R> &field() const { return field_; }
  const Tensor<R> &weight() const { return weight_; }
  double scale() const { return scale_; }

private:
  DipoleKernel<R> kernel_;
  Tensor<R> field_;
  Tensor<R> weight_; // empty means W = 1
  double scale_;
};

// Undersampled Fourier: network maps (re, im) of A^H b to a real image (one
// channel) or a complex one (two channels).
template <typename R>
class UndersampledFidelity final : public Fidelity<R>
{
public:
  UndersampledFidelity(SamplingMask mask, Tensor<std::complex<R>> kspace, bool complex_output);

  Tensor<R> network_input() const override;
  std::size_t output_channels() const override { return complex_output_ ? 2 : 1; }
  LossValue<R> evaluate(const Tensor<R> &output) const override;
  Tensor<R> image(const Tensor<R> &output) const override;

  Tensor<std::complex<R>> complex_image(const Tensor<R> &output) const;
  const SamplingMask &mask() const { return mask_; }
  const Tensor<std::complex<R>> &kspace() const { return kspace_; }
  bool complex_output() const { return complex_output_; }

private:
  SamplingMask mask_;
  Tensor<std::complex<R>> kspace_;
  bool complex_output_;
};

// Image shown for a complex reconstruction: magnitude for complex-valued
// anatomy, real part otherwise.
template <typename R>
Tensor<R> display_image(const Tensor<std::complex<R>> &x, bool complex_valued);

// Splits a complex image into a [2, X, Y] (re, im) network tensor.
template <typename R>
Tensor<R> complex_to_channels(const Tensor<std::complex<R>> &x);

// Fidelity of a phantom case with the case's own operator.
template <typename R>
std::unique_ptr<Fidelity<R>> make_fidelity(const PhantomCase &c, double qsm_scale = 1.0,
                                           const Tensor<float> *qsm_weight = nullptr);

} // namespace fine
