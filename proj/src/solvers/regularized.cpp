#include "fine/solvers/regularized.hpp"

#include <cmath>
#include <fstream>

#include "fine/solvers/cg.hpp"
#include "fine/solvers/finite_difference.hpp"

namespace fine {

void SolverConfig::validate() const
{
  if (!(lambda > 0.0 && lambda2 > 0.0 && epsilon_tv > 0.0 && cg_tol > 0.0)) {
    throw ConfigError("solver: lambda, lambda2, epsilon_tv and cg_tol must be positive");
  }
  if (max_outer <= 0 || max_cg <= 0) {
    throw ConfigError("solver: max_outer and max_cg must be positive");
  }
  if (cg_tol >= 1.0) {
    throw ConfigError("solver: cg_tol must be below 1");
  }
  if (!(keep_fraction > 0.0 && keep_fraction < 1.0)) {
    throw ConfigError("solver: keep_fraction must lie in (0, 1)");
  }
}

namespace {

template <typename E>
Tensor<E> weigh(const Tensor<E> &r, const Tensor<real_t<E>> *weight)
{
  return weight ? hadamard(r, *weight) : r;
}

template <typename E>
Tensor<E> normal_data_term(const LinearOperator<E> &op, const Tensor<real_t<E>> *weight, const Tensor<E> &x)
{
  Tensor<E> r = op.forward(x);
  if (weight) {
    r = hadamard(hadamard(r, *weight), *weight);
  }
  return op.adjoint(r);
}

// Squared norm of the masked gradient at each voxel.
template <typename E>
std::vector<double> gradient_energy(const Tensor<E> &g, const EdgeMask &edges, std::size_t n)
{
  std::vector<double> s(n, 0.0);
  const std::size_t rank = g.extent(0);
  for (std::size_t a = 0; a < rank; ++a) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = a * n + i;
      s[i] += edges.mask[k] * std::norm(g[k]);
    }
  }
  return s;
}

template <typename E>
std::pair<double, double> objective(const Tensor<E> &x, const Tensor<E> &y, const LinearOperator<E> &op,
                                    const Tensor<real_t<E>> *weight, const EdgeMask &edges, const SolverConfig &cfg)
{
  const double fid = 0.5 * squared_norm(weigh(op.forward(x) - y, weight));
  const std::vector<double> s = gradient_energy(gradient(x), edges, x.size());
  double reg = 0.0;
  for (double v : s) {
    reg += std::sqrt(v + cfg.epsilon_tv * cfg.epsilon_tv);
  }
  return {fid + cfg.lambda * reg, fid};
}

} // namespace

template <typename E>
SolveResult<E> weighted_tv_reconstruct(const Tensor<E> &measurement, const LinearOperator<E> &op,
                                       const Tensor<real_t<E>> *weight, const EdgeMask &edges,
                                       const SolverConfig &cfg, const Tensor<E> *x0)
{
  using R = real_t<E>;
  cfg.validate();
  if (weight) {
    require_same_shape(weight->shape(), measurement.shape(), "tv: weight");
  }
  const Tensor<E> rhs = op.adjoint(weight ? hadamard(hadamard(measurement, *weight), *weight) : measurement);
  Tensor<E> x = x0 ? *x0 : rhs;
  const std::size_t n = x.size();
  Shape gshape{x.rank()};
  gshape.insert(gshape.end(), x.shape().begin(), x.shape().end());
  if (edges.mask.shape() != gshape) {
    throw ShapeError("tv: edge mask " + shape_string(edges.mask.shape()) + " does not match gradient " +
                     shape_string(gshape));
  }

  SolveResult<E> res;
  auto [obj, fid] = objective(x, measurement, op, weight, edges, cfg);
  res.log.push_back({0, obj, fid, 0, 0.0});
  int increases = 0;
  const double eps2 = cfg.epsilon_tv * cfg.epsilon_tv;
  for (int outer = 1; outer <= cfg.max_outer; ++outer) {
    const std::vector<double> s = gradient_energy(gradient(x), edges, n);
    Tensor<R> w(gshape);
    for (std::size_t a = 0; a < x.rank(); ++a) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = a * n + i;
        w[k] = static_cast<R>(cfg.lambda * edges.mask[k] / std::sqrt(s[i] + eps2));
      }
    }
    const auto apply = [&](const Tensor<E> &u) {
      Tensor<E> out = normal_data_term(op, weight, u);
      axpy(1.0, gradient_adjoint(hadamard(gradient(u), w), x.shape()), out);
      return out;
    };
    CgResult<E> cg = conjugate_gradient<E>(apply, rhs, x, cfg.max_cg, cfg.cg_tol);
    if (!all_finite(cg.x)) {
      throw NumericalError("tv: non-finite iterate at outer iteration " + std::to_string(outer));
    }
    x = std::move(cg.x);
    const auto [obj_new, fid_new] = objective(x, measurement, op, weight, edges, cfg);
    res.log.push_back({outer, obj_new, fid_new, cg.iterations, cg.relative_residual});
    if (obj_new > obj * (1.0 + 1e-6)) {
      if (++increases >= 3) {
        throw NumericalError("tv: objective increased for 3 consecutive outer iterations (last " +
                             std::to_string(obj) + " -> " + std::to_string(obj_new) + ")");
      }
    } else {
      increases = 0;
    }
    obj = obj_new;
  }
  res.x = std::move(x);
  return res;
}

template <typename E>
SolveResult<E> tv_reconstruct(const Tensor<E> &measurement, const LinearOperator<E> &op, const SolverConfig &cfg,
                              const Tensor<E> *x0)
{
  const Shape image_shape = op.adjoint(measurement).shape();
  return weighted_tv_reconstruct<E>(measurement, op, nullptr, no_edges(image_shape), cfg, x0);
}

template <typename T>
SolveResult<T> medi_reconstruct(const Tensor<T> &field, const DipoleKernel<T> &kernel, const Tensor<T> &weight,
                                const Tensor<T> &magnitude, const SolverConfig &cfg)
{
  cfg.validate();
  require_same_shape(field.shape(), magnitude.shape(), "medi: magnitude");
  const EdgeMask edges = edge_mask(magnitude, cfg.keep_fraction);
  return weighted_tv_reconstruct<T>(field, qsm_operator(kernel), &weight, edges, cfg);
}

template <typename E>
Dll2Result<E> dll2_reconstruct(const Tensor<E> &measurement, const LinearOperator<E> &op, const Tensor<E> &prior,
                               const SolverConfig &cfg, const Tensor<real_t<E>> *weight)
{
  cfg.validate();
  Tensor<E> rhs = op.adjoint(weight ? hadamard(hadamard(measurement, *weight), *weight) : measurement);
  require_same_shape(prior.shape(), rhs.shape(), "dll2: prior");
  const double mu = 2.0 * cfg.lambda2;
  axpy(mu, prior, rhs);
  const auto apply = [&](const Tensor<E> &u) {
    Tensor<E> out = normal_data_term(op, weight, u);
    axpy(mu, u, out);
    return out;
  };
  CgResult<E> cg = conjugate_gradient<E>(apply, rhs, prior, cfg.max_cg, cfg.cg_tol);
  if (!all_finite(cg.x)) {
    throw NumericalError("dll2: non-finite solution");
  }
  return {std::move(cg.x), cg.iterations, cg.relative_residual, cg.relative_residual <= cfg.cg_tol};
}

void write_solver_log(const std::filesystem::path &path, const std::vector<OuterIteration> &log)
{
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write solver log " + path.string());
  }
  out.precision(10);
  out << "iteration,objective,fidelity,cg_iterations,cg_residual\n";
  for (const auto &r : log) {
    out << r.iteration << ',' << r.objective << ',' << r.fidelity << ',' << r.cg_iterations << ',' << r.cg_residual
        << '\n';
  }
}

#define FINE_INSTANTIATE_SOLVERS(E)                                                                                    \
  template SolveResult<E> weighted_tv_reconstruct<E>(const Tensor<E> &, const LinearOperator<E> &,                    \
                                                     const Tensor<real_t<E>> *, const EdgeMask &,                     \
                                                     const SolverConfig &, const Tensor<E> *);                        \
  template SolveResult<E> tv_reconstruct<E>(const Tensor<E> &, const LinearOperator<E> &, const SolverConfig &,      \
                                            const Tensor<E> *);                                                       \
  template Dll2Result<E> dll2_reconstruct<E>(const Tensor<E> &, const LinearOperator<E> &, const Tensor<E> &,         \
                                             const SolverConfig &, const Tensor<real_t<E>> *);

FINE_INSTANTIATE_SOLVERS(float)
FINE_INSTANTIATE_SOLVERS(double)
FINE_INSTANTIATE_SOLVERS(cfloat)
FINE_INSTANTIATE_SOLVERS(cdouble)

template SolveResult<float> medi_reconstruct<float>(const Tensor<float> &, const DipoleKernel<float> &,
                                                    const Tensor<float> &, const Tensor<float> &, const SolverConfig &);
template SolveResult<double> medi_reconstruct<double>(const Tensor<double> &, const DipoleKernel<double> &,
                                                      const Tensor<double> &, const Tensor<double> &,
                                                      const SolverConfig &);

} // namespace fine
