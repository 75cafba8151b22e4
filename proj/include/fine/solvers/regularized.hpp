#pragma once

#include <filesystem>
#include <vector>

#include "fine/physics/operators.hpp"
#include "fine/solvers/edge_mask.hpp"

namespace fine {

struct SolverConfig
{
  double lambda = 1e-3;
  double lambda2 = 0.01;
  int max_outer = 10;
  int max_cg = 50;
  double cg_tol = 1e-3;
  double epsilon_tv = 1e-6;
  double keep_fraction = 0.3;

  void validate() const;
};

struct OuterIteration
{
  int iteration = 0;
  double objective = 0.0;
  double fidelity = 0.0;
  int cg_iterations = 0;
  double cg_residual = 0.0;
};

template <typename E>
struct SolveResult
{
  Tensor<E> x;
  std::vector<OuterIteration> log;
};

// argmin 1/2 |W (A u - y)|^2 + lambda sum sqrt(|M_G grad u|^2 + eps^2), solved by
// reweighted least squares with warm-started CG. A null weight means W = 1.
template <typename E>
SolveResult<E> weighted_tv_reconstruct(const Tensor<E> &measurement, const LinearOperator<E> &op,
                                       const Tensor<real_t<E>> *weight, const EdgeMask &edges,
                                       const SolverConfig &cfg, const Tensor<E> *x0 = nullptr);

template <typename E>
SolveResult<E> tv_reconstruct(const Tensor<E> &measurement, const LinearOperator<E> &op, const SolverConfig &cfg,
                              const Tensor<E> *x0 = nullptr);

template <typename T>
SolveResult<T> medi_reconstruct(const Tensor<T> &field, const DipoleKernel<T> &kernel, const Tensor<T> &weight,
                                const Tensor<T> &magnitude, const SolverConfig &cfg);

template <typename E>
struct Dll2Result
{
  Tensor<E> x;
  int cg_iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

// (A^H W^2 A + 2 lambda2 I) x = A^H W^2 y + 2 lambda2 prior, solved by CG from the prior.
template <typename E>
Dll2Result<E> dll2_reconstruct(const Tensor<E> &measurement, const LinearOperator<E> &op, const Tensor<E> &prior,
                               const SolverConfig &cfg, const Tensor<real_t<E>> *weight = nullptr);

void write_solver_log(const std::filesystem::path &path, const std::vector<OuterIteration> &log);

} // namespace fine
