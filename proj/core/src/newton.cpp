#include "cyclops/newton.hpp"

#include <cmath>

namespace cyclops {

VecX newton_solve(const std::function<VecX(const VecX&)>& residual,
                  const std::function<MatX(const VecX&)>& jac,
                  const VecX& guess, const NewtonOptions& opts) {
  if (!(opts.tol > 0.0)) throw PreconditionError("newton_solve: tol must be positive");

  VecX x = guess;
  VecX r = residual(x);
  double norm = r.lpNorm<Eigen::Infinity>();
  if (opts.observer) opts.observer(0, x, norm);

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    if (norm <= opts.tol) return x;

    const MatX J = jac(x);
    VecX step;
    try {
      step = lu_solve(J, -r);
    } catch (const SingularMatrixError&) {
      throw NonConvergenceError("newton_solve: singular Jacobian away from a root",
                                norm);
    }

    double alpha = 1.0;
    VecX x_new;
    VecX r_new;
    double norm_new = std::numeric_limits<double>::infinity();
    for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
      x_new = x + alpha * step;
      bool ok = true;
      try {
        r_new = residual(x_new);
        norm_new = r_new.lpNorm<Eigen::Infinity>();
        if (!std::isfinite(norm_new)) ok = false;
      } catch (const Error&) {
        ok = false;
      }
      if (ok && norm_new < norm) break;
      alpha *= 0.5;
      if (bt == opts.max_backtracks)
        throw NonConvergenceError("newton_solve: line search stalled", norm);
    }

    x = x_new;
    r = r_new;
    norm = norm_new;
    if (opts.observer) opts.observer(iter, x, norm);
  }

  if (norm <= opts.tol) return x;
  throw NonConvergenceError(
      "newton_solve: no convergence after " + std::to_string(opts.max_iter) +
          " iterations (residual " + std::to_string(norm) + ")",
      norm);
}

VecX newton_solve(const std::function<VecD(const VecD&)>& residual,
                  const VecX& guess, const NewtonOptions& opts) {
  auto value_fn = [&](const VecX& x) { return values(residual(constant_vector(x))); };
  auto jac_fn = [&](const VecX& x) { return jacobian(residual, x); };
  return newton_solve(value_fn, jac_fn, guess, opts);
}

}  // namespace cyclops
