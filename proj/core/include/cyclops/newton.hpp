#pragma once

#include <functional>
#include <optional>

#include "cyclops/dual.hpp"
#include "cyclops/linalg.hpp"

namespace cyclops {

struct NewtonOptions {
  double tol = 1e-10;   // infinity norm of the residual
  int max_iter = 50;
  int max_backtracks = 30;
  // called after each accepted iterate with (iteration, x, residual norm)
  std::function<void(int, const VecX&, double)> observer;
};

/// Damped Newton on residual(x) = 0 with a caller-supplied Jacobian.
///
/// Full steps with backtracking: the step is halved (up to max_backtracks
/// times) while the residual norm fails to decrease. Throws
/// NonConvergenceError with the final residual norm on iteration exhaustion
/// and propagates SingularMatrixError from the linear solver.
VecX newton_solve(const std::function<VecX(const VecX&)>& residual,
                  const std::function<MatX(const VecX&)>& jac,
                  const VecX& guess, const NewtonOptions& opts = {});

/// Same, with the Jacobian obtained from the derivative subsystem.
VecX newton_solve(const std::function<VecD(const VecD&)>& residual,
                  const VecX& guess, const NewtonOptions& opts = {});

}  // namespace cyclops
