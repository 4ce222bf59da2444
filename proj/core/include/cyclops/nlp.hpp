#pragma once

#include <functional>
#include <optional>
#include <string>

#include "cyclops/dual.hpp"
#include "cyclops/sparse_ldlt.hpp"

namespace cyclops {

/// Name-tagged slices of the decision vector.
struct VariableBlock {
  std::string name;
  int offset = 0;
  int rows = 0;
  int cols = 1;
  int size() const { return rows * cols; }
};

struct VariableLayout {
  std::vector<VariableBlock> blocks;
  int total = 0;

  int add(const std::string& name, int rows, int cols = 1) {
    blocks.push_back({name, total, rows, cols});
    total += rows * cols;
    return blocks.back().offset;
  }
  const VariableBlock& find(const std::string& name) const;
  bool has(const std::string& name) const;
};

/// Generic sparse constrained program:
///   min f(w)  s.t.  c_eq(w) = 0,  c_in(w) >= 0,  lb <= w <= ub.
///
/// Jacobian evaluators must return matrices with an evaluation-independent
/// sparsity pattern. The optional constant objective Hessian carries the
/// quadratic part of the objective (used as a Gauss-Newton model); when it
/// is absent the solver falls back to damped BFGS on small problems.
struct NlpProblem {
  std::string name;
  int n = 0;
  int m_eq = 0;
  int m_in = 0;

  VecX w0;
  VecX lb, ub;

  std::function<double(const VecX&)> objective;
  std::function<VecX(const VecX&)> objective_gradient;
  std::optional<SpMat> objective_hessian;

  std::function<VecX(const VecX&)> eq;
  std::function<SpMat(const VecX&)> eq_jacobian;

  std::function<VecX(const VecX&)> ineq;
  std::function<SpMat(const VecX&)> ineq_jacobian;

  VariableLayout layout;
  VecX var_scale;  // physical value = var_scale .* w (ones when unscaled)

  void validate() const;
  int constraint_count() const { return m_eq + m_in; }
};

enum class NlpStatus { optimal, max_iter, infeasible, step_failure };
const char* to_string(NlpStatus s);

struct KktResiduals {
  double stationarity = 0.0;
  double feasibility = 0.0;
  double complementarity = 0.0;
  double max() const;
};

struct NlpIterate {
  int iter;
  double objective;
  KktResiduals kkt;
  double mu;
  double step_length;
  double merit;
  VecX w;
};

struct NlpSolution {
  VecX w;
  VecX y_eq;    // equality multipliers
  VecX y_in;    // inequality multipliers (>= 0)
  VecX z_lb;    // lower bound multipliers (>= 0)
  VecX z_ub;    // upper bound multipliers (>= 0)
  NlpStatus status = NlpStatus::max_iter;
  int iterations = 0;
  KktResiduals kkt;
  double objective = 0.0;
};

struct NlpOptions {
  double tol = 1e-8;
  int max_iter = 500;
  double mu0 = 0.1;
  enum class Kkt { automatic, dense, sparse } kkt = Kkt::automatic;
  int bfgs_max_dim = 400;
  bool log = false;                 // iteration lines to stdout
  std::string log_csv;              // optional iteration CSV
  std::function<void(const NlpIterate&)> observer;
};

/// Unperturbed KKT residuals at a candidate primal-dual point.
KktResiduals kkt_residual(const NlpProblem& p, const VecX& w, const VecX& y_eq,
                          const VecX& y_in, const VecX& z_lb, const VecX& z_ub);

/// Assembled symmetric saddle system
///   [ H + delta I     A' ] [ dw ]   [ r_w ]
///   [ A       -delta_c I ] [ dy ] = [ r_y ]
struct KktSystem {
  SpMat H;  // n x n, symmetric (lower triangle read)
  SpMat A;  // m x n
  double delta = 0.0;
  double delta_c = 1e-11;
};

/// Direct solve of the saddle system; dense LU by default, sparse LDL^T on
/// request (pattern reanalyzed per call -- reuse SparseKktFactor for loops).
VecX kkt_linear_solve(const KktSystem& sys, const VecX& rhs, bool sparse = false);

/// Slack interior-point method with monotone barrier reduction,
/// fraction-to-boundary steps, an l1 merit line search, and inertia-corrected
/// regularization. Throws cyclops::Error on unbounded objectives.
NlpSolution solve_nlp(const NlpProblem& p, const NlpOptions& opts = {});

/// Build a dense-Jacobian problem from derivative-subsystem callbacks
/// (convenience for small programs and tests).
NlpProblem make_problem_ad(int n, const std::function<Dual(const VecD&)>& objective,
                           const std::function<VecD(const VecD&)>& eq,
                           const std::function<VecD(const VecD&)>& ineq,
                           const VecX& w0, const VecX& lb, const VecX& ub);

}  // namespace cyclops
