#pragma once

#include "cyclops/nlp.hpp"

namespace cyclops {

/// One group of constraint rows. Linear groups carry constant Jacobian
/// entries only; nonlinear groups refresh their entries per evaluation.
struct RowGroup {
  int offset = 0;
  int dim = 0;
  std::function<void(const VecX& w, VecX& r)> value;
  std::function<void(const VecX& w, std::vector<Triplet>& out)> jacobian;  // optional
  std::vector<Triplet> const_entries;
};

/// Row-wise assembler for a constraint vector with a fixed sparsity pattern.
class ConstraintSet {
public:
  explicit ConstraintSet(int n_vars) : n_vars_(n_vars) {}

  int rows() const { return rows_; }

  /// Reserve rows and register the group. Returns the group's row offset.
  int add(RowGroup group);

  VecX eval(const VecX& w) const;
  SpMat jacobian(const VecX& w) const;

  std::function<VecX(const VecX&)> value_fn() const;
  std::function<SpMat(const VecX&)> jacobian_fn() const;

private:
  int n_vars_;
  int rows_ = 0;
  std::shared_ptr<std::vector<RowGroup>> groups_ =
      std::make_shared<std::vector<RowGroup>>();
};

/// Objective as a sum of closed-form terms with a constant quadratic part.
class ObjectiveAccumulator {
public:
  explicit ObjectiveAccumulator(int n_vars) : n_vars_(n_vars) {}

  void add_term(std::function<double(const VecX&)> value,
                std::function<void(const VecX&, VecX&)> add_gradient);
  /// Constant Hessian entries of the quadratic terms (full symmetric).
  void add_hessian(int row, int col, double v) { hess_.emplace_back(row, col, v); }

  std::function<double(const VecX&)> value_fn() const;
  std::function<VecX(const VecX&)> gradient_fn() const;
  SpMat hessian() const;

private:
  int n_vars_;
  struct Term {
    std::function<double(const VecX&)> value;
    std::function<void(const VecX&, VecX&)> add_gradient;
  };
  std::shared_ptr<std::vector<Term>> terms_ = std::make_shared<std::vector<Term>>();
  std::vector<Triplet> hess_;
};

/// Rescale decision variables (w_phys = scale .* w) and constraint rows.
/// Bounds, guesses, evaluators, Jacobians and the quadratic Hessian are
/// transformed consistently; the scale is recorded for extraction.
NlpProblem scale_problem(NlpProblem p, const VecX& var_scale, const VecX& eq_scale,
                         const VecX& in_scale);

}  // namespace cyclops
