#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "cyclops/linalg.hpp"

namespace cyclops {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Sparse LDL^T for the symmetric quasi-definite saddle systems assembled by
/// the interior-point iteration. Symbolic analysis is cached across numeric
/// refactorizations; the inertia (count of negative pivots) is exposed so
/// the caller can regularize until the expected signature appears.
class SparseKktFactor {
public:
  /// Analyze the pattern (lower triangle is used).
  void analyze(const SpMat& K);

  /// Refactor with new values on the analyzed pattern.
  /// Returns false on a numerical failure (zero pivot).
  bool factorize(const SpMat& K);

  int negative_pivots() const;
  double min_abs_pivot() const;

  VecX solve(const VecX& rhs) const;

  bool analyzed() const { return analyzed_; }

private:
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt_;
  bool analyzed_ = false;
};

}  // namespace cyclops
