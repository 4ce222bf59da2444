#pragma once

#include <Eigen/Core>

#include "cyclops/errors.hpp"

namespace cyclops {

// Dense row-major-indexed matrices and vectors used throughout. Backed by
// Eigen; all public contracts are expressed on these aliases.
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

template <class Scalar>
using VecT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Solve A x = rhs by LU with partial pivoting.
///
/// Throws SingularMatrixError when a pivot magnitude drops below
/// 1e-14 * max|A_ij|.
VecX lu_solve(const MatX& A, const VecX& rhs);

/// In-place factorization handle for repeated solves against one matrix.
class LuFactorization {
public:
  explicit LuFactorization(const MatX& A);
  VecX solve(const VecX& rhs) const;
  int size() const { return static_cast<int>(lu_.rows()); }

private:
  MatX lu_;
  Eigen::VectorXi perm_;
};

/// Orthonormal complement of a unit vector q: returns Q (n x n-1) with
/// Q^T q = 0 and Q^T Q = I. Householder-based and deterministic; column
/// signs are fixed so that Q(j+1, j) >= 0.
MatX orthonormal_complement(const VecX& q);

}  // namespace cyclops
