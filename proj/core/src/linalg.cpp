#include "cyclops/linalg.hpp"

#include <cmath>

namespace cyclops {

LuFactorization::LuFactorization(const MatX& A) {
  if (A.rows() != A.cols() || A.rows() < 1)
    throw PreconditionError("lu_solve: matrix must be square and non-empty");
  if (!A.allFinite())
    throw PreconditionError("lu_solve: matrix has non-finite entries");

  const int n = static_cast<int>(A.rows());
  lu_ = A;
  perm_.resize(n);
  for (int i = 0; i < n; ++i) perm_[i] = i;

  const double scale = A.cwiseAbs().maxCoeff();
  const double pivot_floor = 1e-14 * scale;

  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::abs(lu_(k, k));
    for (int i = k + 1; i < n; ++i) {
      const double v = std::abs(lu_(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best <= pivot_floor)
      throw SingularMatrixError("lu_solve: pivot below singularity threshold");
    if (p != k) {
      lu_.row(p).swap(lu_.row(k));
      std::swap(perm_[p], perm_[k]);
    }
    const double inv_pivot = 1.0 / lu_(k, k);
    for (int i = k + 1; i < n; ++i) {
      const double m = lu_(i, k) * inv_pivot;
      lu_(i, k) = m;
      if (m != 0.0) lu_.row(i).tail(n - k - 1) -= m * lu_.row(k).tail(n - k - 1);
    }
  }
}

VecX LuFactorization::solve(const VecX& rhs) const {
  const int n = size();
  if (rhs.size() != n)
    throw PreconditionError("lu_solve: rhs dimension mismatch");
  VecX x(n);
  for (int i = 0; i < n; ++i) x[i] = rhs[perm_[i]];
  // forward substitution (unit lower triangle)
  for (int i = 1; i < n; ++i)
    x[i] -= lu_.row(i).head(i).dot(x.head(i));
  // back substitution
  for (int i = n - 1; i >= 0; --i) {
    if (i + 1 < n) x[i] -= lu_.row(i).tail(n - i - 1).dot(x.tail(n - i - 1));
    x[i] /= lu_(i, i);
  }
  return x;
}

VecX lu_solve(const MatX& A, const VecX& rhs) {
  return LuFactorization(A).solve(rhs);
}

MatX orthonormal_complement(const VecX& q) {
  const int n = static_cast<int>(q.size());
  if (n < 2)
    throw PreconditionError("orthonormal_complement: need dimension >= 2");
  if (std::abs(q.norm() - 1.0) > 1e-10)
    throw PreconditionError("orthonormal_complement: q is not a unit vector");

  // Householder reflector H = I - 2 v v^T / (v^T v) with v = q + sigma e1
  // maps q onto -sigma e1; its trailing columns span the complement of q.
  const double sigma = q[0] >= 0.0 ? 1.0 : -1.0;
  VecX v = q;
  v[0] += sigma;
  const double beta = 2.0 / v.squaredNorm();

  MatX Q(n, n - 1);
  for (int j = 0; j < n - 1; ++j) {
    VecX col = -beta * v[j + 1] * v;
    col[j + 1] += 1.0;
    if (col[j + 1] < 0.0) col = -col;
    Q.col(j) = col;
  }
  return Q;
}

}  // namespace cyclops
