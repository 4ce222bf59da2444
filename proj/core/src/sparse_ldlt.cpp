#include "cyclops/sparse_ldlt.hpp"

#include <cmath>

namespace cyclops {

void SparseKktFactor::analyze(const SpMat& K) {
  ldlt_.analyzePattern(K);
  analyzed_ = true;
}

bool SparseKktFactor::factorize(const SpMat& K) {
  if (!analyzed_) analyze(K);
  ldlt_.factorize(K);
  if (ldlt_.info() != Eigen::Success) return false;
  const auto& d = ldlt_.vectorD();
  for (int i = 0; i < d.size(); ++i)
    if (!(std::isfinite(d[i])) || d[i] == 0.0) return false;
  return true;
}

int SparseKktFactor::negative_pivots() const {
  const auto& d = ldlt_.vectorD();
  int count = 0;
  for (int i = 0; i < d.size(); ++i)
    if (d[i] < 0.0) ++count;
  return count;
}

double SparseKktFactor::min_abs_pivot() const {
  const auto& d = ldlt_.vectorD();
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d.size(); ++i) m = std::min(m, std::abs(d[i]));
  return m;
}

VecX SparseKktFactor::solve(const VecX& rhs) const { return ldlt_.solve(rhs); }

}  // namespace cyclops
