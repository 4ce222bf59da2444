#include "cyclops/ocp.hpp"

namespace cyclops {

namespace {

// monomial coefficients of the Lagrange basis on the tableau nodes
MatX basis_coefficients(const ButcherTableau& tab) {
  const int s = tab.stages;
  MatX V(s, s);
  for (int r = 0; r < s; ++r)
    for (int j = 0; j < s; ++j) V(r, j) = std::pow(tab.c[r], j);
  MatX coeffs(s, s);  // row i: coefficients of basis i
  for (int i = 0; i < s; ++i) {
    VecX e = VecX::Zero(s);
    e[i] = 1.0;
    coeffs.row(i) = lu_solve(V, e).transpose();
  }
  return coeffs;
}

double basis_second_derivative(const MatX& coeffs, int i, double sigma) {
  const int s = static_cast<int>(coeffs.cols());
  double out = 0.0;
  for (int j = 2; j < s; ++j)
    out += coeffs(i, j) * j * (j - 1) * std::pow(sigma, j - 2);
  return out;
}

}  // namespace

MatX third_derivative_gram(const ButcherTableau& tab) {
  const int s = tab.stages;
  MatX G = MatX::Zero(s, s);
  if (s < 3) return G;  // derivative polynomial has degree < 2

  const MatX coeffs = basis_coefficients(tab);
  // integrand degree 2(s-3): a Gauss rule with s-2 points is exact
  const ButcherTableau quad = gl_tableau(std::max(1, s - 2));
  for (int q = 0; q < quad.stages; ++q) {
    VecX d2(s);
    for (int i = 0; i < s; ++i) d2[i] = basis_second_derivative(coeffs, i, quad.c[q]);
    G += quad.b[q] * d2 * d2.transpose();
  }
  return G;
}

double third_derivative_regularizer(const std::vector<MatX>& stage_derivs,
                                    const std::vector<double>& interval_h,
                                    const ButcherTableau& tab, double alpha) {
  if (stage_derivs.size() != interval_h.size())
    throw PreconditionError("regularizer: interval count mismatch");
  const MatX G = third_derivative_gram(tab);
  double total = 0.0;
  for (size_t j = 0; j < stage_derivs.size(); ++j) {
    const MatX& K = stage_derivs[j];
    if (K.cols() != tab.stages)
      throw PreconditionError("regularizer: stage count mismatch");
    const double h = interval_h[j];
    double acc = 0.0;
    for (int i = 0; i < tab.stages; ++i)
      for (int l = 0; l < tab.stages; ++l)
        acc += G(i, l) * K.col(i).dot(K.col(l));
    total += acc / (h * h * h);
  }
  return alpha * total;
}

}  // namespace cyclops
