#include "cyclops/butcher.hpp"

#include <algorithm>
#include <cmath>

namespace cyclops {

namespace {

// Legendre P_s and its derivative on [-1,1] via the three-term recurrence.
std::pair<double, double> legendre_with_deriv(int s, double x) {
  double p_prev = 1.0, p = x;
  if (s == 0) return {1.0, 0.0};
  for (int k = 2; k <= s; ++k) {
    const double p_next = ((2 * k - 1) * x * p - (k - 1) * p_prev) / k;
    p_prev = p;
    p = p_next;
  }
  const double dp = s * (x * p - p_prev) / (x * x - 1.0);
  return {p, dp};
}

double lagrange_at(const VecX& nodes, int j, double t) {
  double out = 1.0;
  for (int m = 0; m < nodes.size(); ++m) {
    if (m == j) continue;
    out *= (t - nodes[m]) / (nodes[j] - nodes[m]);
  }
  return out;
}

}  // namespace

ButcherTableau gl_tableau(int s) {
  if (s < 1 || s > 5)
    throw PreconditionError("gl_tableau: stage count must be in 1..5");

  ButcherTableau tab;
  tab.stages = s;
  tab.c.resize(s);
  tab.b.resize(s);
  tab.A.resize(s, s);

  // Roots of P_s by Newton from the Chebyshev-like initial guesses.
  for (int k = 0; k < s; ++k) {
    double x = std::cos(M_PI * (k + 0.75) / (s + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre_with_deriv(s, x);
      const double step = p / dp;
      x -= step;
      if (std::abs(step) < 1e-15) break;
    }
    const auto [p, dp] = legendre_with_deriv(s, x);
    (void)p;
    tab.c[k] = 0.5 * (1.0 + x);
    tab.b[k] = 1.0 / ((1.0 - x * x) * dp * dp);
  }

  // Sort nodes ascending, carrying weights along.
  std::vector<int> idx(s);
  for (int i = 0; i < s; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return tab.c[a] < tab.c[b]; });
  VecX c_sorted(s), b_sorted(s);
  for (int i = 0; i < s; ++i) {
    c_sorted[i] = tab.c[idx[i]];
    b_sorted[i] = tab.b[idx[i]];
  }
  tab.c = c_sorted;
  tab.b = b_sorted;

  // A_ij = integral of Lagrange basis j over [0, c_i], via the s-point rule
  // itself (exact: the basis has degree s-1 < 2s).
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      double acc = 0.0;
      for (int k = 0; k < s; ++k)
        acc += tab.b[k] * lagrange_at(tab.c, j, tab.c[i] * tab.c[k]);
      tab.A(i, j) = tab.c[i] * acc;
    }
  }

  // consistency checks
  if (std::abs(tab.b.sum() - 1.0) > 1e-12)
    throw Error("gl_tableau: weights do not sum to one");
  for (int i = 0; i < s; ++i) {
    if (std::abs(tab.A.row(i).sum() - tab.c[i]) > 1e-12)
      throw Error("gl_tableau: row-sum consistency violated");
    if (!(tab.c[i] > 0.0 && tab.c[i] < 1.0))
      throw Error("gl_tableau: node outside (0,1)");
    if (i > 0 && !(tab.c[i] > tab.c[i - 1]))
      throw Error("gl_tableau: nodes not increasing");
  }
  return tab;
}

}  // namespace cyclops
