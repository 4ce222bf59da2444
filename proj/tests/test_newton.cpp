#include <cmath>

#include "cyclops/newton.hpp"
#include "doctest.h"

using namespace cyclops;

TEST_CASE("newton finds the square root") {
  auto residual = [](const VecD& x) {
    VecD out(1);
    out[0] = x[0] * x[0] - 4.0;
    return out;
  };
  VecX guess(1);
  guess << 3.0;
  NewtonOptions opts;
  opts.tol = 1e-12;
  const VecX x = newton_solve(residual, guess, opts);
  CHECK(x[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("affine residual converges in one iteration") {
  const double c = -7.25;
  int iterations = 0;
  NewtonOptions opts;
  opts.observer = [&](int it, const VecX&, double) { iterations = it; };
  auto residual = [&](const VecD& x) {
    VecD out(1);
    out[0] = x[0] - c;
    return out;
  };
  VecX guess(1);
  guess << 100.0;
  const VecX x = newton_solve(residual, guess, opts);
  CHECK(x[0] == doctest::Approx(c));
  CHECK(iterations == 1);
}

TEST_CASE("no real root reports non-convergence with the final norm") {
  auto residual = [](const VecD& x) {
    VecD out(1);
    out[0] = x[0] * x[0] + 1.0;
    return out;
  };
  VecX guess(1);
  guess << 1.0;
  NewtonOptions opts;
  opts.max_iter = 40;
  try {
    newton_solve(residual, guess, opts);
    FAIL("expected NonConvergenceError");
  } catch (const NonConvergenceError& e) {
    CHECK(e.final_residual_norm() >= 1.0);  // x^2 + 1 >= 1 everywhere
  }
}

TEST_CASE("quadratic convergence near a simple root") {
  // track |x_k - 2| along the iteration on x^2 - 4
  std::vector<double> errs;
  NewtonOptions opts;
  opts.tol = 1e-14;
  opts.observer = [&](int, const VecX& x, double) { errs.push_back(std::abs(x[0] - 2.0)); };
  auto residual = [](const VecD& x) {
    VecD out(1);
    out[0] = x[0] * x[0] - 4.0;
    return out;
  };
  VecX guess(1);
  guess << 3.0;
  newton_solve(residual, guess, opts);

  bool checked = false;
  for (size_t k = 1; k + 1 < errs.size(); ++k) {
    if (errs[k] > 1e-12 && errs[k] < 0.5) {
      // e_{k+1} / e_k^2 stays bounded (here by the 1/(2 root) curvature ~ 0.25)
      CHECK(errs[k + 1] / (errs[k] * errs[k]) <= 1.0);
      checked = true;
    }
  }
  CHECK(checked);
}

TEST_CASE("two-dimensional system with callback jacobian") {
  // intersect a circle with a line
  auto residual = [](const VecX& v) {
    VecX out(2);
    out[0] = v[0] * v[0] + v[1] * v[1] - 1.0;
    out[1] = v[0] - v[1];
    return out;
  };
  auto jac = [](const VecX& v) {
    MatX J(2, 2);
    J << 2 * v[0], 2 * v[1], 1, -1;
    return J;
  };
  VecX guess(2);
  guess << 1.0, 0.5;
  const VecX x = newton_solve(residual, jac, guess, {});
  CHECK(x[0] == doctest::Approx(std::sqrt(0.5)));
  CHECK(x[1] == doctest::Approx(std::sqrt(0.5)));
}
