#include <random>

#include "cyclops/linalg.hpp"
#include "doctest.h"

using namespace cyclops;

TEST_CASE("lu_solve identity and diagonal") {
  MatX I3 = MatX::Identity(3, 3);
  VecX rhs(3);
  rhs << 1, 2, 3;
  CHECK((lu_solve(I3, rhs) - rhs).lpNorm<Eigen::Infinity>() == 0.0);

  MatX D(2, 2);
  D << 2, 0, 0, 4;
  VecX b(2);
  b << 2, 8;
  VecX x = lu_solve(D, b);
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(2.0));
}

TEST_CASE("lu_solve matches hand elimination") {
  MatX A(2, 2);
  A << 1, 2, 3, 4;
  VecX b(2);
  b << 5, 11;
  VecX x = lu_solve(A, b);
  // elimination: x2 = (11 - 3*5/1)/(4 - 3*2) = 2, x1 = 5 - 2*2 = 1
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(x[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("lu_solve residual bound on random systems") {
  std::mt19937 rng(42);
  std::normal_distribution<double> dist;
  for (int t = 0; t < 50; ++t) {
    const int n = 1 + t % 12;
    MatX A(n, n);
    VecX b(n);
    for (int i = 0; i < n; ++i) {
      b[i] = dist(rng);
      for (int j = 0; j < n; ++j) A(i, j) = dist(rng);
    }
    A += 3.0 * MatX::Identity(n, n);  // keep it comfortably nonsingular
    const VecX x = lu_solve(A, b);
    const double resid = (A * x - b).lpNorm<Eigen::Infinity>();
    CHECK(resid <= 1e-10 * (1.0 + b.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("lu_solve rejects singular matrices") {
  MatX A(2, 2);
  A << 1, 2, 2, 4;
  VecX b(2);
  b << 1, 2;
  CHECK_THROWS_AS(lu_solve(A, b), SingularMatrixError);
}

TEST_CASE("orthonormal complement of axis vectors") {
  VecX q(2);
  q << 1, 0;
  MatX Q = orthonormal_complement(q);
  REQUIRE(Q.rows() == 2);
  REQUIRE(Q.cols() == 1);
  CHECK(std::abs(Q.col(0).dot(q)) <= 1e-12);
  CHECK(std::abs(Q.col(0).norm() - 1.0) <= 1e-12);
  CHECK(std::abs(std::abs(Q(1, 0)) - 1.0) <= 1e-12);

  VecX e3(3);
  e3 << 0, 0, 1;
  MatX Q3 = orthonormal_complement(e3);
  // complement spans the first two coordinates
  CHECK(Q3.row(2).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("orthonormal complement of a diagonal unit vector") {
  VecX q(2);
  q << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  MatX Q = orthonormal_complement(q);
  CHECK(std::abs((Q.transpose() * q)(0, 0)) <= 1e-12);
  CHECK(std::abs((Q.transpose() * Q)(0, 0) - 1.0) <= 1e-12);
}

TEST_CASE("orthonormal complement identities over random unit vectors") {
  std::mt19937 rng(7);
  std::normal_distribution<double> dist;
  for (int t = 0; t < 1000; ++t) {
    const int n = 2 + t % 9;
    VecX q(n);
    do {
      for (int i = 0; i < n; ++i) q[i] = dist(rng);
    } while (q.norm() < 1e-3);
    q.normalize();
    const MatX Q = orthonormal_complement(q);

    MatX full(n, n);
    full.col(0) = q;
    full.rightCols(n - 1) = Q;
    const MatX gram = full.transpose() * full - MatX::Identity(n, n);
    CHECK(gram.lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("orthonormal complement rejects non-unit input") {
  VecX q(3);
  q << 1, 1, 0;
  CHECK_THROWS_AS(orthonormal_complement(q), PreconditionError);
}

TEST_CASE("orthonormal complement is deterministic") {
  VecX q(4);
  q << 0.3, -0.5, 0.2, 0.0;
  q.normalize();
  const MatX Q1 = orthonormal_complement(q);
  const MatX Q2 = orthonormal_complement(q);
  CHECK((Q1 - Q2).lpNorm<Eigen::Infinity>() == 0.0);
}
