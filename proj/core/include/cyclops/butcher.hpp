#pragma once

#include "cyclops/linalg.hpp"

namespace cyclops {

/// Collocation tableau on [0,1]: nodes c, weights b, stage matrix A with
/// A_ij = integral of the j-th Lagrange basis polynomial from 0 to c_i.
struct ButcherTableau {
  int stages = 0;
  MatX A;
  VecX b;
  VecX c;
};

/// Gauss-Legendre collocation tableau with s stages (order 2s), 1 <= s <= 5.
/// Nodes are computed at call time from Legendre roots (Newton refinement to
/// 1e-15), not transcribed from tables.
ButcherTableau gl_tableau(int s);

}  // namespace cyclops
