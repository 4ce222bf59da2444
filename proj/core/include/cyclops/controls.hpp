#pragma once

#include <vector>

#include "cyclops/dual.hpp"
#include "cyclops/linalg.hpp"

namespace cyclops {

/// Piecewise-constant controls over one cycle: column m of U applies on the
/// m-th of N_ctrl equal subintervals of local numerical time [0,1).
struct ControlGrid {
  MatX U;  // n_u x N_ctrl

  int n_ctrl() const { return static_cast<int>(U.cols()); }
  int n_u() const { return static_cast<int>(U.rows()); }
};

/// Column index applied at local time tau_local in [0,1).
int control_interval_index(double tau_local, int n_ctrl);

/// Control vector at local time tau_local.
VecX control_at_tau(const ControlGrid& grid, double tau_local);

/// Lagrange interpolation basis on distinct nodes: ell_i(t_j) = delta_ij.
double lagrange_basis(const std::vector<double>& times, int i, double tau);

/// Cycle controls derived from a low-order polynomial in numerical time:
/// the grid applied on cycle k is sum_i U_c[i] * ell_i(k + 1/2), where the
/// basis is built on the construction times.
struct PolynomialControlSchedule {
  std::vector<double> construction_times;  // strictly increasing, in [0, N]
  std::vector<MatX> construction_controls; // d_u matrices, each n_u x N_ctrl

  int d_u() const { return static_cast<int>(construction_times.size()); }
  int n_u() const { return construction_controls.empty() ? 0 : static_cast<int>(construction_controls[0].rows()); }
  int n_ctrl() const { return construction_controls.empty() ? 0 : static_cast<int>(construction_controls[0].cols()); }

  void validate() const;

  /// Constant-in-tau schedule (d_u = 1).
  static PolynomialControlSchedule constant(const MatX& U, double tau_mid);

  /// Default construction times on [0, n_total]: {N/2} for d_u = 1, {0, N}
  /// for d_u = 2, Chebyshev-Lobatto points for d_u >= 3.
  static std::vector<double> default_times(int d_u, double n_total);

  /// Evaluate the polynomial at arbitrary numerical time.
  MatX eval_at_tau(double tau) const;

  /// Basis weights ell_i(tau) for all i.
  std::vector<double> basis_weights(double tau) const;
};

/// Grid applied on cycle k (evaluated at k + 1/2).
ControlGrid schedule_eval(const PolynomialControlSchedule& schedule, int k);

}  // namespace cyclops
