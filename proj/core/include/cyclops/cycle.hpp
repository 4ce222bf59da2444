#pragma once

#include <optional>

#include "cyclops/micro.hpp"

namespace cyclops {

/// Two affine conditions q'x = b selecting where a cycle starts and ends.
///
/// Kind A sections an oscillatory state (b_minus == b_plus, a linear
/// Poincare section). Kind B pins a monotone phase state, with the end level
/// offset from the start level (e.g. one full revolution of an angle).
struct PhaseCondition {
  enum class Kind { A, B };

  VecX q;          // unit normal
  double b_minus;
  double b_plus;
  MatX Q;          // orthonormal complement of q
  Kind kind;

  static PhaseCondition section(const VecX& q, double b);
  static PhaseCondition phase_state(int state_index, int n_x, double start,
                                    double offset);

  int n_x() const { return static_cast<int>(q.size()); }
  void validate() const;
};

/// One cycle's unknowns: endpoints and physical duration.
struct CycleVariables {
  VecX x_minus;
  VecX x_plus;
  double T = 0.0;

  VecX pack() const;
  static CycleVariables unpack(const VecX& z, int n_x);
};

/// Piecewise-linear map from numerical time (cycle count) to physical time,
/// given the per-cycle durations.
double numerical_to_physical(double tau, const std::vector<double>& durations);

/// Residual of the anchored cycle system, 2 n_x + 1 equations:
///   [ Q'(x_minus - anchor); q'x_minus - b_minus;
///     x_plus - F(x_minus, U, T); q'x_plus - b_plus ].
VecX cycle_residual(const CycleVariables& z, const ControlGrid& grid,
                    const VecX& anchor, const PhaseCondition& phase,
                    const ControlledOdeModel& model, const MicroScheme& scheme);

struct CycleSolveOptions {
  double tol = 1e-10;          // infinity norm of the residual
  int max_iter = 50;
  double t_guard_lo = 0.1;     // accepted T range relative to the guess
  double t_guard_hi = 10.0;
  bool scan_interior_crossings = true;  // reject multi-cycle solutions (kind A)
};

/// Newton solve of the cycle system. The solution must stay inside the
/// duration guard interval and (kind A) must not cross the section in the
/// starting direction strictly inside the cycle; both violations raise
/// WrongCycleError since the system has multiple periodic solutions.
CycleVariables solve_cycle(const ControlledOdeModel& model, const PhaseCondition& phase,
                           const ControlGrid& grid, const VecX& anchor,
                           const CycleVariables& guess, const MicroScheme& scheme,
                           const CycleSolveOptions& opts = {});

/// Chain of anchored cycle solves: cycle k starts at the previous end point
/// and applies the grid the schedule yields for cycle k. Returns N cycles.
std::vector<CycleVariables> chain_cycle_solves(
    const ControlledOdeModel& model, const PhaseCondition& phase,
    const PolynomialControlSchedule& schedule, const VecX& x0, int n_cycles,
    const MicroScheme& scheme, const CycleVariables& first_guess,
    const CycleSolveOptions& opts = {});

struct BootstrapOptions {
  int steps = 40000;          // RK4 steps over the detection horizon
  double time_tol = 1e-10;    // bisection refinement of crossing times
};

/// Cycle guess from a fine forward simulation: detects the next two
/// same-direction crossings of q'x = b (kind A) or the two phase-state
/// threshold crossings (kind B), refined by bisection. The simulation
/// applies the column-mean of the control grid as a constant control.
CycleVariables bootstrap_cycle_guess(const ControlledOdeModel& model, const VecX& x0,
                                     const ControlGrid& grid, const PhaseCondition& phase,
                                     double t_max, const BootstrapOptions& opts = {});

/// Fixed-step RK4 simulation in physical time under a constant control.
/// Returns states at t = i * t_end / steps, i = 0..steps.
std::vector<VecX> simulate_fixed(const ControlledOdeModel& model, const VecX& x0,
                                 const VecX& u_const, double t_end, int steps);

struct SectionCrossing {
  double t;
  VecX state;
  int direction;  // sign of d(q'x)/dt at the crossing
};

/// All crossings of q'x = level along a fixed-step simulation, refined by
/// within-step bisection.
std::vector<SectionCrossing> find_crossings(const ControlledOdeModel& model,
                                            const std::vector<VecX>& states,
                                            double dt, const VecX& u_const,
                                            const VecX& q, double level,
                                            double time_tol = 1e-10);

/// Count section crossings in the starting direction strictly inside a
/// cycle; nonzero means the cycle wraps the section more than once.
int interior_same_direction_crossings(const ControlledOdeModel& model,
                                      const CycleVariables& z, const ControlGrid& grid,
                                      const PhaseCondition& phase,
                                      const MicroScheme& scheme);

}  // namespace cyclops
