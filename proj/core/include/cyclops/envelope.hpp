#pragma once

#include "cyclops/cycle.hpp"

namespace cyclops {

/// Semi-explicit DAE whose differential state follows the slow drift of the
/// oscillations: the slope at x is the increment over one cycle solved
/// around x, with x held midway between the cycle endpoints in the
/// directions complementary to the phase normal.
struct EnvelopeDae {
  const ControlledOdeModel* model = nullptr;
  PhaseCondition phase;
  MicroScheme micro;
  int n_ctrl = 1;
  PolynomialControlSchedule schedule;

  int n_x() const { return model->state_dim(); }
  int algebraic_dim() const { return 2 * n_x() + 1; }

  ControlGrid grid_at(double tau) const {
    return ControlGrid{schedule.eval_at_tau(tau)};
  }
};

/// Slope estimate from one cycle: x_plus - x_minus. Independent of x.
VecX envelope_rhs(const CycleVariables& z);

/// Algebraic residual at (x, z): midpoint connection projected onto the
/// complement of q, then the anchored-free cycle conditions; square in z.
///   [ Q'((x_plus + x_minus)/2 - x); q'x_minus - b_minus;
///     x_plus - F(x_minus, U, T); q'x_plus - b_plus ]
VecX envelope_algebraic(const VecX& x, const CycleVariables& z,
                        const ControlGrid& grid, const EnvelopeDae& dae);

/// Solve the algebraic conditions for z at a fixed differential state
/// (index-1 initialization). Guard semantics match solve_cycle.
CycleVariables consistent_init(const VecX& x0, const EnvelopeDae& dae,
                               const CycleVariables& guess, double tau = 0.0,
                               const CycleSolveOptions& opts = {});

/// Macro integration grid over numerical time: step sizes (cycles per step)
/// and the implicit RK stage count.
struct MacroGrid {
  std::vector<double> h;
  int stages = 3;

  double tau_total() const {
    double s = 0.0;
    for (double v : h) s += v;
    return s;
  }
  static MacroGrid uniform(double tau_total, int steps, int stages);
};

struct MacroStageResult {
  std::vector<VecX> stage_states;
  std::vector<CycleVariables> stage_cycles;
  VecX x_next;
};

/// One implicit RK step of width h from (tau_j, x_j): solves the coupled
/// stage system (all stage states and stage cycles at once) by Newton with
/// the supplied warm starts.
MacroStageResult macro_step(const EnvelopeDae& dae, const VecX& x_j, double tau_j,
                            double h, const ButcherTableau& tab,
                            const std::vector<CycleVariables>& z_guesses,
                            double tol = 1e-10);

struct EnvelopePoint {
  double tau;
  double t;      // physical time reconstructed from stage durations
  bool is_node;
  VecX x;
  CycleVariables z;
};

struct EnvelopeTrajectory {
  std::vector<EnvelopePoint> points;  // nodes and stages, ascending tau
  const EnvelopePoint& node(int j) const;  // j-th node
  int node_count() const;
  VecX endpoint() const;
};

/// Macro-integrate the DAE from x0 over the grid. Stage cycles are
/// warm-started from the previous stage, the first step from the consistent
/// initialization at x0; consistent cycles are also attached to every node.
EnvelopeTrajectory integrate_envelope(const EnvelopeDae& dae, const VecX& x0,
                                      const MacroGrid& grid,
                                      const CycleVariables& init_guess,
                                      double tol = 1e-10);

}  // namespace cyclops
