#pragma once

#include "cyclops/envelope.hpp"
#include "cyclops/transcription.hpp"

namespace cyclops {

enum class OcpForm { envelope, full };

struct OcpObjective {
  enum class Terminal { none, tracking, fuel };
  Terminal terminal = Terminal::tracking;
  VecX target;               // tracking target (state dimension)
  double alpha = 0.0;        // weight on the envelope third-derivative penalty
  double fuel_weight = 1.0;  // scales (m0 - m_end) for fuel objectives
  int mass_index = 6;
};

/// Mission windows on the endpoint, expressed through classical elements
/// computed from the final node, plus a mass budget window.
struct TerminalWindows {
  bool enabled = false;
  double a_target = 0.0, a_tol = 5.0;            // km
  double e_target = 0.0, e_tol = 1e-4;
  double inc_target = 0.0, inc_tol = 0.01 * M_PI / 180.0;
  double mass_min = 0.0;
  double mass_max = 0.0;  // 0 -> initial mass
};

struct OcpSpec {
  const ControlledOdeModel* model = nullptr;
  PhaseCondition phase;
  MicroScheme micro;
  int n_ctrl = 1;

  int cycles_per_interval = 1;  // macro step width, in cycles
  int n_intervals = 1;          // one collocation step per interval
  int macro_stages = 3;

  int d_u = 1;
  bool controls_per_interval = false;
  std::vector<double> construction_times;  // empty -> default rule

  VecX x0;
  OcpObjective objective;

  VecX u_lo, u_hi;                 // control box, +-inf allowed
  bool u_norm_unit_ball = false;   // ||u_col||^2 <= 1 rows
  TerminalWindows terminal;
  VecX state_lb, state_ub;         // bounds applied to every state-valued variable

  double t_guard_lo = 0.3, t_guard_hi = 3.0;  // duration bounds around the guess
  double T_guess = 0.0;                       // 0 -> bootstrap from x0

  enum class Init { hold_initial, interpolate_target } init = Init::hold_initial;
  VecX init_target_state;  // interpolate_target endpoint (state dimension)
  VecX init_control;       // control column guess (control dimension)

  bool scale_variables = false;

  int n_total() const { return cycles_per_interval * n_intervals; }
  void validate() const;
};

/// A transcribed program plus the geometry needed to interpret its solution.
struct TranscribedOcp {
  NlpProblem nlp;
  OcpForm form = OcpForm::envelope;

  const ControlledOdeModel* model = nullptr;
  PhaseCondition phase;
  MicroScheme micro;
  int n_ctrl = 1;
  OcpObjective objective;

  int n_intervals = 1;
  int cycles_per_interval = 1;
  int macro_stages = 3;
  ButcherTableau macro_tab;
  std::vector<double> interval_start;  // tau at interval begin
  std::vector<double> interval_h;
  bool controls_per_interval = false;
  int d_u = 1;
  std::vector<std::vector<double>> schedule_times;  // per control block
  VecX x0;

  int n_total() const { return cycles_per_interval * n_intervals; }
};

/// Direct transcription of the cycle-chain program: one cycle block per
/// cycle, connected end to start, with the polynomial control schedule (or
/// per-cycle grids) as the free controls. Explicit micro chains only.
TranscribedOcp transcribe_full_ocp(const OcpSpec& spec);

/// Collocation transcription of the envelope DAE: macro nodes, stage states
/// and stage cycles (plus lifted micro variables under an implicit micro
/// scheme), controls from the schedule.
TranscribedOcp transcribe_envelope_ocp(const OcpSpec& spec);

/// Integral of the squared third derivative of the per-interval collocation
/// polynomials, evaluated by exact quadrature, times alpha. Stage derivative
/// matrices are n x stages.
double third_derivative_regularizer(const std::vector<MatX>& stage_derivs,
                                    const std::vector<double>& interval_h,
                                    const ButcherTableau& tab, double alpha);

/// Gram matrix G of the basis second derivatives: the per-interval integral
/// is h^{-3} sum_{il} G_il k_i . k_l.
MatX third_derivative_gram(const ButcherTableau& tab);

struct OcpSolutionData {
  OcpForm form = OcpForm::envelope;
  std::vector<double> node_taus;
  std::vector<VecX> nodes;
  std::vector<double> stage_taus;
  std::vector<VecX> stage_states;
  std::vector<CycleVariables> stage_cycles;
  std::vector<CycleVariables> cycles;  // full form: one per cycle
  std::vector<PolynomialControlSchedule> schedules;  // one, or one per interval
  double objective = 0.0;
  double tracking_term = 0.0;
  double regularizer_term = 0.0;
  double fuel_term = 0.0;
  VecX endpoint;

  /// Cycle controls for cycle k under the solved schedules.
  ControlGrid grid_for_cycle(int k, const TranscribedOcp& t) const;
};

/// Decode a solver point back into named trajectories and re-derive the
/// objective terms from the extracted blocks.
OcpSolutionData extract_solution(const TranscribedOcp& t, const NlpSolution& sol);

struct SimulatedChain {
  std::vector<CycleVariables> cycles;
  VecX endpoint;
  double tracking_objective = 0.0;  // against the spec's target when present
  std::vector<double> durations;
};

/// Re-simulate the solved controls with high-accuracy chained cycle solves
/// (fine explicit micro integration), warm-started from the solution.
SimulatedChain a_posteriori_simulate(const TranscribedOcp& t, const OcpSolutionData& data,
                                     int fine_steps_per_cycle = 3000);

}  // namespace cyclops
