#pragma once

#include "cyclops/butcher.hpp"
#include "cyclops/controls.hpp"
#include "cyclops/model.hpp"

namespace cyclops {

/// Integrator for one cycle of the time-scaled dynamics
/// dx/dtau = T f(x, u_m) over tau in [0,1], split into the control grid's
/// N_ctrl equal intervals.
struct MicroScheme {
  enum class Variant { rk4_chain, gl_step };
  Variant variant = Variant::rk4_chain;
  int steps_per_interval = 10;  // rk4_chain: RK4 steps per control interval
  int stages = 3;               // gl_step: one implicit step per interval

  void validate() const;
  std::string describe() const;
};

/// RK4 chain over one cycle; templated so control entries and the duration
/// may carry derivatives. No internal iteration: a pure composition.
template <class S>
VecT<S> rk4_cycle_flow(const ControlledOdeModel& model, VecT<S> x,
                       const MatT<S>& U, const S& T, int steps_per_interval) {
  const int n_ctrl = static_cast<int>(U.cols());
  const S h = S(1.0) / S(double(n_ctrl * steps_per_interval));
  int step = 0;
  for (int m = 0; m < n_ctrl; ++m) {
    const VecT<S> u = U.col(m);
    for (int j = 0; j < steps_per_interval; ++j, ++step) {
      const VecT<S> k1 = T * model.rhs(x, u);
      const VecT<S> k2 = T * model.rhs(VecT<S>(x + (h / S(2.0)) * k1), u);
      const VecT<S> k3 = T * model.rhs(VecT<S>(x + (h / S(2.0)) * k2), u);
      const VecT<S> k4 = T * model.rhs(VecT<S>(x + h * k3), u);
      x += (h / S(6.0)) * (k1 + S(2.0) * k2 + S(2.0) * k3 + k4);
      for (int i = 0; i < x.size(); ++i)
        if (!std::isfinite(value_of(x[i])))
          throw SimulationError("micro integration produced a non-finite state", step);
    }
  }
  return x;
}

/// End state of one cycle from x_minus under the given scheme.
VecX micro_integrate(const ControlledOdeModel& model, const VecX& x_minus,
                     const ControlGrid& grid, double T, const MicroScheme& scheme);

/// Flow map value plus exact sensitivities with respect to the start state
/// and the cycle duration.
struct FlowSensitivity {
  VecX x_plus;
  MatX d_dx;  // n x n
  VecX d_dT;  // n
};
FlowSensitivity flow_with_sensitivity(const ControlledOdeModel& model,
                                      const VecX& x_minus, const ControlGrid& grid,
                                      double T, const MicroScheme& scheme);

/// Interior states sampled along the cycle (RK4: every step; GL: every
/// interval endpoint). Includes both endpoints. Used for crossing scans.
std::vector<VecX> micro_samples(const ControlledOdeModel& model, const VecX& x_minus,
                                const ControlGrid& grid, double T,
                                const MicroScheme& scheme);

/// Full record of an implicit micro integration: interval endpoint states,
/// stage states, and stage derivative values (d x/d tau over the cycle).
struct MicroTrace {
  std::vector<VecX> nodes;         // N_ctrl + 1 states
  std::vector<MatX> stage_states;  // per interval, n x stages
  std::vector<MatX> stage_derivs;  // per interval, n x stages
};
MicroTrace micro_trace_gl(const ControlledOdeModel& model, const VecX& x_minus,
                          const ControlGrid& grid, double T, int stages);

}  // namespace cyclops
