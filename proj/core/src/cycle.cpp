#include "cyclops/cycle.hpp"

#include <cmath>

#include "cyclops/newton.hpp"

namespace cyclops {

PhaseCondition PhaseCondition::section(const VecX& q, double b) {
  PhaseCondition pc;
  pc.q = q;
  pc.b_minus = b;
  pc.b_plus = b;
  pc.Q = orthonormal_complement(q);
  pc.kind = Kind::A;
  pc.validate();
  return pc;
}

PhaseCondition PhaseCondition::phase_state(int state_index, int n_x, double start,
                                           double offset) {
  if (state_index < 0 || state_index >= n_x)
    throw PreconditionError("phase condition: state index out of range");
  if (offset == 0.0)
    throw PreconditionError("phase condition: kind B needs a nonzero offset");
  PhaseCondition pc;
  pc.q = VecX::Zero(n_x);
  pc.q[state_index] = 1.0;
  pc.b_minus = start;
  pc.b_plus = start + offset;
  pc.Q = orthonormal_complement(pc.q);
  pc.kind = Kind::B;
  pc.validate();
  return pc;
}

void PhaseCondition::validate() const {
  if (std::abs(q.norm() - 1.0) > 1e-10)
    throw PreconditionError("phase condition: q must be a unit vector");
  if ((Q.transpose() * q).lpNorm<Eigen::Infinity>() > 1e-12)
    throw PreconditionError("phase condition: Q must be orthogonal to q");
  const MatX gram = Q.transpose() * Q - MatX::Identity(Q.cols(), Q.cols());
  if (gram.lpNorm<Eigen::Infinity>() > 1e-12)
    throw PreconditionError("phase condition: Q must have orthonormal columns");
  if (kind == Kind::A && b_minus != b_plus)
    throw PreconditionError("phase condition: kind A requires b_minus == b_plus");
}

VecX CycleVariables::pack() const {
  const int n = static_cast<int>(x_minus.size());
  VecX z(2 * n + 1);
  z.head(n) = x_minus;
  z.segment(n, n) = x_plus;
  z[2 * n] = T;
  return z;
}

CycleVariables CycleVariables::unpack(const VecX& z, int n_x) {
  if (z.size() != 2 * n_x + 1)
    throw PreconditionError("cycle variables: packed size mismatch");
  CycleVariables out;
  out.x_minus = z.head(n_x);
  out.x_plus = z.segment(n_x, n_x);
  out.T = z[2 * n_x];
  return out;
}

double numerical_to_physical(double tau, const std::vector<double>& durations) {
  const double n = static_cast<double>(durations.size());
  if (!(tau >= 0.0 && tau <= n))
    throw PreconditionError("numerical_to_physical: tau out of range");
  double t = 0.0;
  int k = static_cast<int>(std::floor(tau));
  if (k == static_cast<int>(n)) k -= 1;  // tau == N
  for (int i = 0; i < k; ++i) t += durations[i];
  return t + (tau - k) * durations[k];
}

VecX cycle_residual(const CycleVariables& z, const ControlGrid& grid,
                    const VecX& anchor, const PhaseCondition& phase,
                    const ControlledOdeModel& model, const MicroScheme& scheme) {
  const int n = phase.n_x();
  if (z.x_minus.size() != n || z.x_plus.size() != n || anchor.size() != n)
    throw PreconditionError("cycle_residual: dimension mismatch");

  VecX r(2 * n + 1);
  r.head(n - 1) = phase.Q.transpose() * (z.x_minus - anchor);
  r[n - 1] = phase.q.dot(z.x_minus) - phase.b_minus;
  r.segment(n, n) = z.x_plus - micro_integrate(model, z.x_minus, grid, z.T, scheme);
  r[2 * n] = phase.q.dot(z.x_plus) - phase.b_plus;
  return r;
}

namespace {

MatX cycle_jacobian(const CycleVariables& z, const ControlGrid& grid,
                    const PhaseCondition& phase, const ControlledOdeModel& model,
                    const MicroScheme& scheme) {
  const int n = phase.n_x();
  const FlowSensitivity fs = flow_with_sensitivity(model, z.x_minus, grid, z.T, scheme);

  MatX J = MatX::Zero(2 * n + 1, 2 * n + 1);
  J.block(0, 0, n - 1, n) = phase.Q.transpose();
  J.block(n - 1, 0, 1, n) = phase.q.transpose();
  J.block(n, 0, n, n) = -fs.d_dx;
  J.block(n, n, n, n) = MatX::Identity(n, n);
  J.block(n, 2 * n, n, 1) = -fs.d_dT;
  J.block(2 * n, n, 1, n) = phase.q.transpose();
  return J;
}

}  // namespace

int interior_same_direction_crossings(const ControlledOdeModel& model,
                                      const CycleVariables& z, const ControlGrid& grid,
                                      const PhaseCondition& phase,
                                      const MicroScheme& scheme) {
  const std::vector<VecX> samples =
      micro_samples(model, z.x_minus, grid, z.T, scheme);
  const VecX u0 = grid.n_ctrl() > 0 ? VecX(grid.U.col(0)) : VecX(VecX::Zero(grid.U.rows()));
  const double g_rate = phase.q.dot(model.rhs(z.x_minus, u0)) * z.T;
  const double dir = g_rate >= 0.0 ? 1.0 : -1.0;

  const double scale = 1.0 + std::abs(phase.b_minus);
  int count = 0;
  double prev = 0.0;
  bool have_prev = false;
  const int last = static_cast<int>(samples.size()) - 1;
  for (int i = 1; i < last; ++i) {
    const double g = phase.q.dot(samples[i]) - phase.b_minus;
    if (std::abs(g) < 1e-9 * scale) continue;  // deadband around the section
    if (have_prev && prev * dir < 0.0 && g * dir > 0.0) ++count;
    prev = g;
    have_prev = true;
  }
  return count;
}

CycleVariables solve_cycle(const ControlledOdeModel& model, const PhaseCondition& phase,
                           const ControlGrid& grid, const VecX& anchor,
                           const CycleVariables& guess, const MicroScheme& scheme,
                           const CycleSolveOptions& opts) {
  if (!(opts.tol > 0.0)) throw PreconditionError("solve_cycle: tol must be positive");
  const int n = phase.n_x();
  const double t_guess = guess.T;

  auto residual = [&](const VecX& zv) {
    return cycle_residual(CycleVariables::unpack(zv, n), grid, anchor, phase, model,
                          scheme);
  };
  auto jac = [&](const VecX& zv) {
    return cycle_jacobian(CycleVariables::unpack(zv, n), grid, phase, model, scheme);
  };

  NewtonOptions nopts;
  nopts.tol = opts.tol;
  nopts.max_iter = opts.max_iter;
  const VecX z_sol = newton_solve(residual, jac, guess.pack(), nopts);
  CycleVariables z = CycleVariables::unpack(z_sol, n);

  if (!(z.T >= opts.t_guard_lo * t_guess && z.T <= opts.t_guard_hi * t_guess))
    throw WrongCycleError("solve_cycle: duration " + std::to_string(z.T) +
                          " outside the guard interval around the guess " +
                          std::to_string(t_guess));
  if (phase.kind == PhaseCondition::Kind::A && opts.scan_interior_crossings) {
    const int extra = interior_same_direction_crossings(model, z, grid, phase, scheme);
    if (extra > 0)
      throw WrongCycleError("solve_cycle: converged to a multi-cycle solution (" +
                            std::to_string(extra) + " interior section crossings)");
  }
  return z;
}

std::vector<CycleVariables> chain_cycle_solves(
    const ControlledOdeModel& model, const PhaseCondition& phase,
    const PolynomialControlSchedule& schedule, const VecX& x0, int n_cycles,
    const MicroScheme& scheme, const CycleVariables& first_guess,
    const CycleSolveOptions& opts) {
  std::vector<CycleVariables> cycles;
  cycles.reserve(n_cycles);
  VecX anchor = x0;
  CycleVariables guess = first_guess;
  for (int k = 0; k < n_cycles; ++k) {
    const ControlGrid grid = schedule_eval(schedule, k);
    const CycleVariables z = solve_cycle(model, phase, grid, anchor, guess, scheme, opts);
    cycles.push_back(z);
    // the anchor equation only sees the Q-projection, so the previous end
    // point anchors the next cycle for both phase-condition kinds
    anchor = z.x_plus;
    guess.T = z.T;
    guess.x_minus = z.x_plus;
    guess.x_minus += (phase.b_minus - phase.q.dot(z.x_plus)) * phase.q;
    guess.x_plus = guess.x_minus + (z.x_plus - z.x_minus);
    guess.x_plus += (phase.b_plus - phase.q.dot(guess.x_plus)) * phase.q;
  }
  return cycles;
}

std::vector<VecX> simulate_fixed(const ControlledOdeModel& model, const VecX& x0,
                                 const VecX& u_const, double t_end, int steps) {
  if (steps < 1 || !(t_end > 0.0))
    throw PreconditionError("simulate_fixed: need positive horizon and steps");
  const double h = t_end / steps;
  std::vector<VecX> out;
  out.reserve(steps + 1);
  out.push_back(x0);
  VecX x = x0;
  for (int i = 0; i < steps; ++i) {
    const VecX k1 = model.rhs(x, u_const);
    const VecX k2 = model.rhs(x + 0.5 * h * k1, u_const);
    const VecX k3 = model.rhs(x + 0.5 * h * k2, u_const);
    const VecX k4 = model.rhs(x + h * k3, u_const);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite())
      throw SimulationError("simulate_fixed: non-finite state", i);
    out.push_back(x);
  }
  return out;
}

namespace {

VecX rk4_single(const ControlledOdeModel& model, const VecX& x, const VecX& u, double h) {
  const VecX k1 = model.rhs(x, u);
  const VecX k2 = model.rhs(x + 0.5 * h * k1, u);
  const VecX k3 = model.rhs(x + 0.5 * h * k2, u);
  const VecX k4 = model.rhs(x + h * k3, u);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

std::vector<SectionCrossing> find_crossings(const ControlledOdeModel& model,
                                            const std::vector<VecX>& states,
                                            double dt, const VecX& u_const,
                                            const VecX& q, double level,
                                            double time_tol) {
  std::vector<SectionCrossing> crossings;
  auto g = [&](const VecX& x) { return q.dot(x) - level; };

  for (size_t i = 1; i < states.size(); ++i) {
    const double g0 = g(states[i - 1]);
    const double g1 = g(states[i]);
    if (g0 == 0.0 || g0 * g1 >= 0.0) continue;

    // bisection inside the step, integrating from the stored left state
    double lo = 0.0, hi = dt;
    VecX x_mid;
    for (int it = 0; it < 200 && (hi - lo) > time_tol; ++it) {
      const double mid = 0.5 * (lo + hi);
      x_mid = rk4_single(model, states[i - 1], u_const, mid);
      if (g0 * g(x_mid) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    const double theta = 0.5 * (lo + hi);
    SectionCrossing c;
    c.t = (static_cast<double>(i - 1)) * dt + theta;
    c.state = rk4_single(model, states[i - 1], u_const, theta);
    c.direction = g1 > g0 ? 1 : -1;
    crossings.push_back(c);
  }
  return crossings;
}

CycleVariables bootstrap_cycle_guess(const ControlledOdeModel& model, const VecX& x0,
                                     const ControlGrid& grid, const PhaseCondition& phase,
                                     double t_max, const BootstrapOptions& opts) {
  if (!(t_max > 0.0)) throw PreconditionError("bootstrap: t_max must be positive");
  VecX u_mean = VecX::Zero(model.control_dim());
  if (grid.n_ctrl() > 0 && grid.U.rows() > 0)
    u_mean = grid.U.rowwise().mean();

  const std::vector<VecX> states = simulate_fixed(model, x0, u_mean, t_max, opts.steps);
  const double dt = t_max / opts.steps;

  if (phase.kind == PhaseCondition::Kind::B) {
    // monotone phase state: the start level may need to be reached first
    const double g0 = phase.q.dot(x0) - phase.b_minus;
    double t_start = 0.0;
    VecX x_start = x0;
    if (std::abs(g0) > 1e-9 * (1.0 + std::abs(phase.b_minus))) {
      const auto start_crossings = find_crossings(model, states, dt, u_mean, phase.q,
                                                  phase.b_minus, opts.time_tol);
      if (start_crossings.empty())
        throw DetectionError("bootstrap: phase state never reaches the start level");
      t_start = start_crossings.front().t;
      x_start = start_crossings.front().state;
    }
    const auto end_crossings = find_crossings(model, states, dt, u_mean, phase.q,
                                              phase.b_plus, opts.time_tol);
    for (const auto& c : end_crossings) {
      if (c.t > t_start) {
        CycleVariables z;
        z.x_minus = x_start;
        z.x_plus = c.state;
        z.T = c.t - t_start;
        return z;
      }
    }
    throw DetectionError("bootstrap: phase state never reaches the end level");
  }

  // kind A: two same-direction crossings of the section
  const auto crossings = find_crossings(model, states, dt, u_mean, phase.q,
                                        phase.b_minus, opts.time_tol);
  const double on_section_tol = 1e-9 * (1.0 + std::abs(phase.b_minus));

  double t_start;
  VecX x_start;
  int dir;
  size_t next = 0;
  if (std::abs(phase.q.dot(x0) - phase.b_minus) <= on_section_tol) {
    t_start = 0.0;
    x_start = x0;
    const double rate = phase.q.dot(model.rhs(x0, u_mean));
    dir = rate >= 0.0 ? 1 : -1;
  } else {
    if (crossings.empty())
      throw DetectionError("bootstrap: no section crossing within the horizon");
    t_start = crossings[0].t;
    x_start = crossings[0].state;
    dir = crossings[0].direction;
    next = 1;
  }

  for (size_t i = next; i < crossings.size(); ++i) {
    if (crossings[i].direction == dir && crossings[i].t > t_start + 1e3 * opts.time_tol) {
      CycleVariables z;
      z.x_minus = x_start;
      z.x_plus = crossings[i].state;
      z.T = crossings[i].t - t_start;
      return z;
    }
  }
  throw DetectionError("bootstrap: no full cycle detected within the horizon");
}

}  // namespace cyclops
