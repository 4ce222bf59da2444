#include "cyclops/envelope.hpp"

#include <cmath>

#include "cyclops/newton.hpp"

namespace cyclops {

VecX envelope_rhs(const CycleVariables& z) { return z.x_plus - z.x_minus; }

VecX envelope_algebraic(const VecX& x, const CycleVariables& z,
                        const ControlGrid& grid, const EnvelopeDae& dae) {
  const int n = dae.n_x();
  if (x.size() != n || z.x_minus.size() != n || z.x_plus.size() != n)
    throw PreconditionError("envelope_algebraic: dimension mismatch");
  const PhaseCondition& ph = dae.phase;

  VecX r(2 * n + 1);
  r.head(n - 1) = ph.Q.transpose() * (0.5 * (z.x_plus + z.x_minus) - x);
  r[n - 1] = ph.q.dot(z.x_minus) - ph.b_minus;
  r.segment(n, n) =
      z.x_plus - micro_integrate(*dae.model, z.x_minus, grid, z.T, dae.micro);
  r[2 * n] = ph.q.dot(z.x_plus) - ph.b_plus;
  return r;
}

namespace {

// d(algebraic residual)/dz with the flow sensitivities filled in.
MatX envelope_algebraic_jacobian(const CycleVariables& z, const ControlGrid& grid,
                                 const EnvelopeDae& dae) {
  const int n = dae.n_x();
  const PhaseCondition& ph = dae.phase;
  const FlowSensitivity fs =
      flow_with_sensitivity(*dae.model, z.x_minus, grid, z.T, dae.micro);

  MatX J = MatX::Zero(2 * n + 1, 2 * n + 1);
  J.block(0, 0, n - 1, n) = 0.5 * ph.Q.transpose();
  J.block(0, n, n - 1, n) = 0.5 * ph.Q.transpose();
  J.block(n - 1, 0, 1, n) = ph.q.transpose();
  J.block(n, 0, n, n) = -fs.d_dx;
  J.block(n, n, n, n) = MatX::Identity(n, n);
  J.block(n, 2 * n, n, 1) = -fs.d_dT;
  J.block(2 * n, n, 1, n) = ph.q.transpose();
  return J;
}

}  // namespace

CycleVariables consistent_init(const VecX& x0, const EnvelopeDae& dae,
                               const CycleVariables& guess, double tau,
                               const CycleSolveOptions& opts) {
  const int n = dae.n_x();
  const ControlGrid grid = dae.grid_at(tau);
  const double t_guess = guess.T;

  auto residual = [&](const VecX& zv) {
    return envelope_algebraic(x0, CycleVariables::unpack(zv, n), grid, dae);
  };
  auto jac = [&](const VecX& zv) {
    return envelope_algebraic_jacobian(CycleVariables::unpack(zv, n), grid, dae);
  };

  NewtonOptions nopts;
  nopts.tol = opts.tol;
  nopts.max_iter = opts.max_iter;
  const VecX z_sol = newton_solve(residual, jac, guess.pack(), nopts);
  CycleVariables z = CycleVariables::unpack(z_sol, n);

  if (!(z.T >= opts.t_guard_lo * t_guess && z.T <= opts.t_guard_hi * t_guess))
    throw WrongCycleError("consistent_init: duration outside the guard interval");
  if (dae.phase.kind == PhaseCondition::Kind::A && opts.scan_interior_crossings) {
    if (interior_same_direction_crossings(*dae.model, z, grid, dae.phase, dae.micro) > 0)
      throw WrongCycleError("consistent_init: converged to a multi-cycle solution");
  }
  return z;
}

MacroGrid MacroGrid::uniform(double tau_total, int steps, int stages) {
  if (steps < 1 || !(tau_total > 0.0))
    throw PreconditionError("macro grid: need positive horizon and steps");
  MacroGrid g;
  g.h.assign(steps, tau_total / steps);
  g.stages = stages;
  return g;
}

MacroStageResult macro_step(const EnvelopeDae& dae, const VecX& x_j, double tau_j,
                            double h, const ButcherTableau& tab,
                            const std::vector<CycleVariables>& z_guesses,
                            double tol) {
  const int n = dae.n_x();
  const int s = tab.stages;
  const int zd = 2 * n + 1;
  const int block = n + zd;  // per-stage unknowns: X_i then z_i
  if (static_cast<int>(z_guesses.size()) != s)
    throw PreconditionError("macro_step: need one cycle guess per stage");

  std::vector<ControlGrid> grids(s);
  for (int i = 0; i < s; ++i) grids[i] = dae.grid_at(tau_j + tab.c[i] * h);

  auto unpack_stage = [&](const VecX& w, int i) {
    return CycleVariables::unpack(w.segment(i * block + n, zd), n);
  };

  auto residual = [&](const VecX& w) {
    VecX r(s * block);
    std::vector<VecX> fe(s);
    for (int i = 0; i < s; ++i) fe[i] = envelope_rhs(unpack_stage(w, i));
    for (int i = 0; i < s; ++i) {
      VecX xi = w.segment(i * block, n) - x_j;
      for (int l = 0; l < s; ++l) xi -= h * tab.A(i, l) * fe[l];
      r.segment(i * block, n) = xi;
      r.segment(i * block + n, zd) = envelope_algebraic(
          w.segment(i * block, n), unpack_stage(w, i), grids[i], dae);
    }
    return r;
  };

  auto jac = [&](const VecX& w) {
    MatX J = MatX::Zero(s * block, s * block);
    for (int i = 0; i < s; ++i) {
      J.block(i * block, i * block, n, n) = MatX::Identity(n, n);
      for (int l = 0; l < s; ++l) {
        // d f_e / d z_l = [-I | +I | 0]
        J.block(i * block, l * block + n, n, n) += h * tab.A(i, l) * MatX::Identity(n, n);
        J.block(i * block, l * block + n + n, n, n) -= h * tab.A(i, l) * MatX::Identity(n, n);
      }
      const MatX Gz = envelope_algebraic_jacobian(unpack_stage(w, i), grids[i], dae);
      J.block(i * block + n, i * block + n, zd, zd) = Gz;
      // connecting rows depend on the stage state
      J.block(i * block + n, i * block, n - 1, n) = -dae.phase.Q.transpose();
    }
    return J;
  };

  VecX w0(s * block);
  for (int i = 0; i < s; ++i) {
    w0.segment(i * block, n) = x_j + tab.c[i] * h * envelope_rhs(z_guesses[i]);
    w0.segment(i * block + n, zd) = z_guesses[i].pack();
  }

  NewtonOptions nopts;
  nopts.tol = tol;
  nopts.max_iter = 60;
  VecX w;
  try {
    w = newton_solve(residual, jac, w0, nopts);
  } catch (const NonConvergenceError& e) {
    throw SimulationError(std::string("macro step failed: ") + e.what(), -1);
  }

  MacroStageResult out;
  out.stage_states.resize(s);
  out.stage_cycles.resize(s);
  VecX x_next = x_j;
  for (int i = 0; i < s; ++i) {
    out.stage_states[i] = w.segment(i * block, n);
    out.stage_cycles[i] = unpack_stage(w, i);
    x_next += h * tab.b[i] * envelope_rhs(out.stage_cycles[i]);
  }
  out.x_next = x_next;
  return out;
}

const EnvelopePoint& EnvelopeTrajectory::node(int j) const {
  int seen = 0;
  for (const auto& p : points) {
    if (p.is_node) {
      if (seen == j) return p;
      ++seen;
    }
  }
  throw PreconditionError("envelope trajectory: node index out of range");
}

int EnvelopeTrajectory::node_count() const {
  int c = 0;
  for (const auto& p : points)
    if (p.is_node) ++c;
  return c;
}

VecX EnvelopeTrajectory::endpoint() const {
  for (auto it = points.rbegin(); it != points.rend(); ++it)
    if (it->is_node) return it->x;
  throw PreconditionError("envelope trajectory: empty");
}

EnvelopeTrajectory integrate_envelope(const EnvelopeDae& dae, const VecX& x0,
                                      const MacroGrid& grid,
                                      const CycleVariables& init_guess,
                                      double tol) {
  const ButcherTableau tab = gl_tableau(grid.stages);
  const int s = tab.stages;

  EnvelopeTrajectory traj;
  CycleVariables z0 = consistent_init(x0, dae, init_guess, 0.0);
  traj.points.push_back({0.0, 0.0, true, x0, z0});

  VecX x = x0;
  double tau = 0.0;
  double t_phys = 0.0;
  CycleVariables warm = z0;

  for (size_t j = 0; j < grid.h.size(); ++j) {
    const double h = grid.h[j];
    std::vector<CycleVariables> guesses(s, warm);
    MacroStageResult step;
    try {
      step = macro_step(dae, x, tau, h, tab, guesses, tol);
    } catch (const SimulationError& e) {
      throw SimulationError("macro step " + std::to_string(j) + ": " + e.what(),
                            static_cast<int>(j));
    }

    // physical time through the stage durations, same quadrature as the state
    for (int i = 0; i < s; ++i) {
      double t_stage = t_phys;
      for (int l = 0; l < s; ++l) t_stage += h * tab.A(i, l) * step.stage_cycles[l].T;
      traj.points.push_back({tau + tab.c[i] * h, t_stage, false, step.stage_states[i],
                             step.stage_cycles[i]});
    }
    double t_next = t_phys;
    for (int i = 0; i < s; ++i) t_next += h * tab.b[i] * step.stage_cycles[i].T;

    x = step.x_next;
    tau += h;
    t_phys = t_next;
    warm = step.stage_cycles.back();

    CycleVariables z_node = consistent_init(x, dae, warm, tau);
    traj.points.push_back({tau, t_phys, true, x, z_node});
  }
  return traj;
}

}  // namespace cyclops
