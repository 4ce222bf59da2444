#include "cyclops/micro.hpp"

#include <cmath>

namespace cyclops {

void MicroScheme::validate() const {
  if (variant == Variant::rk4_chain && steps_per_interval < 1)
    throw PreconditionError("micro scheme: need at least one RK4 step per interval");
  if (variant == Variant::gl_step && (stages < 1 || stages > 5))
    throw PreconditionError("micro scheme: implicit stage count must be in 1..5");
}

std::string MicroScheme::describe() const {
  if (variant == Variant::rk4_chain)
    return "rk4 x" + std::to_string(steps_per_interval);
  return "gl" + std::to_string(stages);
}

namespace {

MatX rhs_state_jacobian(const ControlledOdeModel& model, const VecX& x, const VecX& u) {
  const int n = static_cast<int>(x.size());
  const VecD xd = seed_vector(x, 0, n);
  const VecD ud = constant_vector(u);
  return collect_jacobian(model.rhs(xd, ud), n);
}

// One implicit collocation step of width h: solves the stage-derivative
// system K_i = T f(x0 + h sum_j A_ij K_j, u) by damped Newton. Returns the
// stage derivatives; the caller forms the step. Reuses the converged
// Jacobian factorization for sensitivity propagation.
struct GlStep {
  MatX K;             // n x s stage derivatives
  MatX stage_states;  // n x s
  std::unique_ptr<LuFactorization> newton_jac;  // I - T h A (x) J_f blocks
  std::vector<MatX> stage_rhs_jac;              // J_f at each stage state
  std::vector<VecX> stage_rhs;                  // f at each stage state
};

GlStep gl_single_step(const ControlledOdeModel& model, const VecX& x0, const VecX& u,
                      double T, double h, const ButcherTableau& tab, int step_index) {
  const int n = static_cast<int>(x0.size());
  const int s = tab.stages;

  GlStep out;
  out.K.resize(n, s);
  const VecX f0 = model.rhs(x0, u);
  for (int i = 0; i < s; ++i) out.K.col(i) = T * f0;

  auto stage_state = [&](const MatX& K, int i) {
    VecX xs = x0;
    for (int j = 0; j < s; ++j) xs += h * tab.A(i, j) * K.col(j);
    return xs;
  };
  auto residual = [&](const MatX& K, std::vector<VecX>* fs) {
    VecX r(n * s);
    for (int i = 0; i < s; ++i) {
      const VecX f = model.rhs(stage_state(K, i), u);
      if (fs) (*fs)[i] = f;
      r.segment(i * n, n) = K.col(i) - T * f;
    }
    return r;
  };

  std::vector<VecX> fs(s);
  VecX r;
  try {
    r = residual(out.K, &fs);
  } catch (const Error&) {
    // predicted stage states left the model domain; restart from rest
    out.K.setZero();
    r = residual(out.K, &fs);
  }
  double norm = r.lpNorm<Eigen::Infinity>();
  const double tol = 1e-12 * (1.0 + out.K.cwiseAbs().maxCoeff() + T * f0.cwiseAbs().maxCoeff());

  for (int iter = 0; iter < 60 && norm > tol; ++iter) {
    out.stage_rhs_jac.resize(s);
    MatX J = MatX::Identity(n * s, n * s);
    for (int i = 0; i < s; ++i) {
      out.stage_rhs_jac[i] = rhs_state_jacobian(model, stage_state(out.K, i), u);
      for (int j = 0; j < s; ++j)
        J.block(i * n, j * n, n, n) -= T * h * tab.A(i, j) * out.stage_rhs_jac[i];
    }
    out.newton_jac = std::make_unique<LuFactorization>(J);
    const VecX step = out.newton_jac->solve(-r);

    double alpha = 1.0;
    for (int bt = 0; bt < 25; ++bt) {
      MatX K_try = out.K;
      for (int i = 0; i < s; ++i) K_try.col(i) += alpha * step.segment(i * n, n);
      try {
        std::vector<VecX> fs_try(s);
        const VecX r_try = residual(K_try, &fs_try);
        const double norm_try = r_try.lpNorm<Eigen::Infinity>();
        if (std::isfinite(norm_try) && norm_try < norm) {
          out.K = K_try;
          r = r_try;
          norm = norm_try;
          fs = fs_try;
          break;
        }
      } catch (const Error&) {
      }
      alpha *= 0.5;
      if (bt == 24)
        throw SimulationError("implicit micro step failed to converge", step_index);
    }
  }
  if (!(norm <= tol * 1e3))
    throw SimulationError("implicit micro step did not reach tolerance", step_index);

  // refresh Jacobian data at the solution for the sensitivity pass
  out.stage_rhs_jac.resize(s);
  MatX J = MatX::Identity(n * s, n * s);
  for (int i = 0; i < s; ++i) {
    out.stage_rhs_jac[i] = rhs_state_jacobian(model, stage_state(out.K, i), u);
    for (int j = 0; j < s; ++j)
      J.block(i * n, j * n, n, n) -= T * h * tab.A(i, j) * out.stage_rhs_jac[i];
  }
  out.newton_jac = std::make_unique<LuFactorization>(J);
  out.stage_rhs = fs;
  out.stage_states.resize(n, s);
  for (int i = 0; i < s; ++i) out.stage_states.col(i) = stage_state(out.K, i);
  return out;
}

}  // namespace

VecX micro_integrate(const ControlledOdeModel& model, const VecX& x_minus,
                     const ControlGrid& grid, double T, const MicroScheme& scheme) {
  scheme.validate();
  if (!std::isfinite(T)) throw PreconditionError("micro_integrate: T must be finite");

  if (scheme.variant == MicroScheme::Variant::rk4_chain) {
    MatT<double> U = grid.U;
    return rk4_cycle_flow<double>(model, x_minus, U, T, scheme.steps_per_interval);
  }

  const ButcherTableau tab = gl_tableau(scheme.stages);
  const double h = 1.0 / grid.n_ctrl();
  VecX x = x_minus;
  for (int m = 0; m < grid.n_ctrl(); ++m) {
    const GlStep step = gl_single_step(model, x, grid.U.col(m), T, h, tab, m);
    for (int i = 0; i < tab.stages; ++i) x += h * tab.b[i] * step.K.col(i);
    if (!x.allFinite())
      throw SimulationError("micro integration produced a non-finite state", m);
  }
  return x;
}

FlowSensitivity flow_with_sensitivity(const ControlledOdeModel& model,
                                      const VecX& x_minus, const ControlGrid& grid,
                                      double T, const MicroScheme& scheme) {
  scheme.validate();
  const int n = static_cast<int>(x_minus.size());

  if (scheme.variant == MicroScheme::Variant::rk4_chain) {
    // seed (x_minus, T) through the chain
    const int n_seeds = n + 1;
    VecD x = seed_vector(x_minus, 0, n_seeds);
    const Dual Td = Dual::seeded(T, n, n_seeds);
    const MatD U = constant_matrix(grid.U);
    const VecD out = rk4_cycle_flow<Dual>(model, x, U, Td, scheme.steps_per_interval);
    const MatX J = collect_jacobian(out, n_seeds);
    FlowSensitivity fs;
    fs.x_plus = values(out);
    fs.d_dx = J.leftCols(n);
    fs.d_dT = J.col(n);
    return fs;
  }

  const ButcherTableau tab = gl_tableau(scheme.stages);
  const int s = tab.stages;
  const double h = 1.0 / grid.n_ctrl();

  VecX x = x_minus;
  MatX S = MatX::Identity(n, n + 1);  // [dx/dx_minus | dx/dT]
  S.col(n).setZero();

  for (int m = 0; m < grid.n_ctrl(); ++m) {
    const GlStep step = gl_single_step(model, x, grid.U.col(m), T, h, tab, m);

    // implicit differentiation of the stage system against (x_minus, T)
    MatX B(n * s, n + 1);
    for (int i = 0; i < s; ++i) {
      B.middleRows(i * n, n) = T * step.stage_rhs_jac[i] * S;
      B.block(i * n, n, n, 1) += step.stage_rhs[i];
    }
    MatX dK(n * s, n + 1);
    for (int c = 0; c < n + 1; ++c) dK.col(c) = step.newton_jac->solve(B.col(c));

    for (int i = 0; i < s; ++i) {
      x += h * tab.b[i] * step.K.col(i);
      S += h * tab.b[i] * dK.middleRows(i * n, n);
    }
    if (!x.allFinite())
      throw SimulationError("micro integration produced a non-finite state", m);
  }

  FlowSensitivity fs;
  fs.x_plus = x;
  fs.d_dx = S.leftCols(n);
  fs.d_dT = S.col(n);
  return fs;
}

std::vector<VecX> micro_samples(const ControlledOdeModel& model, const VecX& x_minus,
                                const ControlGrid& grid, double T,
                                const MicroScheme& scheme) {
  scheme.validate();
  std::vector<VecX> samples;
  samples.push_back(x_minus);

  if (scheme.variant == MicroScheme::Variant::rk4_chain) {
    const int n_ctrl = grid.n_ctrl();
    const double h = 1.0 / (n_ctrl * scheme.steps_per_interval);
    VecX x = x_minus;
    int step = 0;
    for (int m = 0; m < n_ctrl; ++m) {
      const VecX u = grid.U.col(m);
      for (int j = 0; j < scheme.steps_per_interval; ++j, ++step) {
        const VecX k1 = T * model.rhs(x, u);
        const VecX k2 = T * model.rhs(x + 0.5 * h * k1, u);
        const VecX k3 = T * model.rhs(x + 0.5 * h * k2, u);
        const VecX k4 = T * model.rhs(x + h * k3, u);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite())
          throw SimulationError("micro integration produced a non-finite state", step);
        samples.push_back(x);
      }
    }
    return samples;
  }

  const MicroTrace trace = micro_trace_gl(model, x_minus, grid, T, scheme.stages);
  samples.assign(trace.nodes.begin(), trace.nodes.end());
  return samples;
}

MicroTrace micro_trace_gl(const ControlledOdeModel& model, const VecX& x_minus,
                          const ControlGrid& grid, double T, int stages) {
  const ButcherTableau tab = gl_tableau(stages);
  const double h = 1.0 / grid.n_ctrl();

  MicroTrace trace;
  trace.nodes.push_back(x_minus);
  VecX x = x_minus;
  for (int m = 0; m < grid.n_ctrl(); ++m) {
    const GlStep step = gl_single_step(model, x, grid.U.col(m), T, h, tab, m);
    trace.stage_states.push_back(step.stage_states);
    trace.stage_derivs.push_back(step.K);
    for (int i = 0; i < tab.stages; ++i) x += h * tab.b[i] * step.K.col(i);
    if (!x.allFinite())
      throw SimulationError("micro integration produced a non-finite state", m);
    trace.nodes.push_back(x);
  }
  return trace;
}

}  // namespace cyclops
