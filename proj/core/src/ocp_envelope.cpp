#include "cyclops/ocp.hpp"
#include "cyclops/satellite.hpp"

namespace cyclops {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct StageIndex {
  int interval = 0;
  int stage = 0;
  double tau = 0.0;
  int X = 0;   // stage state offset
  int z = 0;   // packed (x_minus, x_plus, T) offset
  int micro_nodes = -1;
  int micro_X = -1;
  int micro_K = -1;
  int ctrl_block = 0;
};

struct ControlBlock {
  int offset = 0;
  int d_u = 0;
  std::vector<double> times;
};

}  // namespace

void OcpSpec::validate() const {
  if (!model) throw PreconditionError("ocp: model missing");
  if (cycles_per_interval < 1 || n_intervals < 1)
    throw PreconditionError("ocp: need at least one cycle and one interval");
  if (d_u < 1) throw PreconditionError("ocp: d_u must be >= 1");
  if (objective.alpha < 0) throw PreconditionError("ocp: alpha must be >= 0");
  if (x0.size() != model->state_dim())
    throw PreconditionError("ocp: initial state dimension mismatch");
  const int n_u = model->control_dim();
  if (u_lo.size() != n_u || u_hi.size() != n_u)
    throw PreconditionError("ocp: control bound dimension mismatch");
  for (int r = 0; r < n_u; ++r)
    if (!(u_lo[r] <= u_hi[r])) throw PreconditionError("ocp: control bounds inconsistent");
  micro.validate();
}

namespace {

// ---------------------------------------------------------------------------
// shared helpers

std::vector<double> control_times(const OcpSpec& spec, double start, double span) {
  if (!spec.construction_times.empty()) {
    if (static_cast<int>(spec.construction_times.size()) != spec.d_u)
      throw PreconditionError("ocp: construction time count must equal d_u");
    return spec.construction_times;
  }
  auto t = PolynomialControlSchedule::default_times(spec.d_u, span);
  for (auto& v : t) v += start;
  return t;
}

// initial cycle guess shared by both transcriptions
CycleVariables initial_cycle(const OcpSpec& spec, double* T_out) {
  const MatX u_col = spec.init_control.size() > 0
                         ? MatX(spec.init_control)
                         : MatX(VecX::Zero(spec.model->control_dim()));
  ControlGrid grid{u_col.replicate(1, spec.n_ctrl)};

  CycleVariables guess;
  if (spec.T_guess > 0.0) {
    guess.x_minus = spec.x0 + (spec.phase.b_minus - spec.phase.q.dot(spec.x0)) * spec.phase.q;
    guess.x_plus = guess.x_minus +
                   (spec.phase.b_plus - spec.phase.b_minus) * spec.phase.q;
    guess.T = spec.T_guess;
  } else {
    guess = bootstrap_cycle_guess(*spec.model, spec.x0, grid, spec.phase,
                                  1e4 * (spec.T_guess > 0 ? spec.T_guess : 1.0));
  }
  *T_out = guess.T;

  EnvelopeDae dae{spec.model, spec.phase, spec.micro, spec.n_ctrl,
                  PolynomialControlSchedule::constant(grid.U, 0.5)};
  CycleSolveOptions copts;
  copts.tol = 1e-10;
  try {
    const CycleVariables z = consistent_init(spec.x0, dae, guess, 0.0, copts);
    *T_out = z.T;
    return z;
  } catch (const Error&) {
    return guess;  // a rough guess is still a usable start
  }
}

VecX phase_aligned(const PhaseCondition& ph, const VecX& x, double level) {
  return x + (level - ph.q.dot(x)) * ph.q;
}

}  // namespace

TranscribedOcp transcribe_envelope_ocp(const OcpSpec& spec) {
  spec.validate();
  const int n = spec.model->state_dim();
  const int n_u = spec.model->control_dim();
  const int n_ctrl = spec.n_ctrl;
  const int J = spec.n_intervals;
  const int S = spec.macro_stages;
  const int zd = 2 * n + 1;
  const bool lifted = spec.micro.variant == MicroScheme::Variant::gl_step;
  const int s_m = spec.micro.stages;
  const double h_mic = 1.0 / n_ctrl;
  const ButcherTableau macro_tab = gl_tableau(S);
  const ButcherTableau micro_tab = lifted ? gl_tableau(s_m) : ButcherTableau{};

  TranscribedOcp t;
  t.form = OcpForm::envelope;
  t.model = spec.model;
  t.phase = spec.phase;
  t.micro = spec.micro;
  t.n_ctrl = n_ctrl;
  t.objective = spec.objective;
  t.n_intervals = J;
  t.cycles_per_interval = spec.cycles_per_interval;
  t.macro_stages = S;
  t.macro_tab = macro_tab;
  t.controls_per_interval = spec.controls_per_interval;
  t.d_u = spec.d_u;
  t.x0 = spec.x0;

  // ------------------------------------------------------------------ layout
  VariableLayout layout;
  std::vector<int> node_off(J + 1);
  for (int j = 0; j <= J; ++j)
    node_off[j] = layout.add("node[" + std::to_string(j) + "]", n);

  std::vector<StageIndex> stages;
  for (int j = 0; j < J; ++j) {
    const double tau0 = j * double(spec.cycles_per_interval);
    t.interval_start.push_back(tau0);
    t.interval_h.push_back(double(spec.cycles_per_interval));
    for (int i = 0; i < S; ++i) {
      StageIndex si;
      si.interval = j;
      si.stage = i;
      si.tau = tau0 + macro_tab.c[i] * spec.cycles_per_interval;
      const std::string tag = "stage[" + std::to_string(j) + "/" + std::to_string(i) + "]";
      si.X = layout.add(tag + "/X", n);
      si.z = layout.add(tag + "/z", zd);
      if (lifted) {
        si.micro_nodes = layout.add(tag + "/micro_nodes", (n_ctrl + 1) * n);
        si.micro_X = layout.add(tag + "/micro_X", n_ctrl * s_m * n);
        si.micro_K = layout.add(tag + "/micro_K", n_ctrl * s_m * n);
      }
      si.ctrl_block = spec.controls_per_interval ? j : 0;
      stages.push_back(si);
    }
  }

  std::vector<ControlBlock> ctrl_blocks;
  const int n_blocks = spec.controls_per_interval ? J : 1;
  for (int b = 0; b < n_blocks; ++b) {
    ControlBlock cb;
    cb.d_u = spec.d_u;
    cb.times = spec.controls_per_interval
                   ? control_times(spec, b * double(spec.cycles_per_interval),
                                   double(spec.cycles_per_interval))
                   : control_times(spec, 0.0, double(spec.n_total()));
    cb.offset = layout.add(spec.controls_per_interval
                               ? "controls[" + std::to_string(b) + "]"
                               : "controls",
                           spec.d_u * n_u * n_ctrl);
    ctrl_blocks.push_back(cb);
    t.schedule_times.push_back(cb.times);
  }
  const int N = layout.total;

  // control entry index within the decision vector
  auto ctrl_idx = [&](int block, int i_du, int r, int m) {
    return ctrl_blocks[block].offset + i_du * (n_u * n_ctrl) + m * n_u + r;
  };
  auto basis_at = [&](int block, double tau) {
    std::vector<double> w(ctrl_blocks[block].d_u);
    for (int i = 0; i < ctrl_blocks[block].d_u; ++i)
      w[i] = lagrange_basis(ctrl_blocks[block].times, i, tau);
    return w;
  };
  // evaluated control column m at time tau (doubles)
  auto eval_column = [&, n_u](const VecX& w, int block, double tau, int m) {
    const auto wts = basis_at(block, tau);
    VecX u = VecX::Zero(n_u);
    for (size_t i = 0; i < wts.size(); ++i)
      for (int r = 0; r < n_u; ++r)
        u[r] += wts[i] * w[ctrl_idx(block, static_cast<int>(i), r, m)];
    return u;
  };

  // ------------------------------------------------------------- constraints
  ConstraintSet eq(N);
  std::vector<double> eq_scale_keys;  // row scale denominators, filled below
  const PhaseCondition ph = spec.phase;
  const MatX Qt = ph.Q.transpose();

  auto push_rows = [&](int dim, double key) {
    for (int r = 0; r < dim; ++r) eq_scale_keys.push_back(key);
    (void)dim;
  };

  // state component scales, resolved after guesses are built; keys reference
  // component ids: we store (kind, comp) encoded lazily via lambdas instead.
  // To keep this simple the scale pass below recomputes keys directly.

  // initial condition
  {
    RowGroup g;
    g.dim = n;
    const int off0 = node_off[0];
    const VecX x0 = spec.x0;
    g.value = [off0, n, x0](const VecX& w, VecX& r) {
      r.segment(0, n) = w.segment(off0, n) - x0;
    };
    for (int c = 0; c < n; ++c) g.const_entries.emplace_back(c, off0 + c, 1.0);
    const int at = eq.add(std::move(g));
    (void)at;
  }

  for (int sidx = 0; sidx < static_cast<int>(stages.size()); ++sidx) {
    const StageIndex si = stages[sidx];
    const int j = si.interval;
    const double h = t.interval_h[j];

    // implicit RK stage equation: X = node_j + h sum_l A_il f_e(z_l)
    {
      RowGroup g;
      g.dim = n;
      const int row0 = eq.rows();
      const int Xo = si.X;
      const int node = node_off[j];
      std::vector<std::pair<int, double>> zrefs;  // (z offset, h*A_il)
      for (int l = 0; l < S; ++l)
        zrefs.emplace_back(stages[j * S + l].z, h * macro_tab.A(si.stage, l));
      g.value = [row0, Xo, node, n, zrefs](const VecX& w, VecX& r) {
        VecX v = w.segment(Xo, n) - w.segment(node, n);
        for (const auto& [zo, coef] : zrefs)
          v -= coef * (w.segment(zo + n, n) - w.segment(zo, n));
        r.segment(row0, n) = v;
      };
      for (int c = 0; c < n; ++c) {
        g.const_entries.emplace_back(row0 + c, Xo + c, 1.0);
        g.const_entries.emplace_back(row0 + c, node + c, -1.0);
        for (const auto& [zo, coef] : zrefs) {
          g.const_entries.emplace_back(row0 + c, zo + n + c, -coef);
          g.const_entries.emplace_back(row0 + c, zo + c, coef);
        }
      }
      eq.add(std::move(g));
    }

    // connecting condition: Q'((x_plus + x_minus)/2 - X) = 0
    {
      RowGroup g;
      g.dim = n - 1;
      const int row0 = eq.rows();
      const int Xo = si.X, zo = si.z;
      const MatX Qt_cap = Qt;
      g.value = [row0, Xo, zo, n, Qt_cap](const VecX& w, VecX& r) {
        r.segment(row0, n - 1) =
            Qt_cap * (0.5 * (w.segment(zo + n, n) + w.segment(zo, n)) - w.segment(Xo, n));
      };
      for (int rr = 0; rr < n - 1; ++rr)
        for (int c = 0; c < n; ++c) {
          if (Qt(rr, c) == 0.0) continue;
          g.const_entries.emplace_back(row0 + rr, zo + c, 0.5 * Qt(rr, c));
          g.const_entries.emplace_back(row0 + rr, zo + n + c, 0.5 * Qt(rr, c));
          g.const_entries.emplace_back(row0 + rr, Xo + c, -Qt(rr, c));
        }
      eq.add(std::move(g));
    }

    // start section
    {
      RowGroup g;
      g.dim = 1;
      const int row0 = eq.rows();
      const int zo = si.z;
      const VecX q = ph.q;
      const double b = ph.b_minus;
      g.value = [row0, zo, n, q, b](const VecX& w, VecX& r) {
        r[row0] = q.dot(w.segment(zo, n)) - b;
      };
      for (int c = 0; c < n; ++c)
        if (q[c] != 0.0) g.const_entries.emplace_back(row0, zo + c, q[c]);
      eq.add(std::move(g));
    }

    if (!lifted) {
      // flow defect through the explicit chain: x_plus - F(x_minus, U, T)
      RowGroup g;
      g.dim = n;
      const int row0 = eq.rows();
      const int zo = si.z;
      const int block = si.ctrl_block;
      const double tau = si.tau;
      const auto wts = basis_at(block, tau);
      const int d_u = spec.d_u;
      const auto model = spec.model;
      const int steps = spec.micro.steps_per_interval;
      const int blk_off = ctrl_blocks[block].offset;
      const int n_seeds = n + 1 + d_u * n_u * n_ctrl;

      auto build_grid_d = [=](const VecX& w, int seed_base) {
        MatD U(n_u, n_ctrl);
        for (int m = 0; m < n_ctrl; ++m)
          for (int r = 0; r < n_u; ++r) {
            Dual acc(0.0);
            for (int i = 0; i < d_u; ++i) {
              const int idx = blk_off + i * (n_u * n_ctrl) + m * n_u + r;
              Dual entry = seed_base >= 0
                               ? Dual::seeded(w[idx], seed_base + idx - blk_off, n_seeds)
                               : Dual(w[idx]);
              acc += wts[i] * entry;
            }
            U(r, m) = acc;
          }
        return U;
      };

      g.value = [row0, zo, n, model, steps, build_grid_d](const VecX& w, VecX& r) {
        MatX U(values(VecD(build_grid_d(w, -1).reshaped())).reshaped(
            build_grid_d(w, -1).rows(), build_grid_d(w, -1).cols()));
        const VecX xm = w.segment(zo, n);
        const VecX xp = w.segment(zo + n, n);
        const double T = w[zo + 2 * n];
        MatT<double> Ud = U;
        r.segment(row0, n) =
            xp - rk4_cycle_flow<double>(*model, xm, Ud, T, steps);
      };
      g.jacobian = [row0, zo, n, model, steps, build_grid_d, n_seeds, blk_off,
                    d_u, n_u, n_ctrl](const VecX& w, std::vector<Triplet>& out) {
        const VecD xm = seed_vector(VecX(w.segment(zo, n)), 0, n_seeds);
        const Dual T = Dual::seeded(w[zo + 2 * n], n, n_seeds);
        const MatD U = build_grid_d(w, n + 1);
        const VecD F = rk4_cycle_flow<Dual>(*model, xm, U, T, steps);
        const MatX JF = collect_jacobian(F, n_seeds);
        for (int c = 0; c < n; ++c) {
          out.emplace_back(row0 + c, zo + n + c, 1.0);  // x_plus
          for (int d = 0; d < n; ++d)
            if (JF(c, d) != 0.0) out.emplace_back(row0 + c, zo + d, -JF(c, d));
          if (JF(c, n) != 0.0) out.emplace_back(row0 + c, zo + 2 * n, -JF(c, n));
          for (int k = 0; k < d_u * n_u * n_ctrl; ++k)
            if (JF(c, n + 1 + k) != 0.0)
              out.emplace_back(row0 + c, blk_off + k, -JF(c, n + 1 + k));
        }
      };
      eq.add(std::move(g));
    } else {
      // lifted implicit micro blocks
      const int zo = si.z;
      const int nodes0 = si.micro_nodes;
      const int Xs0 = si.micro_X;
      const int K0 = si.micro_K;
      const int block = si.ctrl_block;
      const double tau = si.tau;
      const auto wts = basis_at(block, tau);
      const int d_u = spec.d_u;
      const int blk_off = ctrl_blocks[block].offset;
      const auto model = spec.model;

      // micro start identification: x_0 = x_minus
      {
        RowGroup g;
        g.dim = n;
        const int row0 = eq.rows();
        g.value = [row0, nodes0, zo, n](const VecX& w, VecX& r) {
          r.segment(row0, n) = w.segment(nodes0, n) - w.segment(zo, n);
        };
        for (int c = 0; c < n; ++c) {
          g.const_entries.emplace_back(row0 + c, nodes0 + c, 1.0);
          g.const_entries.emplace_back(row0 + c, zo + c, -1.0);
        }
        eq.add(std::move(g));
      }

      for (int m = 0; m < n_ctrl; ++m) {
        const int node_m = nodes0 + m * n;
        const int node_m1 = nodes0 + (m + 1) * n;
        const int Xs_m = Xs0 + m * s_m * n;
        const int K_m = K0 + m * s_m * n;

        // stage-state definitions: Xs_i = x_m + h_mic sum_j A_ij K_j
        {
          RowGroup g;
          g.dim = s_m * n;
          const int row0 = eq.rows();
          const MatX A = micro_tab.A;
          g.value = [row0, node_m, Xs_m, K_m, n, s_m, h_mic, A](const VecX& w, VecX& r) {
            for (int i = 0; i < s_m; ++i) {
              VecX v = w.segment(Xs_m + i * n, n) - w.segment(node_m, n);
              for (int jj = 0; jj < s_m; ++jj)
                v -= h_mic * A(i, jj) * w.segment(K_m + jj * n, n);
              r.segment(row0 + i * n, n) = v;
            }
          };
          for (int i = 0; i < s_m; ++i)
            for (int c = 0; c < n; ++c) {
              g.const_entries.emplace_back(row0 + i * n + c, Xs_m + i * n + c, 1.0);
              g.const_entries.emplace_back(row0 + i * n + c, node_m + c, -1.0);
              for (int jj = 0; jj < s_m; ++jj)
                g.const_entries.emplace_back(row0 + i * n + c, K_m + jj * n + c,
                                             -h_mic * A(i, jj));
            }
          eq.add(std::move(g));
        }

        // stage-derivative definitions: K_i = T f(Xs_i, u_m)
        {
          RowGroup g;
          g.dim = s_m * n;
          const int row0 = eq.rows();
          const int n_seeds = 1 + n + d_u * n_u;

          auto column_d = [=](const VecX& w, bool seeded) {
            VecD u(n_u);
            for (int r = 0; r < n_u; ++r) {
              Dual acc(0.0);
              for (int i = 0; i < d_u; ++i) {
                const int idx = blk_off + i * (n_u * n_ctrl) + m * n_u + r;
                Dual e = seeded ? Dual::seeded(w[idx], 1 + n + i * n_u + r, n_seeds)
                                : Dual(w[idx]);
                acc += wts[i] * e;
              }
              u[r] = acc;
            }
            return u;
          };

          g.value = [row0, zo, Xs_m, K_m, n, s_m, model, column_d](const VecX& w,
                                                                   VecX& r) {
            const VecX u = values(column_d(w, false));
            const double T = w[zo + 2 * n];
            for (int i = 0; i < s_m; ++i) {
              const VecX f = model->rhs(VecX(w.segment(Xs_m + i * n, n)), u);
              r.segment(row0 + i * n, n) = w.segment(K_m + i * n, n) - T * f;
            }
          };
          g.jacobian = [row0, zo, Xs_m, K_m, n, s_m, model, column_d, n_seeds,
                        blk_off, d_u, n_u, n_ctrl, m, wts](const VecX& w,
                                                           std::vector<Triplet>& out) {
            const VecD u = column_d(w, true);
            const Dual T = Dual::seeded(w[zo + 2 * n], 0, n_seeds);
            for (int i = 0; i < s_m; ++i) {
              const VecD xs = seed_vector(VecX(w.segment(Xs_m + i * n, n)), 1, n_seeds);
              VecD f = model->rhs(xs, u);
              for (int c = 0; c < n; ++c) f[c] = T * f[c];
              const MatX Jf = collect_jacobian(f, n_seeds);
              for (int c = 0; c < n; ++c) {
                out.emplace_back(row0 + i * n + c, K_m + i * n + c, 1.0);
                if (Jf(c, 0) != 0.0)
                  out.emplace_back(row0 + i * n + c, zo + 2 * n, -Jf(c, 0));
                for (int d = 0; d < n; ++d)
                  if (Jf(c, 1 + d) != 0.0)
                    out.emplace_back(row0 + i * n + c, Xs_m + i * n + d, -Jf(c, 1 + d));
                for (int i_du = 0; i_du < d_u; ++i_du)
                  for (int r = 0; r < n_u; ++r) {
                    const double v = Jf(c, 1 + n + i_du * n_u + r);
                    if (v != 0.0)
                      out.emplace_back(row0 + i * n + c,
                                       blk_off + i_du * (n_u * n_ctrl) + m * n_u + r,
                                       -v);
                  }
              }
            }
          };
          eq.add(std::move(g));
        }

        // interval endpoint: x_{m+1} = x_m + h_mic sum_i b_i K_i
        {
          RowGroup g;
          g.dim = n;
          const int row0 = eq.rows();
          const VecX b = micro_tab.b;
          g.value = [row0, node_m, node_m1, K_m, n, s_m, h_mic, b](const VecX& w,
                                                                   VecX& r) {
            VecX v = w.segment(node_m1, n) - w.segment(node_m, n);
            for (int i = 0; i < s_m; ++i) v -= h_mic * b[i] * w.segment(K_m + i * n, n);
            r.segment(row0, n) = v;
          };
          for (int c = 0; c < n; ++c) {
            g.const_entries.emplace_back(row0 + c, node_m1 + c, 1.0);
            g.const_entries.emplace_back(row0 + c, node_m + c, -1.0);
            for (int i = 0; i < s_m; ++i)
              g.const_entries.emplace_back(row0 + c, K_m + i * n + c, -h_mic * b[i]);
          }
          eq.add(std::move(g));
        }
      }

      // cycle end identification: x_plus = x_{N_ctrl}
      {
        RowGroup g;
        g.dim = n;
        const int row0 = eq.rows();
        const int last = nodes0 + n_ctrl * n;
        g.value = [row0, zo, last, n](const VecX& w, VecX& r) {
          r.segment(row0, n) = w.segment(zo + n, n) - w.segment(last, n);
        };
        for (int c = 0; c < n; ++c) {
          g.const_entries.emplace_back(row0 + c, zo + n + c, 1.0);
          g.const_entries.emplace_back(row0 + c, last + c, -1.0);
        }
        eq.add(std::move(g));
      }
    }

    // end section
    {
      RowGroup g;
      g.dim = 1;
      const int row0 = eq.rows();
      const int zo = si.z;
      const VecX q = ph.q;
      const double b = ph.b_plus;
      g.value = [row0, zo, n, q, b](const VecX& w, VecX& r) {
        r[row0] = q.dot(w.segment(zo + n, n)) - b;
      };
      for (int c = 0; c < n; ++c)
        if (q[c] != 0.0) g.const_entries.emplace_back(row0, zo + n + c, q[c]);
      eq.add(std::move(g));
    }
  }

  // node updates
  for (int j = 0; j < J; ++j) {
    RowGroup g;
    g.dim = n;
    const int row0 = eq.rows();
    const int a = node_off[j], bnode = node_off[j + 1];
    const double h = t.interval_h[j];
    std::vector<std::pair<int, double>> zrefs;
    for (int l = 0; l < S; ++l)
      zrefs.emplace_back(stages[j * S + l].z, h * macro_tab.b[l]);
    g.value = [row0, a, bnode, n, zrefs](const VecX& w, VecX& r) {
      VecX v = w.segment(bnode, n) - w.segment(a, n);
      for (const auto& [zo, coef] : zrefs)
        v -= coef * (w.segment(zo + n, n) - w.segment(zo, n));
      r.segment(row0, n) = v;
    };
    for (int c = 0; c < n; ++c) {
      g.const_entries.emplace_back(row0 + c, bnode + c, 1.0);
      g.const_entries.emplace_back(row0 + c, a + c, -1.0);
      for (const auto& [zo, coef] : zrefs) {
        g.const_entries.emplace_back(row0 + c, zo + n + c, -coef);
        g.const_entries.emplace_back(row0 + c, zo + c, coef);
      }
    }
    eq.add(std::move(g));
  }

  // ------------------------------------------------------------ inequalities
  ConstraintSet in(N);

  // control box at stage evaluations (variable bounds cover d_u == 1)
  if (spec.d_u >= 2) {
    for (const auto& si : stages) {
      const auto wts = basis_at(si.ctrl_block, si.tau);
      for (int m = 0; m < n_ctrl; ++m)
        for (int r = 0; r < n_u; ++r) {
          for (int side = 0; side < 2; ++side) {
            const double bound = side == 0 ? spec.u_lo[r] : spec.u_hi[r];
            if (!std::isfinite(bound)) continue;
            RowGroup g;
            g.dim = 1;
            const int row0 = in.rows();
            const double sign = side == 0 ? 1.0 : -1.0;
            const int block = si.ctrl_block;
            const double tau = si.tau;
            auto eval_col = eval_column;
            g.value = [row0, block, tau, m, r, bound, sign, eval_col](const VecX& w,
                                                                      VecX& rr) {
              rr[row0] = sign * (eval_col(w, block, tau, m)[r] - bound);
            };
            for (size_t i = 0; i < wts.size(); ++i)
              g.const_entries.emplace_back(
                  row0, ctrl_idx(si.ctrl_block, static_cast<int>(i), r, m),
                  sign * wts[i]);
            in.add(std::move(g));
          }
        }
    }
  }

  // control norm ball per column
  if (spec.u_norm_unit_ball) {
    if (spec.d_u == 1) {
      for (int b = 0; b < n_blocks; ++b)
        for (int m = 0; m < n_ctrl; ++m) {
          RowGroup g;
          g.dim = 1;
          const int row0 = in.rows();
          const int base = ctrl_idx(b, 0, 0, m);
          g.value = [row0, base, n_u](const VecX& w, VecX& r) {
            r[row0] = 1.0 - w.segment(base, n_u).squaredNorm();
          };
          g.jacobian = [row0, base, n_u](const VecX& w, std::vector<Triplet>& out) {
            for (int r = 0; r < n_u; ++r)
              out.emplace_back(row0, base + r, -2.0 * w[base + r]);
          };
          in.add(std::move(g));
        }
    } else {
      for (const auto& si : stages)
        for (int m = 0; m < n_ctrl; ++m) {
          RowGroup g;
          g.dim = 1;
          const int row0 = in.rows();
          const int block = si.ctrl_block;
          const double tau = si.tau;
          const auto wts = basis_at(block, tau);
          auto eval_col = eval_column;
          g.value = [row0, block, tau, m, eval_col](const VecX& w, VecX& r) {
            r[row0] = 1.0 - eval_col(w, block, tau, m).squaredNorm();
          };
          g.jacobian = [row0, block, tau, m, wts, eval_col, this_ctrl_idx = ctrl_idx,
                        n_u](const VecX& w, std::vector<Triplet>& out) {
            const VecX u = eval_col(w, block, tau, m);
            for (size_t i = 0; i < wts.size(); ++i)
              for (int r = 0; r < n_u; ++r)
                out.emplace_back(row0,
                                 this_ctrl_idx(block, static_cast<int>(i), r, m),
                                 -2.0 * u[r] * wts[i]);
          };
          in.add(std::move(g));
        }
    }
  }

  // terminal windows on the final node
  std::vector<double> in_scale_tail;
  if (spec.terminal.enabled) {
    const int end = node_off[J];
    const TerminalWindows tw = spec.terminal;
    const double m_max = tw.mass_max > 0.0 ? tw.mass_max : spec.x0[spec.objective.mass_index];
    const int mi = spec.objective.mass_index;

    auto add_window = [&](std::function<double(const VecX&)> quantity,
                          std::function<void(const VecX&, int, std::vector<Triplet>&, double)> grad,
                          double target, double tol) {
      for (int side = 0; side < 2; ++side) {
        RowGroup g;
        g.dim = 1;
        const int row0 = in.rows();
        const double sign = side == 0 ? 1.0 : -1.0;
        // side 0: tol - (v - target) >= 0 ; side 1: (v - target) + tol >= 0
        g.value = [row0, quantity, target, tol, sign](const VecX& w, VecX& r) {
          r[row0] = tol - sign * (quantity(w) - target);
        };
        g.jacobian = [row0, grad, sign](const VecX& w, std::vector<Triplet>& out) {
          grad(w, row0, out, -sign);
        };
        in.add(std::move(g));
        in_scale_tail.push_back(1.0 / tol);
      }
    };

    auto a_of = [end](const VecX& w) {
      const double p = w[end + 0], f = w[end + 1], gq = w[end + 2];
      return p / (1.0 - f * f - gq * gq);
    };
    add_window(a_of,
               [end](const VecX& w, int row, std::vector<Triplet>& out, double s) {
                 const double p = w[end + 0], f = w[end + 1], gq = w[end + 2];
                 const double d = 1.0 - f * f - gq * gq;
                 out.emplace_back(row, end + 0, s / d);
                 out.emplace_back(row, end + 1, s * 2.0 * p * f / (d * d));
                 out.emplace_back(row, end + 2, s * 2.0 * p * gq / (d * d));
               },
               tw.a_target, tw.a_tol);

    auto e_of = [end](const VecX& w) {
      return std::sqrt(w[end + 1] * w[end + 1] + w[end + 2] * w[end + 2] + 1e-16);
    };
    add_window(e_of,
               [end, e_of](const VecX& w, int row, std::vector<Triplet>& out, double s) {
                 const double e = e_of(w);
                 out.emplace_back(row, end + 1, s * w[end + 1] / e);
                 out.emplace_back(row, end + 2, s * w[end + 2] / e);
               },
               tw.e_target, tw.e_tol);

    auto i_of = [end](const VecX& w) {
      return 2.0 * std::atan(std::sqrt(w[end + 3] * w[end + 3] + w[end + 4] * w[end + 4]));
    };
    add_window(i_of,
               [end](const VecX& w, int row, std::vector<Triplet>& out, double s) {
                 const double h = w[end + 3], k = w[end + 4];
                 const double rt = std::sqrt(h * h + k * k + 1e-16);
                 const double d = 2.0 / ((1.0 + rt * rt) * rt);
                 out.emplace_back(row, end + 3, s * d * h);
                 out.emplace_back(row, end + 4, s * d * k);
               },
               tw.inc_target, tw.inc_tol);

    // mass budget window: m_min <= m_end <= m_max
    {
      RowGroup g;
      g.dim = 1;
      const int row0 = in.rows();
      const double lo = tw.mass_min;
      g.value = [row0, end, mi, lo](const VecX& w, VecX& r) { r[row0] = w[end + mi] - lo; };
      g.const_entries.emplace_back(row0, end + mi, 1.0);
      in.add(std::move(g));
      in_scale_tail.push_back(1.0 / std::max(1.0, m_max));
    }
    {
      RowGroup g;
      g.dim = 1;
      const int row0 = in.rows();
      g.value = [row0, end, mi, m_max](const VecX& w, VecX& r) { r[row0] = m_max - w[end + mi]; };
      g.const_entries.emplace_back(row0, end + mi, -1.0);
      in.add(std::move(g));
      in_scale_tail.push_back(1.0 / std::max(1.0, m_max));
    }
  }

  // --------------------------------------------------------------- objective
  ObjectiveAccumulator obj(N);
  if (spec.objective.terminal == OcpObjective::Terminal::tracking) {
    const int end = node_off[J];
    const VecX target = spec.objective.target;
    obj.add_term(
        [end, n, target](const VecX& w) {
          return (w.segment(end, n) - target).squaredNorm();
        },
        [end, n, target](const VecX& w, VecX& g) {
          g.segment(end, n) += 2.0 * (w.segment(end, n) - target);
        });
    for (int c = 0; c < n; ++c) obj.add_hessian(end + c, end + c, 2.0);
  } else if (spec.objective.terminal == OcpObjective::Terminal::fuel) {
    const int end = node_off[J];
    const int mi = spec.objective.mass_index;
    const double wgt = spec.objective.fuel_weight;
    const double m0 = spec.x0[mi];
    obj.add_term([end, mi, wgt, m0](const VecX& w) { return wgt * (m0 - w[end + mi]); },
                 [end, mi, wgt](const VecX&, VecX& g) { g[end + mi] -= wgt; });
  }

  if (spec.objective.alpha > 0.0) {
    const double alpha = spec.objective.alpha;
    const MatX G = third_derivative_gram(macro_tab);
    for (int j = 0; j < J; ++j) {
      const double scale = alpha / std::pow(t.interval_h[j], 3);
      std::vector<int> zoff(S);
      for (int l = 0; l < S; ++l) zoff[l] = stages[j * S + l].z;
      obj.add_term(
          [zoff, n, S, G, scale](const VecX& w) {
            double acc = 0.0;
            for (int i = 0; i < S; ++i)
              for (int l = 0; l < S; ++l) {
                if (G(i, l) == 0.0) continue;
                const VecX ki = w.segment(zoff[i] + n, n) - w.segment(zoff[i], n);
                const VecX kl = w.segment(zoff[l] + n, n) - w.segment(zoff[l], n);
                acc += G(i, l) * ki.dot(kl);
              }
            return scale * acc;
          },
          [zoff, n, S, G, scale](const VecX& w, VecX& g) {
            for (int i = 0; i < S; ++i) {
              VecX acc = VecX::Zero(n);
              for (int l = 0; l < S; ++l) {
                if (G(i, l) == 0.0) continue;
                acc += G(i, l) * (w.segment(zoff[l] + n, n) - w.segment(zoff[l], n));
              }
              g.segment(zoff[i] + n, n) += 2.0 * scale * acc;
              g.segment(zoff[i], n) -= 2.0 * scale * acc;
            }
          });
      for (int i = 0; i < S; ++i)
        for (int l = 0; l < S; ++l) {
          if (G(i, l) == 0.0) continue;
          const double v = 2.0 * scale * G(i, l);
          for (int c = 0; c < n; ++c) {
            obj.add_hessian(zoff[i] + n + c, zoff[l] + n + c, v);
            obj.add_hessian(zoff[i] + n + c, zoff[l] + c, -v);
            obj.add_hessian(zoff[i] + c, zoff[l] + n + c, -v);
            obj.add_hessian(zoff[i] + c, zoff[l] + c, v);
          }
        }
    }
  }

  // ------------------------------------------------- guesses, bounds, scales
  VecX w0 = VecX::Zero(N), lb = VecX::Constant(N, -kInf), ub = VecX::Constant(N, kInf);

  double T_init = 0.0;
  const CycleVariables z0 = initial_cycle(spec, &T_init);
  const SatelliteMee* sat = dynamic_cast<const SatelliteMee*>(spec.model);

  auto interp_state = [&](double tau) {
    VecX x = spec.x0;
    if (spec.init == OcpSpec::Init::interpolate_target) {
      const double a = tau / spec.n_total();
      x = (1.0 - a) * spec.x0 + a * spec.init_target_state;
    } else {
      x += (ph.b_plus - ph.b_minus) * tau * ph.q;
    }
    return x;
  };
  auto period_at = [&](const VecX& x) {
    if (sat) return sat->kepler_period(x.head(6));
    return T_init;
  };

  for (int j = 0; j <= J; ++j) {
    const double tau = j == 0 ? 0.0 : t.interval_start[j - 1] + t.interval_h[j - 1];
    w0.segment(node_off[j], n) = interp_state(tau);
    for (int c = 0; c < n; ++c) {
      if (spec.state_lb.size() == n) lb[node_off[j] + c] = spec.state_lb[c];
      if (spec.state_ub.size() == n) ub[node_off[j] + c] = spec.state_ub[c];
    }
  }

  const MatX u_init_col = spec.init_control.size() > 0
                              ? MatX(spec.init_control)
                              : MatX(VecX::Zero(n_u));
  const ControlGrid init_grid{u_init_col.replicate(1, n_ctrl)};

  for (const auto& si : stages) {
    const VecX xs = interp_state(si.tau);
    w0.segment(si.X, n) = xs;

    VecX xm = phase_aligned(ph, xs, ph.b_minus);
    const double Ts = period_at(xs);
    CycleVariables zg;
    if (spec.init == OcpSpec::Init::interpolate_target) {
      zg.x_minus = xm;
      zg.T = Ts;
      if (lifted) {
        const MicroTrace trace = micro_trace_gl(*spec.model, xm, init_grid, Ts, s_m);
        zg.x_plus = trace.nodes.back();
        for (int m = 0; m <= n_ctrl; ++m)
          w0.segment(si.micro_nodes + m * n, n) = trace.nodes[m];
        for (int m = 0; m < n_ctrl; ++m)
          for (int st = 0; st < s_m; ++st) {
            w0.segment(si.micro_X + (m * s_m + st) * n, n) = trace.stage_states[m].col(st);
            w0.segment(si.micro_K + (m * s_m + st) * n, n) = trace.stage_derivs[m].col(st);
          }
      } else {
        zg.x_plus = micro_integrate(*spec.model, xm, init_grid, Ts, spec.micro);
      }
    } else {
      zg = z0;
      zg.x_minus = phase_aligned(ph, z0.x_minus, ph.b_minus);
      zg.x_plus = z0.x_plus;
      if (lifted) {
        const MicroTrace trace =
            micro_trace_gl(*spec.model, zg.x_minus, init_grid, zg.T, s_m);
        for (int m = 0; m <= n_ctrl; ++m)
          w0.segment(si.micro_nodes + m * n, n) = trace.nodes[m];
        for (int m = 0; m < n_ctrl; ++m)
          for (int st = 0; st < s_m; ++st) {
            w0.segment(si.micro_X + (m * s_m + st) * n, n) = trace.stage_states[m].col(st);
            w0.segment(si.micro_K + (m * s_m + st) * n, n) = trace.stage_derivs[m].col(st);
          }
      }
    }
    w0.segment(si.z, n) = zg.x_minus;
    w0.segment(si.z + n, n) = zg.x_plus;
    w0[si.z + 2 * n] = zg.T;

    // bounds on state-valued stage variables and the duration guard
    for (int c = 0; c < n; ++c) {
      if (spec.state_lb.size() == n) {
        lb[si.X + c] = spec.state_lb[c];
        lb[si.z + c] = spec.state_lb[c];
        lb[si.z + n + c] = spec.state_lb[c];
      }
      if (spec.state_ub.size() == n) {
        ub[si.X + c] = spec.state_ub[c];
        ub[si.z + c] = spec.state_ub[c];
        ub[si.z + n + c] = spec.state_ub[c];
      }
    }
    if (lifted && spec.state_lb.size() == n) {
      for (int m = 0; m <= n_ctrl; ++m)
        for (int c = 0; c < n; ++c) {
          lb[si.micro_nodes + m * n + c] = spec.state_lb[c];
          ub[si.micro_nodes + m * n + c] = spec.state_ub[c];
        }
      for (int m = 0; m < n_ctrl; ++m)
        for (int st = 0; st < s_m; ++st)
          for (int c = 0; c < n; ++c) {
            lb[si.micro_X + (m * s_m + st) * n + c] = spec.state_lb[c];
            ub[si.micro_X + (m * s_m + st) * n + c] = spec.state_ub[c];
          }
    }
    lb[si.z + 2 * n] = spec.t_guard_lo * w0[si.z + 2 * n];
    ub[si.z + 2 * n] = spec.t_guard_hi * w0[si.z + 2 * n];
  }

  for (int b = 0; b < n_blocks; ++b) {
    for (int i = 0; i < spec.d_u; ++i)
      for (int m = 0; m < n_ctrl; ++m)
        for (int r = 0; r < n_u; ++r) {
          const int idx = ctrl_idx(b, i, r, m);
          w0[idx] = u_init_col(r, 0);
          if (spec.d_u == 1) {
            lb[idx] = spec.u_lo[r];
            ub[idx] = spec.u_hi[r];
          }
        }
  }

  // ---------------------------------------------------------------- assemble
  NlpProblem p;
  p.name = "envelope_ocp[" + spec.model->name() + "]";
  p.n = N;
  p.m_eq = eq.rows();
  p.m_in = in.rows();
  p.w0 = w0;
  p.lb = lb;
  p.ub = ub;
  p.layout = layout;
  p.objective = obj.value_fn();
  p.objective_gradient = obj.gradient_fn();
  p.objective_hessian = obj.hessian();
  p.eq = eq.value_fn();
  p.eq_jacobian = eq.jacobian_fn();
  if (p.m_in > 0) {
    p.ineq = in.value_fn();
    p.ineq_jacobian = in.jacobian_fn();
  }
  p.var_scale = VecX::Ones(N);

  if (spec.scale_variables) {
    // per-variable scale from the guess with per-kind floors
    VecX vscale(N);
    VecX comp_floor(n);
    for (int c = 0; c < n; ++c) {
      double mx = 0.0;
      for (int j = 0; j <= J; ++j) mx = std::max(mx, std::abs(w0[node_off[j] + c]));
      comp_floor[c] = std::max(1e-3, 1e-3 * mx);
    }
    for (int v = 0; v < N; ++v) vscale[v] = std::max(1.0, std::abs(w0[v]));
    for (int j = 0; j <= J; ++j)
      for (int c = 0; c < n; ++c)
        vscale[node_off[j] + c] = std::max(std::abs(w0[node_off[j] + c]), comp_floor[c]);
    for (const auto& si : stages) {
      for (int c = 0; c < n; ++c) {
        vscale[si.X + c] = std::max(std::abs(w0[si.X + c]), comp_floor[c]);
        vscale[si.z + c] = std::max(std::abs(w0[si.z + c]), comp_floor[c]);
        vscale[si.z + n + c] = std::max(std::abs(w0[si.z + n + c]), comp_floor[c]);
      }
      vscale[si.z + 2 * n] = std::max(1.0, std::abs(w0[si.z + 2 * n]));
      if (lifted) {
        for (int m = 0; m <= n_ctrl; ++m)
          for (int c = 0; c < n; ++c)
            vscale[si.micro_nodes + m * n + c] =
                std::max(std::abs(w0[si.micro_nodes + m * n + c]), comp_floor[c]);
        for (int m = 0; m < n_ctrl; ++m)
          for (int st = 0; st < s_m; ++st)
            for (int c = 0; c < n; ++c) {
              vscale[si.micro_X + (m * s_m + st) * n + c] =
                  std::max(std::abs(w0[si.micro_X + (m * s_m + st) * n + c]), comp_floor[c]);
              vscale[si.micro_K + (m * s_m + st) * n + c] =
                  std::max(std::abs(w0[si.micro_K + (m * s_m + st) * n + c]),
                           0.1 * comp_floor[c]);
            }
      }
    }
    for (int b = 0; b < n_blocks; ++b)
      for (int k = 0; k < spec.d_u * n_u * n_ctrl; ++k)
        vscale[ctrl_blocks[b].offset + k] = 1.0;

    // equality rows are scaled by the scale of their defining variable; the
    // Jacobian pattern makes that variable the row's unit-coefficient entry
    VecX escale = VecX::Ones(p.m_eq);
    {
      const SpMat A0 = p.eq_jacobian(w0);
      // defining variable: the entry with coefficient exactly +1 and the
      // largest variable scale
      std::vector<double> best(p.m_eq, 0.0);
      for (int k = 0; k < A0.outerSize(); ++k)
        for (SpMat::InnerIterator it(A0, k); it; ++it)
          if (std::abs(it.value() - 1.0) < 1e-12)
            best[it.row()] = std::max(best[it.row()], vscale[it.col()]);
      for (int rr = 0; rr < p.m_eq; ++rr)
        if (best[rr] > 0.0) escale[rr] = 1.0 / best[rr];
    }
    VecX iscale = VecX::Ones(p.m_in);
    {
      int tail = p.m_in - static_cast<int>(in_scale_tail.size());
      for (size_t k = 0; k < in_scale_tail.size(); ++k)
        iscale[tail + static_cast<int>(k)] = in_scale_tail[k];
    }
    p = scale_problem(std::move(p), vscale, escale, iscale);
  }

  t.nlp = std::move(p);
  return t;
}

}  // namespace cyclops
