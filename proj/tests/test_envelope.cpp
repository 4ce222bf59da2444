#include <Eigen/SVD>

#include <cmath>

#include "cyclops/envelope.hpp"
#include "cyclops/models.hpp"
#include "doctest.h"

using namespace cyclops;

namespace {

MicroScheme rk4(int steps) {
  MicroScheme s;
  s.variant = MicroScheme::Variant::rk4_chain;
  s.steps_per_interval = steps;
  return s;
}

EnvelopeDae lv_dae(const LotkaVolterra& lv, double u_const, int micro_steps) {
  EnvelopeDae dae;
  dae.model = &lv;
  dae.phase = PhaseCondition::section((VecX(2) << 1, 0).finished(), 1.0);
  dae.micro = rk4(micro_steps);
  dae.n_ctrl = 3;
  dae.schedule =
      PolynomialControlSchedule::constant(MatX::Constant(1, 3, u_const), 10.0);
  return dae;
}

CycleVariables lv_init_guess(const LotkaVolterra& lv, const EnvelopeDae& dae,
                             const VecX& x0) {
  return bootstrap_cycle_guess(lv, x0, dae.grid_at(0.0), dae.phase, 40.0);
}

// two-state test model with an exactly exponential envelope: the amplitude
// decays at rate c while the angle state advances one turn per unit time
class ExpSpiral final : public ControlledOdeModel {
public:
  explicit ExpSpiral(double c) : c_(c) {}
  int state_dim() const override { return 2; }
  int control_dim() const override { return 0; }
  const std::string& name() const override { return name_; }
  const std::vector<std::string>& state_labels() const override { return labels_; }
  VecX rhs(const VecX& x, const VecX&) const override {
    VecX f(2);
    f[0] = -c_ * x[0];
    f[1] = 2.0 * M_PI;
    return f;
  }
  VecD rhs(const VecD& x, const VecD&) const override {
    VecD f(2);
    f[0] = -c_ * x[0];
    f[1] = Dual(2.0 * M_PI);
    return f;
  }

private:
  double c_;
  std::string name_ = "exp_spiral";
  std::vector<std::string> labels_ = {"a", "theta"};
};

}  // namespace

TEST_CASE("envelope slope of a closed cycle vanishes") {
  LotkaVolterra lv;
  const EnvelopeDae dae = lv_dae(lv, 0.0, 100);
  VecX x0(2);
  x0 << 1.0, 1.5;
  const CycleVariables z = consistent_init(x0, dae, lv_init_guess(lv, dae, x0));
  CHECK(envelope_rhs(z).lpNorm<Eigen::Infinity>() <= 1e-7);
}

TEST_CASE("slope equals the per-cycle increment of a controlled cycle") {
  LotkaVolterra lv;
  const EnvelopeDae dae = lv_dae(lv, 0.004, 30);
  VecX x0(2);
  x0 << 1.0, 1.5;
  const ControlGrid grid = dae.grid_at(0.0);
  const CycleVariables guess = lv_init_guess(lv, dae, x0);
  const CycleVariables z = solve_cycle(lv, dae.phase, grid, x0, guess, dae.micro);
  const VecX fe = envelope_rhs(z);
  CHECK((fe - (z.x_plus - z.x_minus)).lpNorm<Eigen::Infinity>() == 0.0);
  // chaining one more cycle reproduces the same increment to leading order
  const CycleVariables z2 =
      solve_cycle(lv, dae.phase, grid, z.x_plus, z, dae.micro);
  CHECK((envelope_rhs(z2) - fe).lpNorm<Eigen::Infinity>() <= 0.2 * fe.lpNorm<Eigen::Infinity>() + 1e-9);
}

TEST_CASE("algebraic residual: consistency and null-space projection") {
  LotkaVolterra lv;
  const EnvelopeDae dae = lv_dae(lv, 0.004, 30);
  VecX x0(2);
  x0 << 1.0, 1.5;
  const ControlGrid grid = dae.grid_at(0.0);
  const CycleVariables z = consistent_init(x0, dae, lv_init_guess(lv, dae, x0));

  const VecX mid = 0.5 * (z.x_plus + z.x_minus);
  VecX r = envelope_algebraic(mid, z, grid, dae);
  // at the midpoint state every block is satisfied except possibly the
  // section rows, which the consistent solve already pinned
  CHECK(r.lpNorm<Eigen::Infinity>() <= 1e-9);

  // shifting x along q leaves the projected connecting block unchanged
  const VecX r_shift = envelope_algebraic(mid + 0.37 * dae.phase.q, z, grid, dae);
  CHECK(std::abs(r_shift[0] - r[0]) <= 1e-14);

  // square system in z: the Jacobian has full rank at the consistent point
  const int n = 2;
  MatX J(2 * n + 1, 2 * n + 1);
  const double h = 1e-7;
  for (int j = 0; j < 2 * n + 1; ++j) {
    VecX zp = z.pack(), zm = z.pack();
    zp[j] += h;
    zm[j] -= h;
    J.col(j) = (envelope_algebraic(x0, CycleVariables::unpack(zp, n), grid, dae) -
                envelope_algebraic(x0, CycleVariables::unpack(zm, n), grid, dae)) /
               (2 * h);
  }
  const auto svd = Eigen::JacobiSVD<MatX>(J);
  CHECK(svd.singularValues()(2 * n) > 1e-6);  // smallest singular value
}

TEST_CASE("consistent initialization pins the section level") {
  LotkaVolterra lv;
  const EnvelopeDae dae = lv_dae(lv, 0.0, 30);
  VecX x0(2);
  x0 << 1.0, 2.0;
  const CycleVariables z = consistent_init(x0, dae, lv_init_guess(lv, dae, x0));
  CHECK(std::abs(dae.phase.q.dot(z.x_minus) - 1.0) <= 1e-10);
  CHECK(std::abs(dae.phase.q.dot(z.x_plus) - 1.0) <= 1e-10);
  // the differential state sits midway between the endpoints in the
  // complement direction
  const VecX mid = 0.5 * (z.x_plus + z.x_minus);
  CHECK(std::abs((dae.phase.Q.transpose() * (mid - x0))(0, 0)) <= 1e-10);
}

TEST_CASE("consistent initialization fails far from any cycle") {
  LotkaVolterra lv;
  const EnvelopeDae dae = lv_dae(lv, 0.0, 30);
  VecX x0(2);
  x0 << 1.0, 2.0;
  CycleVariables silly;
  silly.x_minus = (VecX(2) << 40.0, 30.0).finished();
  silly.x_plus = silly.x_minus;
  silly.T = 1e-4;
  CHECK_THROWS_AS(consistent_init(x0, dae, silly), Error);
}

TEST_CASE("macro step is exact on closed orbits") {
  LotkaVolterra lv;
  // 600 micro steps per cycle keep the one-cycle nonclosure near 5e-10
  const EnvelopeDae dae = lv_dae(lv, 0.0, 200);
  VecX x0(2);
  x0 << 1.0, 1.5;
  const CycleVariables z0 = consistent_init(x0, dae, lv_init_guess(lv, dae, x0));
  const ButcherTableau tab = gl_tableau(3);
  const auto step =
      macro_step(dae, x0, 0.0, 20.0, tab, {z0, z0, z0}, 1e-11);
  CHECK((step.x_next - x0).lpNorm<Eigen::Infinity>() <= 1e-7);
}

TEST_CASE("macro step order six on the exact exponential envelope") {
  // amplitude decay tuned so the envelope obeys dx/dtau = -x exactly:
  // the slope is a(e^{-c} - 1) at the cycle start, and the midpoint
  // connection turns that into -2 tanh(c/2) per unit amplitude
  const double c = 2.0 * std::atanh(0.5);
  ExpSpiral model(c);
  EnvelopeDae dae;
  dae.model = &model;
  dae.phase = PhaseCondition::phase_state(1, 2, 0.0, 2.0 * M_PI);
  dae.micro = rk4(40);
  dae.n_ctrl = 1;
  dae.schedule = PolynomialControlSchedule::constant(MatX::Zero(0, 1), 0.5);

  VecX x0(2);
  x0 << 1.0, 0.0;
  CycleVariables guess;
  guess.x_minus = x0;
  guess.x_plus = (VecX(2) << std::exp(-c), 2.0 * M_PI).finished();
  guess.T = 1.0;

  const ButcherTableau tab = gl_tableau(3);

  const CycleVariables z0 = consistent_init(x0, dae, guess);
  const auto one = macro_step(dae, x0, 0.0, 1.0, tab, {z0, z0, z0}, 1e-13);

  // one collocation step of the linear flow is its diagonal Pade map:
  // (1 + z/2 + z^2/10 + z^3/120)/(1 - z/2 + z^2/10 - z^3/120) at z = -1
  const double pade = (1.0 - 0.5 + 0.1 - 1.0 / 120.0) / (1.0 + 0.5 + 0.1 + 1.0 / 120.0);
  CHECK(std::abs(one.x_next[0] - pade) <= 1e-8);
  const double err_h1 = std::abs(one.x_next[0] - std::exp(-1.0));
  CHECK(err_h1 == doctest::Approx(std::abs(pade - std::exp(-1.0))).epsilon(1e-4));
  CHECK(err_h1 <= 5e-6);

  // halving the step shows the sixth-order decay
  const auto half1 = macro_step(dae, x0, 0.0, 0.5, tab, {z0, z0, z0}, 1e-13);
  CycleVariables zh = half1.stage_cycles.back();
  const auto half2 = macro_step(dae, half1.x_next, 0.5, 0.5, tab, {zh, zh, zh}, 1e-13);
  const double err_h05 = std::abs(half2.x_next[0] - std::exp(-1.0));
  CHECK(err_h1 / err_h05 >= 30.0);
}

TEST_CASE("uncontrolled envelope stays put over twenty cycles") {
  LotkaVolterra lv;
  const EnvelopeDae dae = lv_dae(lv, 0.0, 100);
  VecX x0(2);
  x0 << 1.0, 1.5;
  const auto traj = integrate_envelope(dae, x0, MacroGrid::uniform(20.0, 1, 3),
                                       lv_init_guess(lv, dae, x0));
  CHECK((traj.endpoint() - x0).lpNorm<Eigen::Infinity>() <= 1e-6);
  for (const auto& p : traj.points) {
    const ControlGrid grid = dae.grid_at(p.tau);
    CHECK(envelope_algebraic(p.x, p.z, grid, dae).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
}

TEST_CASE("envelope endpoint tracks twenty chained cycle solves") {
  LotkaVolterra lv;
  const EnvelopeDae dae = lv_dae(lv, 0.005, 10);
  VecX x0(2);
  x0 << 1.0, 1.5;
  const CycleVariables first = lv_init_guess(lv, dae, x0);

  const auto chain = chain_cycle_solves(lv, dae.phase, dae.schedule, x0, 20,
                                        dae.micro, first);
  const VecX target = chain.back().x_plus;

  const auto traj = integrate_envelope(dae, x0, MacroGrid::uniform(20.0, 1, 3), first);
  const VecX got = traj.endpoint();
  for (int i = 0; i < 2; ++i)
    CHECK(std::abs(got[i] - target[i]) <= 1e-3 * std::max(1.0, std::abs(target[i])));
}

TEST_CASE("higher macro order wins at equal step count") {
  LotkaVolterra lv;
  const EnvelopeDae dae = lv_dae(lv, 0.005, 10);
  VecX x0(2);
  x0 << 1.0, 1.5;
  const CycleVariables first = lv_init_guess(lv, dae, x0);
  const auto chain = chain_cycle_solves(lv, dae.phase, dae.schedule, x0, 20,
                                        dae.micro, first);
  const VecX target = chain.back().x_plus;

  const auto t1 = integrate_envelope(dae, x0, MacroGrid::uniform(20.0, 2, 1), first);
  const auto t3 = integrate_envelope(dae, x0, MacroGrid::uniform(20.0, 2, 3), first);
  const double e1 = (t1.endpoint() - target).lpNorm<Eigen::Infinity>();
  const double e3 = (t3.endpoint() - target).lpNorm<Eigen::Infinity>();
  CHECK(e3 < e1);
}

TEST_CASE("physical time accumulates the stage durations") {
  LotkaVolterra lv;
  const EnvelopeDae dae = lv_dae(lv, 0.0, 100);
  VecX x0(2);
  x0 << 1.0, 1.5;
  const CycleVariables first = lv_init_guess(lv, dae, x0);
  const auto traj = integrate_envelope(dae, x0, MacroGrid::uniform(10.0, 2, 3), first);

  // all cycles are identical here, so t(tau) = tau * T up to solver tolerance
  const double T = traj.points.front().z.T;
  for (const auto& p : traj.points)
    CHECK(std::abs(p.t - p.tau * T) <= 1e-6 * std::max(1.0, p.tau * T));
}

TEST_CASE("micro and macro refinement move the endpoint independently") {
  LotkaVolterra lv;
  VecX x0(2);
  x0 << 1.0, 1.5;

  auto endpoint = [&](int micro_steps, int macro_steps) {
    const EnvelopeDae dae = lv_dae(lv, 0.005, micro_steps);
    const CycleVariables first = lv_init_guess(lv, dae, x0);
    return integrate_envelope(dae, x0, MacroGrid::uniform(20.0, macro_steps, 3), first)
        .endpoint();
  };

  const VecX base = endpoint(5, 1);
  const double micro_effect = (endpoint(10, 1) - base).lpNorm<Eigen::Infinity>();
  const double macro_effect = (endpoint(5, 2) - base).lpNorm<Eigen::Infinity>();
  const double micro_refined =
      (endpoint(20, 1) - endpoint(10, 1)).lpNorm<Eigen::Infinity>();
  const double macro_refined =
      (endpoint(5, 4) - endpoint(5, 2)).lpNorm<Eigen::Infinity>();

  CHECK(micro_effect > 0.0);
  CHECK(macro_effect > 0.0);
  CHECK(micro_refined < micro_effect);   // fourth-order micro tail
  CHECK(macro_refined < macro_effect);   // sixth-order macro tail
}
