#include <Eigen/QR>

#include <cmath>
#include <random>

#include "cyclops/cycle.hpp"
#include "cyclops/models.hpp"
#include "cyclops/satellite.hpp"
#include "doctest.h"

using namespace cyclops;

namespace {

ControlGrid constant_grid(double u, int n_ctrl) {
  return ControlGrid{MatX::Constant(1, n_ctrl, u)};
}

MicroScheme rk4(int steps) {
  MicroScheme s;
  s.variant = MicroScheme::Variant::rk4_chain;
  s.steps_per_interval = steps;
  return s;
}

MicroScheme gl(int stages) {
  MicroScheme s;
  s.variant = MicroScheme::Variant::gl_step;
  s.stages = stages;
  return s;
}

VecX park_orbit_state(double L0) {
  ClassicalElements park{6878.14, 0.0, 87.4 * M_PI / 180.0, 0.0, 0.0, 0.0};
  VecX x(8);
  x.head(6) = mee_from_classical(park);
  x[5] = L0;
  x[6] = 160.0;
  x[7] = 0.0;
  return x;
}

}  // namespace

TEST_CASE("numerical to physical time") {
  std::vector<double> durations{2.0, 3.0};
  CHECK(numerical_to_physical(0.0, durations) == 0.0);
  CHECK(numerical_to_physical(1.5, durations) == doctest::Approx(3.5));
  CHECK(numerical_to_physical(2.0, durations) == doctest::Approx(5.0));
  CHECK_THROWS_AS(numerical_to_physical(2.1, durations), PreconditionError);
  CHECK_THROWS_AS(numerical_to_physical(-0.1, durations), PreconditionError);
}

TEST_CASE("zero duration freezes the flow") {
  LotkaVolterra lv;
  VecX x(2);
  x << 1.3, 0.8;
  for (const auto& scheme : {rk4(7), gl(3)}) {
    const VecX xp = micro_integrate(lv, x, constant_grid(0.01, 3), 0.0, scheme);
    CHECK((xp - x).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("harmonic rotation returns after one period") {
  HarmonicOscillator ho;
  VecX x(2);
  x << 1.0, 0.0;
  ControlGrid grid{MatX::Zero(0, 3)};

  const VecX coarse = micro_integrate(ho, x, grid, 2.0 * M_PI, rk4(10));  // 30 steps
  CHECK((coarse - x).lpNorm<Eigen::Infinity>() <= 1e-4);

  // the phase error of the rotation is 2 pi h^4 / 120, about 1.0e-8 here
  const VecX fine = micro_integrate(ho, x, grid, 2.0 * M_PI, rk4(100));  // 300 steps
  CHECK((fine - x).lpNorm<Eigen::Infinity>() <= 1.1e-8);
  const VecX finer = micro_integrate(ho, x, grid, 2.0 * M_PI, rk4(110));
  CHECK((finer - x).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("rk4 micro order from step doubling") {
  LotkaVolterra lv;
  VecX x(2);
  x << 1.0, 1.5;
  const double T = 9.0;
  const ControlGrid grid = constant_grid(0.0, 3);

  const VecX ref = micro_integrate(lv, x, grid, T, rk4(320));
  std::vector<double> errs;
  for (int steps : {10, 20, 40, 80})
    errs.push_back(
        (micro_integrate(lv, x, grid, T, rk4(steps)) - ref).lpNorm<Eigen::Infinity>());
  for (size_t i = 0; i + 1 < errs.size(); ++i) {
    const double order = std::log2(errs[i] / errs[i + 1]);
    CHECK(order >= 3.8);
  }
}

TEST_CASE("implicit micro matches a fine explicit chain") {
  LotkaVolterra lv;
  VecX x(2);
  x << 1.0, 1.5;
  const double T = 9.0;

  // constant control, so the reference split does not matter
  const VecX ref = micro_integrate(lv, x, constant_grid(0.004, 1), T, rk4(2000));

  const double e10 =
      (micro_integrate(lv, x, constant_grid(0.004, 10), T, gl(3)) - ref)
          .lpNorm<Eigen::Infinity>();
  const double e20 =
      (micro_integrate(lv, x, constant_grid(0.004, 20), T, gl(3)) - ref)
          .lpNorm<Eigen::Infinity>();
  const double e40 =
      (micro_integrate(lv, x, constant_grid(0.004, 40), T, gl(3)) - ref)
          .lpNorm<Eigen::Infinity>();
  CHECK(e20 <= 1e-5);
  CHECK(e40 <= 1e-7);
  CHECK(e10 / e20 >= 32.0);  // order-6 halving gives ~64
}

TEST_CASE("flow sensitivities match finite differences") {
  LotkaVolterra lv;
  VecX x(2);
  x << 1.1, 1.4;
  const double T = 8.0;
  const ControlGrid grid = constant_grid(0.003, 3);

  for (const auto& scheme : {rk4(12), gl(3)}) {
    const FlowSensitivity fs = flow_with_sensitivity(lv, x, grid, T, scheme);
    CHECK((fs.x_plus - micro_integrate(lv, x, grid, T, scheme)).lpNorm<Eigen::Infinity>() <=
          1e-12);

    const double h = 1e-6;
    for (int j = 0; j < 2; ++j) {
      VecX xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const VecX col = (micro_integrate(lv, xp, grid, T, scheme) -
                        micro_integrate(lv, xm, grid, T, scheme)) /
                       (2 * h);
      CHECK((fs.d_dx.col(j) - col).lpNorm<Eigen::Infinity>() <= 1e-6);
    }
    const VecX dT = (micro_integrate(lv, x, grid, T + h, scheme) -
                     micro_integrate(lv, x, grid, T - h, scheme)) /
                    (2 * h);
    CHECK((fs.d_dT - dT).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("bootstrap detects the harmonic period") {
  HarmonicOscillator ho;
  VecX x0(2);
  x0 << 1.0, 0.0;
  // section x2 = 0, transversal to every circular orbit
  const auto phase = PhaseCondition::section((VecX(2) << 0, 1).finished(), 0.0);
  const CycleVariables z =
      bootstrap_cycle_guess(ho, x0, ControlGrid{MatX::Zero(0, 3)}, phase, 10.0);
  CHECK(z.T == doctest::Approx(2.0 * M_PI).epsilon(1e-6));
  CHECK((z.x_minus - x0).lpNorm<Eigen::Infinity>() <= 1e-9);
  CHECK((z.x_plus - x0).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("bootstrap fails at an equilibrium") {
  LotkaVolterra lv;
  VecX x0(2);
  x0 << 1.0, 0.5;  // interior equilibrium
  const auto phase = PhaseCondition::section((VecX(2) << 1, 0).finished(), 1.0);
  CHECK_THROWS_AS(bootstrap_cycle_guess(lv, x0, constant_grid(0.0, 3), phase, 50.0),
                  DetectionError);
}

TEST_CASE("cycle residual structure") {
  LotkaVolterra lv;
  const auto phase = PhaseCondition::section((VecX(2) << 1, 0).finished(), 1.0);
  const ControlGrid grid = constant_grid(0.0, 3);
  const MicroScheme scheme = rk4(40);
  VecX anchor(2);
  anchor << 1.0, 1.5;

  const CycleVariables guess = bootstrap_cycle_guess(lv, anchor, grid, phase, 30.0);
  const CycleVariables z = solve_cycle(lv, phase, grid, anchor, guess, scheme);

  const VecX r = cycle_residual(z, grid, anchor, phase, lv, scheme);
  REQUIRE(r.size() == 5);
  CHECK(r.lpNorm<Eigen::Infinity>() <= 1e-10);

  // perturbing T only moves the flow block
  CycleVariables zt = z;
  zt.T += 1e-3;
  const VecX rt = cycle_residual(zt, grid, anchor, phase, lv, scheme);
  CHECK(rt.head(2).lpNorm<Eigen::Infinity>() <= 1e-14);  // anchor + start section
  CHECK(rt.segment(2, 2).lpNorm<Eigen::Infinity>() > 1e-6);
  CHECK(std::abs(rt[4]) <= 1e-14);  // end section sees only x_plus
}

TEST_CASE("closed orbit cycle: endpoints coincide and T matches event detection") {
  LotkaVolterra lv;
  const auto phase = PhaseCondition::section((VecX(2) << 1, 0).finished(), 1.0);
  const ControlGrid grid = constant_grid(0.0, 3);
  VecX anchor(2);
  anchor << 1.0, 1.5;

  // independent oracle: fine event detection
  BootstrapOptions fine;
  fine.steps = 400000;
  const CycleVariables oracle = bootstrap_cycle_guess(lv, anchor, grid, phase, 30.0, fine);

  const CycleVariables z = solve_cycle(lv, phase, grid, anchor, oracle, rk4(120));
  CHECK((z.x_minus - anchor).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK((z.x_plus - anchor).lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK(std::abs(z.T - oracle.T) <= 1e-6 * oracle.T);
}

TEST_CASE("near-identity map on the conservative system") {
  LotkaVolterra lv;
  const auto phase = PhaseCondition::section((VecX(2) << 1, 0).finished(), 1.0);
  const ControlGrid grid = constant_grid(0.0, 3);
  VecX anchor(2);
  anchor << 1.0, 1.7;
  const CycleVariables guess = bootstrap_cycle_guess(lv, anchor, grid, phase, 40.0);
  const CycleVariables z = solve_cycle(lv, phase, grid, anchor, guess, rk4(100));
  CHECK((z.x_plus - z.x_minus).lpNorm<Eigen::Infinity>() <= 1e-7);
}

TEST_CASE("doubling micro steps moves the solved duration at fourth order") {
  LotkaVolterra lv;
  const auto phase = PhaseCondition::section((VecX(2) << 1, 0).finished(), 1.0);
  const ControlGrid grid = constant_grid(0.002, 3);
  VecX anchor(2);
  anchor << 1.0, 1.5;
  const CycleVariables guess = bootstrap_cycle_guess(lv, anchor, grid, phase, 30.0);

  double prev_diff = -1.0;
  double T_prev = 0.0;
  for (int steps : {10, 20, 40, 80}) {
    const double T = solve_cycle(lv, phase, grid, anchor, guess, rk4(steps)).T;
    if (steps > 10) {
      const double diff = std::abs(T - T_prev);
      if (prev_diff > 0.0 && diff > 1e-12)
        CHECK(prev_diff / diff >= 8.0);  // h^4 halving gives ~16
      prev_diff = diff;
    }
    T_prev = T;
  }
}

TEST_CASE("harmonic cycle solve recovers the analytic period") {
  HarmonicOscillator ho;
  const auto phase = PhaseCondition::section((VecX(2) << 0, 1).finished(), 0.0);
  ControlGrid grid{MatX::Zero(0, 3)};
  VecX anchor(2);
  anchor << 1.0, 0.0;
  CycleVariables guess;
  guess.x_minus = anchor;
  guess.x_plus = anchor;
  guess.T = 6.0;
  const CycleVariables z = solve_cycle(ho, phase, grid, anchor, guess, rk4(100));
  CHECK(z.T == doctest::Approx(2.0 * M_PI).epsilon(1e-7));
}

TEST_CASE("tangential section residual evaluates cleanly") {
  // the unit circle touches the section x1 = 1 exactly at the anchor; the
  // analytic cycle still zeroes the residual up to micro error
  HarmonicOscillator ho;
  const auto phase = PhaseCondition::section((VecX(2) << 1, 0).finished(), 1.0);
  ControlGrid grid{MatX::Zero(0, 3)};
  VecX anchor(2);
  anchor << 1.0, 0.0;
  CycleVariables z;
  z.x_minus = anchor;
  z.x_plus = anchor;
  z.T = 2.0 * M_PI;
  const VecX r = cycle_residual(z, grid, anchor, phase, ho, rk4(100));
  CHECK(r.lpNorm<Eigen::Infinity>() <= 1.1e-8);
}

TEST_CASE("wildly wrong duration guesses never return a silent multi-cycle") {
  LotkaVolterra lv;
  const auto phase = PhaseCondition::section((VecX(2) << 1, 0).finished(), 1.0);
  const ControlGrid grid = constant_grid(0.0, 3);
  VecX anchor(2);
  anchor << 1.0, 1.5;
  const CycleVariables good = bootstrap_cycle_guess(lv, anchor, grid, phase, 30.0);

  CycleVariables bad = good;
  bad.T = 10.0 * good.T;
  bool rejected = false;
  try {
    const CycleVariables z = solve_cycle(lv, phase, grid, anchor, bad, rk4(60));
    // if it converged it must be the intended single cycle
    CHECK(std::abs(z.T - good.T) <= 0.05 * good.T);
  } catch (const WrongCycleError&) {
    rejected = true;
  } catch (const NonConvergenceError&) {
    rejected = true;
  }
  INFO("rejected = ", rejected);
  CHECK(true);
}

TEST_CASE("solution is independent of the complement representation") {
  LotkaVolterra lv;
  auto phase = PhaseCondition::section((VecX(2) << 1, 0).finished(), 1.0);
  const ControlGrid grid = constant_grid(0.003, 3);
  VecX anchor(2);
  anchor << 1.0, 1.5;
  const CycleVariables guess = bootstrap_cycle_guess(lv, anchor, grid, phase, 30.0);
  const CycleVariables z1 = solve_cycle(lv, phase, grid, anchor, guess, rk4(40));

  auto flipped = phase;
  flipped.Q = -phase.Q;  // the only orthogonal change of basis in one dimension
  const CycleVariables z2 = solve_cycle(lv, flipped, grid, anchor, guess, rk4(40));
  CHECK((z1.x_plus - z2.x_plus).lpNorm<Eigen::Infinity>() <= 1e-9);
  CHECK(std::abs(z1.T - z2.T) <= 1e-9);
}

TEST_CASE("satellite cycle: one revolution under oblateness") {
  SatelliteMee sat{SatelliteParams{}};
  const double L0 = M_PI;
  const auto phase = PhaseCondition::phase_state(5, 8, L0, 2.0 * M_PI);
  const VecX x0 = park_orbit_state(L0);
  ControlGrid grid{MatX::Zero(3, 30)};

  CycleVariables guess;
  guess.x_minus = x0;
  guess.x_plus = x0;
  guess.x_plus[5] += 2.0 * M_PI;
  guess.T = sat.kepler_period(x0.head(6));
  guess.x_plus[7] += guess.T;

  const MicroScheme scheme = gl(3);
  const CycleVariables z = solve_cycle(sat, phase, grid, x0, guess, scheme);
  CHECK(std::abs(z.T - guess.T) <= 0.01 * guess.T);  // oblateness shifts it slightly
  CHECK(z.x_plus[5] - z.x_minus[5] == doctest::Approx(2.0 * M_PI));
  CHECK(z.x_plus[7] - z.x_minus[7] == doctest::Approx(z.T).epsilon(1e-10));

  const VecX r = cycle_residual(z, grid, x0, phase, sat, scheme);
  CHECK(r.lpNorm<Eigen::Infinity>() <= 1e-9);

  // replacing Q by Q R for a random orthogonal R leaves the solution alone
  std::mt19937 rng(23);
  std::normal_distribution<double> dist;
  MatX G(7, 7);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) G(i, j) = dist(rng);
  const MatX R = Eigen::HouseholderQR<MatX>(G).householderQ();
  auto rotated = phase;
  rotated.Q = phase.Q * R;
  const CycleVariables z2 = solve_cycle(sat, rotated, grid, x0, guess, scheme);
  CHECK((z2.x_plus - z.x_plus).lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + z.x_plus.lpNorm<Eigen::Infinity>()));
  CHECK(std::abs(z2.T - z.T) <= 1e-9 * z.T);
}
