#include "cyclops/controls.hpp"

#include <cmath>

namespace cyclops {

int control_interval_index(double tau_local, int n_ctrl) {
  if (!(tau_local >= 0.0 && tau_local < 1.0))
    throw PreconditionError("control_at_tau: local time must lie in [0,1)");
  int m = static_cast<int>(std::floor(tau_local * n_ctrl));
  if (m >= n_ctrl) m = n_ctrl - 1;  // guard against floating roundup at 1^-
  return m;
}

VecX control_at_tau(const ControlGrid& grid, double tau_local) {
  return grid.U.col(control_interval_index(tau_local, grid.n_ctrl()));
}

double lagrange_basis(const std::vector<double>& times, int i, double tau) {
  const int n = static_cast<int>(times.size());
  if (i < 0 || i >= n) throw PreconditionError("lagrange_basis: index out of range");
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (times[a] == times[b])
        throw PreconditionError("lagrange_basis: duplicate times");
  double out = 1.0;
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    out *= (tau - times[j]) / (times[i] - times[j]);
  }
  return out;
}

void PolynomialControlSchedule::validate() const {
  if (construction_times.empty() ||
      construction_times.size() != construction_controls.size())
    throw PreconditionError("control schedule: need matching, non-empty nodes");
  for (size_t i = 1; i < construction_times.size(); ++i)
    if (!(construction_times[i] > construction_times[i - 1]))
      throw PreconditionError("control schedule: times must strictly increase");
  for (const auto& U : construction_controls) {
    if (U.rows() != construction_controls[0].rows() ||
        U.cols() != construction_controls[0].cols())
      throw PreconditionError("control schedule: inconsistent matrix shapes");
    if (!U.allFinite())
      throw PreconditionError("control schedule: non-finite entries");
  }
}

PolynomialControlSchedule PolynomialControlSchedule::constant(const MatX& U,
                                                              double tau_mid) {
  PolynomialControlSchedule s;
  s.construction_times = {tau_mid};
  s.construction_controls = {U};
  return s;
}

std::vector<double> PolynomialControlSchedule::default_times(int d_u,
                                                             double n_total) {
  if (d_u < 1) throw PreconditionError("control schedule: d_u must be >= 1");
  if (d_u == 1) return {n_total / 2.0};
  if (d_u == 2) return {0.0, n_total};
  std::vector<double> t(d_u);
  for (int i = 0; i < d_u; ++i)
    t[i] = n_total * 0.5 * (1.0 - std::cos(M_PI * i / (d_u - 1)));
  return t;
}

std::vector<double> PolynomialControlSchedule::basis_weights(double tau) const {
  std::vector<double> w(construction_times.size());
  for (size_t i = 0; i < w.size(); ++i)
    w[i] = lagrange_basis(construction_times, static_cast<int>(i), tau);
  return w;
}

MatX PolynomialControlSchedule::eval_at_tau(double tau) const {
  const auto w = basis_weights(tau);
  MatX out = MatX::Zero(n_u(), n_ctrl());
  for (size_t i = 0; i < w.size(); ++i) out += w[i] * construction_controls[i];
  return out;
}

ControlGrid schedule_eval(const PolynomialControlSchedule& schedule, int k) {
  return ControlGrid{schedule.eval_at_tau(k + 0.5)};
}

}  // namespace cyclops
