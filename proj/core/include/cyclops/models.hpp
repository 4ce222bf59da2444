#pragma once

#include "cyclops/model.hpp"

namespace cyclops {

/// Planar rotation field [x2, -x1]; every orbit is a circle of period 2*pi.
/// Uncontrolled analytic test model.
class HarmonicOscillator final : public ControlledOdeModel {
public:
  int state_dim() const override { return 2; }
  int control_dim() const override { return 0; }
  const std::string& name() const override { return name_; }
  const std::vector<std::string>& state_labels() const override { return labels_; }
  VecX rhs(const VecX& x, const VecX& u) const override;
  VecD rhs(const VecD& x, const VecD& u) const override;

private:
  std::string name_ = "harmonic";
  std::vector<std::string> labels_ = {"x1", "x2"};
};

/// Predator-prey populations r (prey) and s (predator) with an additive
/// control on the predator growth:
///   dr/dt = (2/3) r - (4/3) r s
///   ds/dt = r s - s + u
/// Populations must stay positive (the conserved quantity below takes logs).
class LotkaVolterra final : public ControlledOdeModel {
public:
  int state_dim() const override { return 2; }
  int control_dim() const override { return 1; }
  const std::string& name() const override { return name_; }
  const std::vector<std::string>& state_labels() const override { return labels_; }
  VecX rhs(const VecX& x, const VecX& u) const override;
  VecD rhs(const VecD& x, const VecD& u) const override;

private:
  std::string name_ = "lotka_volterra";
  std::vector<std::string> labels_ = {"r", "s"};
};

/// Conserved along uncontrolled trajectories: V = r - ln r + (4/3)s - (2/3)ln s.
/// Used as an independent check on integrators and cycle solvers.
double lotka_volterra_invariant(const VecX& x);

}  // namespace cyclops
