#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cyclops/dual.hpp"
#include "cyclops/linalg.hpp"

namespace cyclops {

/// A controlled vector field dx/dt = f(x, u), evaluable on plain doubles and
/// on derivative-carrying scalars. Implementations are immutable and their
/// rhs is pure, so models can be shared freely across threads.
class ControlledOdeModel {
public:
  virtual ~ControlledOdeModel() = default;

  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;
  virtual const std::string& name() const = 0;
  virtual const std::vector<std::string>& state_labels() const = 0;

  virtual VecX rhs(const VecX& x, const VecX& u) const = 0;
  virtual VecD rhs(const VecD& x, const VecD& u) const = 0;
};

}  // namespace cyclops
