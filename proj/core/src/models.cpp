#include "cyclops/models.hpp"

#include <cmath>

namespace cyclops {

namespace {

constexpr double kPopulationFloor = 1e-9;

template <class S>
VecT<S> harmonic_rhs_impl(const VecT<S>& x) {
  VecT<S> out(2);
  out[0] = x[1];
  out[1] = -x[0];
  return out;
}

template <class S>
VecT<S> lotka_volterra_rhs_impl(const VecT<S>& x, const VecT<S>& u) {
  const S& r = x[0];
  const S& s = x[1];
  if (!(value_of(r) > kPopulationFloor && value_of(s) > kPopulationFloor))
    throw DomainError("lotka_volterra: populations must stay positive");
  VecT<S> out(2);
  out[0] = (2.0 / 3.0) * r - (4.0 / 3.0) * r * s;
  out[1] = r * s - s + u[0];
  return out;
}

}  // namespace

VecX HarmonicOscillator::rhs(const VecX& x, const VecX&) const {
  return harmonic_rhs_impl<double>(x);
}
VecD HarmonicOscillator::rhs(const VecD& x, const VecD&) const {
  return harmonic_rhs_impl<Dual>(x);
}

VecX LotkaVolterra::rhs(const VecX& x, const VecX& u) const {
  return lotka_volterra_rhs_impl<double>(x, u);
}
VecD LotkaVolterra::rhs(const VecD& x, const VecD& u) const {
  return lotka_volterra_rhs_impl<Dual>(x, u);
}

double lotka_volterra_invariant(const VecX& x) {
  const double r = x[0], s = x[1];
  if (!(r > kPopulationFloor && s > kPopulationFloor))
    throw DomainError("lotka_volterra_invariant: populations must stay positive");
  return r - std::log(r) + (4.0 / 3.0) * s - (2.0 / 3.0) * std::log(s);
}

}  // namespace cyclops
