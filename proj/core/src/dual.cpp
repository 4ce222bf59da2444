#include "cyclops/dual.hpp"

namespace cyclops {

VecD seed_vector(const VecX& x) {
  return seed_vector(x, 0, static_cast<int>(x.size()));
}

VecD seed_vector(const VecX& x, int offset, int n_seeds) {
  VecD out(x.size());
  for (int i = 0; i < x.size(); ++i)
    out[i] = Dual::seeded(x[i], offset + i, n_seeds);
  return out;
}

VecD constant_vector(const VecX& x) {
  VecD out(x.size());
  for (int i = 0; i < x.size(); ++i) out[i] = Dual(x[i]);
  return out;
}

MatD constant_matrix(const MatX& m) {
  MatD out(m.rows(), m.cols());
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i) out(i, j) = Dual(m(i, j));
  return out;
}

VecX values(const VecD& x) {
  VecX out(x.size());
  for (int i = 0; i < x.size(); ++i) out[i] = x[i].value();
  return out;
}

MatX collect_jacobian(const VecD& out, int n_inputs) {
  MatX J = MatX::Zero(out.size(), n_inputs);
  for (int i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out[i].value()))
      throw EvaluationError("non-finite value in component " + std::to_string(i), i);
    if (out[i].has_deriv()) {
      if (out[i].deriv().size() != n_inputs)
        throw PreconditionError("collect_jacobian: seed dimension mismatch");
      if (!out[i].deriv().allFinite())
        throw EvaluationError("non-finite derivative in component " + std::to_string(i), i);
      J.row(i) = out[i].deriv().transpose();
    }
  }
  return J;
}

MatX jacobian(const std::function<VecD(const VecD&)>& fn, const VecX& x) {
  const VecD out = fn(seed_vector(x));
  return collect_jacobian(out, static_cast<int>(x.size()));
}

VecX gradient(const std::function<Dual(const VecD&)>& fn, const VecX& x) {
  const Dual out = fn(seed_vector(x));
  if (!std::isfinite(out.value()))
    throw EvaluationError("non-finite objective value", 0);
  if (!out.has_deriv()) return VecX::Zero(x.size());
  if (!out.deriv().allFinite())
    throw EvaluationError("non-finite objective derivative", 0);
  return out.deriv();
}

}  // namespace cyclops
