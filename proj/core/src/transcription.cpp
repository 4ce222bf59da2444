#include "cyclops/transcription.hpp"

namespace cyclops {

int ConstraintSet::add(RowGroup group) {
  group.offset = rows_;
  rows_ += group.dim;
  groups_->push_back(std::move(group));
  return groups_->back().offset;
}

VecX ConstraintSet::eval(const VecX& w) const {
  VecX r(rows_);
  for (const auto& g : *groups_) g.value(w, r);
  return r;
}

SpMat ConstraintSet::jacobian(const VecX& w) const {
  std::vector<Triplet> trips;
  for (const auto& g : *groups_) {
    trips.insert(trips.end(), g.const_entries.begin(), g.const_entries.end());
    if (g.jacobian) g.jacobian(w, trips);
  }
  SpMat J(rows_, n_vars_);
  J.setFromTriplets(trips.begin(), trips.end());
  return J;
}

std::function<VecX(const VecX&)> ConstraintSet::value_fn() const {
  auto self = *this;
  return [self](const VecX& w) { return self.eval(w); };
}

std::function<SpMat(const VecX&)> ConstraintSet::jacobian_fn() const {
  auto self = *this;
  return [self](const VecX& w) { return self.jacobian(w); };
}

void ObjectiveAccumulator::add_term(std::function<double(const VecX&)> value,
                                    std::function<void(const VecX&, VecX&)> add_gradient) {
  terms_->push_back({std::move(value), std::move(add_gradient)});
}

std::function<double(const VecX&)> ObjectiveAccumulator::value_fn() const {
  auto terms = terms_;
  return [terms](const VecX& w) {
    double f = 0.0;
    for (const auto& t : *terms) f += t.value(w);
    return f;
  };
}

std::function<VecX(const VecX&)> ObjectiveAccumulator::gradient_fn() const {
  auto terms = terms_;
  const int n = n_vars_;
  return [terms, n](const VecX& w) {
    VecX g = VecX::Zero(n);
    for (const auto& t : *terms) t.add_gradient(w, g);
    return g;
  };
}

SpMat ObjectiveAccumulator::hessian() const {
  SpMat H(n_vars_, n_vars_);
  H.setFromTriplets(hess_.begin(), hess_.end());
  return H;
}

NlpProblem scale_problem(NlpProblem p, const VecX& var_scale, const VecX& eq_scale,
                         const VecX& in_scale) {
  if (var_scale.size() != p.n || eq_scale.size() != p.m_eq ||
      in_scale.size() != p.m_in)
    throw PreconditionError("scale_problem: scale dimension mismatch");
  for (int i = 0; i < p.n; ++i)
    if (!(var_scale[i] > 0.0))
      throw PreconditionError("scale_problem: scales must be positive");

  const VecX s = var_scale;
  auto unscale = [s](const VecX& w) { return VecX(s.cwiseProduct(w)); };

  p.w0 = p.w0.cwiseQuotient(s);
  p.lb = p.lb.cwiseQuotient(s);
  p.ub = p.ub.cwiseQuotient(s);

  auto f = p.objective;
  auto g = p.objective_gradient;
  p.objective = [f, unscale](const VecX& w) { return f(unscale(w)); };
  p.objective_gradient = [g, unscale, s](const VecX& w) {
    return VecX(s.cwiseProduct(g(unscale(w))));
  };
  if (p.objective_hessian) {
    SpMat H = *p.objective_hessian;
    for (int k = 0; k < H.outerSize(); ++k)
      for (SpMat::InnerIterator it(H, k); it; ++it)
        it.valueRef() *= s[it.row()] * s[it.col()];
    p.objective_hessian = H;
  }

  auto scale_rows = [](const SpMat& A, const VecX& row_scale, const VecX& col_scale) {
    SpMat out = A;
    for (int k = 0; k < out.outerSize(); ++k)
      for (SpMat::InnerIterator it(out, k); it; ++it)
        it.valueRef() *= row_scale[it.row()] * col_scale[it.col()];
    return out;
  };

  if (p.m_eq > 0) {
    auto c = p.eq;
    auto J = p.eq_jacobian;
    const VecX d = eq_scale;
    p.eq = [c, unscale, d](const VecX& w) { return VecX(d.cwiseProduct(c(unscale(w)))); };
    p.eq_jacobian = [J, unscale, d, s, scale_rows](const VecX& w) {
      return scale_rows(J(unscale(w)), d, s);
    };
  }
  if (p.m_in > 0) {
    auto c = p.ineq;
    auto J = p.ineq_jacobian;
    const VecX d = in_scale;
    p.ineq = [c, unscale, d](const VecX& w) { return VecX(d.cwiseProduct(c(unscale(w)))); };
    p.ineq_jacobian = [J, unscale, d, s, scale_rows](const VecX& w) {
      return scale_rows(J(unscale(w)), d, s);
    };
  }

  p.var_scale = s;
  return p;
}

}  // namespace cyclops
