#include "cyclops/nlp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace cyclops {

const VariableBlock& VariableLayout::find(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw PreconditionError("variable layout: no block named '" + name + "'");
}

bool VariableLayout::has(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return true;
  return false;
}

void NlpProblem::validate() const {
  if (n < 1) throw PreconditionError("nlp: empty decision vector");
  if (w0.size() != n || lb.size() != n || ub.size() != n)
    throw PreconditionError("nlp: guess/bounds dimension mismatch");
  for (int i = 0; i < n; ++i)
    if (!(lb[i] <= ub[i])) throw PreconditionError("nlp: inconsistent bounds");
  if (!objective || !objective_gradient)
    throw PreconditionError("nlp: objective evaluators missing");
  if (m_eq > 0 && (!eq || !eq_jacobian))
    throw PreconditionError("nlp: equality evaluators missing");
  if (m_in > 0 && (!ineq || !ineq_jacobian))
    throw PreconditionError("nlp: inequality evaluators missing");
}

const char* to_string(NlpStatus s) {
  switch (s) {
    case NlpStatus::optimal: return "optimal";
    case NlpStatus::max_iter: return "max_iter";
    case NlpStatus::infeasible: return "infeasible";
    case NlpStatus::step_failure: return "step_failure";
  }
  return "unknown";
}

double KktResiduals::max() const {
  return std::max(stationarity, std::max(feasibility, complementarity));
}

KktResiduals kkt_residual(const NlpProblem& p, const VecX& w, const VecX& y_eq,
                          const VecX& y_in, const VecX& z_lb, const VecX& z_ub) {
  KktResiduals r;

  VecX stat = p.objective_gradient(w);
  if (p.m_eq > 0) stat -= p.eq_jacobian(w).transpose() * y_eq;
  VecX c_in;
  if (p.m_in > 0) {
    c_in = p.ineq(w);
    stat -= p.ineq_jacobian(w).transpose() * y_in;
  }
  stat -= z_lb;
  stat += z_ub;
  r.stationarity = stat.lpNorm<Eigen::Infinity>();

  double feas = 0.0;
  if (p.m_eq > 0) feas = p.eq(w).lpNorm<Eigen::Infinity>();
  if (p.m_in > 0)
    for (int i = 0; i < p.m_in; ++i) feas = std::max(feas, std::max(0.0, -c_in[i]));
  for (int i = 0; i < p.n; ++i) {
    if (std::isfinite(p.lb[i])) feas = std::max(feas, p.lb[i] - w[i]);
    if (std::isfinite(p.ub[i])) feas = std::max(feas, w[i] - p.ub[i]);
  }
  r.feasibility = feas;

  double compl_ = 0.0;
  if (p.m_in > 0)
    for (int i = 0; i < p.m_in; ++i)
      compl_ = std::max(compl_, std::abs(y_in[i] * c_in[i]));
  for (int i = 0; i < p.n; ++i) {
    if (std::isfinite(p.lb[i]))
      compl_ = std::max(compl_, std::abs(z_lb[i] * (w[i] - p.lb[i])));
    if (std::isfinite(p.ub[i]))
      compl_ = std::max(compl_, std::abs(z_ub[i] * (p.ub[i] - w[i])));
  }
  r.complementarity = compl_;
  return r;
}

namespace {

SpMat lower_triangle(const SpMat& m) {
  return m.triangularView<Eigen::Lower>();
}

SpMat dense_to_sparse(const MatX& m) {
  SpMat out(m.rows(), m.cols());
  std::vector<Triplet> trips;
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i)
      if (m(i, j) != 0.0) trips.emplace_back(i, j, m(i, j));
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

SpMat assemble_kkt(const KktSystem& sys) {
  const int n = static_cast<int>(sys.H.rows());
  const int m = static_cast<int>(sys.A.rows());
  std::vector<Triplet> trips;
  trips.reserve(sys.H.nonZeros() + sys.A.nonZeros() + n + m);
  for (int k = 0; k < sys.H.outerSize(); ++k)
    for (SpMat::InnerIterator it(sys.H, k); it; ++it)
      if (it.row() >= it.col()) trips.emplace_back(it.row(), it.col(), it.value());
  for (int i = 0; i < n; ++i) trips.emplace_back(i, i, sys.delta);
  for (int k = 0; k < sys.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(sys.A, k); it; ++it)
      trips.emplace_back(n + it.row(), it.col(), it.value());
  for (int j = 0; j < m; ++j) trips.emplace_back(n + j, n + j, -sys.delta_c);
  SpMat K(n + m, n + m);
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

}  // namespace

VecX kkt_linear_solve(const KktSystem& sys, const VecX& rhs, bool sparse) {
  const int n = static_cast<int>(sys.H.rows());
  const int m = static_cast<int>(sys.A.rows());
  if (rhs.size() != n + m) throw PreconditionError("kkt_linear_solve: rhs size");

  if (sparse) {
    const SpMat K = assemble_kkt(sys);
    SparseKktFactor fac;
    fac.analyze(K);
    if (!fac.factorize(K))
      throw SingularMatrixError("kkt_linear_solve: sparse factorization failed");
    return fac.solve(rhs);
  }

  MatX K = MatX::Zero(n + m, n + m);
  const SpMat H_sym = sys.H.selfadjointView<Eigen::Lower>();
  K.topLeftCorner(n, n) = MatX(H_sym);
  K.topLeftCorner(n, n) += sys.delta * MatX::Identity(n, n);
  if (m > 0) {
    K.bottomLeftCorner(m, n) = MatX(sys.A);
    K.topRightCorner(n, m) = MatX(sys.A).transpose();
    K.bottomRightCorner(m, m) = -sys.delta_c * MatX::Identity(m, m);
  }
  return lu_solve(K, rhs);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Evaluation {
  double f = 0.0;
  VecX grad;
  VecX c_eq, c_in;
  SpMat A_eq, A_in;
};

class InteriorPoint {
public:
  InteriorPoint(const NlpProblem& p, const NlpOptions& opts) : p_(p), o_(opts) {
    n_ = p.n;
    me_ = p.m_eq;
    mi_ = p.m_in;
    use_sparse_ = o_.kkt == NlpOptions::Kkt::sparse ||
                  (o_.kkt == NlpOptions::Kkt::automatic && n_ + me_ > 1500);
    use_bfgs_ = !p_.objective_hessian.has_value() && n_ <= o_.bfgs_max_dim;
  }

  NlpSolution run();

private:
  Evaluation evaluate(const VecX& w) const {
    Evaluation e;
    e.f = p_.objective(w);
    e.grad = p_.objective_gradient(w);
    if (me_ > 0) {
      e.c_eq = p_.eq(w);
      e.A_eq = p_.eq_jacobian(w);
    } else {
      e.c_eq = VecX(0);
      e.A_eq = SpMat(0, n_);
    }
    if (mi_ > 0) {
      e.c_in = p_.ineq(w);
      e.A_in = p_.ineq_jacobian(w);
    } else {
      e.c_in = VecX(0);
      e.A_in = SpMat(0, n_);
    }
    if (!std::isfinite(e.f) || !e.grad.allFinite() || !e.c_eq.allFinite() ||
        !e.c_in.allFinite())
      throw EvaluationError("nlp: non-finite evaluation", -1);
    return e;
  }

  double barrier_objective(const Evaluation& e, const VecX& w, const VecX& s) const {
    double phi = e.f;
    for (int i = 0; i < n_; ++i) {
      if (std::isfinite(p_.lb[i])) phi -= mu_ * std::log(w[i] - p_.lb[i]);
      if (std::isfinite(p_.ub[i])) phi -= mu_ * std::log(p_.ub[i] - w[i]);
    }
    for (int i = 0; i < mi_; ++i) phi -= mu_ * std::log(s[i]);
    return phi;
  }

  double merit(const Evaluation& e, const VecX& w, const VecX& s) const {
    double phi = barrier_objective(e, w, s);
    phi += nu_ * e.c_eq.lpNorm<1>();
    phi += nu_ * (e.c_in - s).lpNorm<1>();
    return phi;
  }

  // KKT residuals of the barrier problem (mu-perturbed), for mu updates.
  double barrier_error(const Evaluation& e, const VecX& w, const VecX& s) const {
    VecX stat = e.grad;
    if (me_ > 0) stat -= e.A_eq.transpose() * y_eq_;
    if (mi_ > 0) stat -= e.A_in.transpose() * y_in_;
    stat -= z_lb_;
    stat += z_ub_;
    double err = stat.lpNorm<Eigen::Infinity>();
    if (me_ > 0) err = std::max(err, e.c_eq.lpNorm<Eigen::Infinity>());
    if (mi_ > 0) err = std::max(err, (e.c_in - s).lpNorm<Eigen::Infinity>());
    for (int i = 0; i < mi_; ++i)
      err = std::max(err, std::abs(s[i] * y_in_[i] - mu_));
    for (int i = 0; i < n_; ++i) {
      if (std::isfinite(p_.lb[i]))
        err = std::max(err, std::abs((w[i] - p_.lb[i]) * z_lb_[i] - mu_));
      if (std::isfinite(p_.ub[i]))
        err = std::max(err, std::abs((p_.ub[i] - w[i]) * z_ub_[i] - mu_));
    }
    return err;
  }

  void init_point();
  void update_hessian_model(const Evaluation& e);
  bool compute_step(const Evaluation& e, VecX& dw, VecX& dy_eq);
  void log_line(int iter, const Evaluation& e, const KktResiduals& k, double alpha);

  const NlpProblem& p_;
  NlpOptions o_;
  int n_, me_, mi_;
  bool use_sparse_ = false;
  bool use_bfgs_ = false;

  VecX w_, s_, y_eq_, y_in_, z_lb_, z_ub_;
  double mu_ = 0.1;
  double nu_ = 1.0;
  double delta_last_ = 0.0;

  MatX bfgs_;
  bool bfgs_ready_ = false;
  VecX prev_w_, prev_grad_lagr_gradpart_;
  SpMat prev_A_eq_, prev_A_in_;
  bool have_prev_ = false;

  SparseKktFactor factor_;
  bool pattern_ready_ = false;

  std::ofstream csv_;
};

void InteriorPoint::init_point() {
  w_ = p_.w0;
  // push the start point strictly inside its bounds
  for (int i = 0; i < n_; ++i) {
    const double lo = p_.lb[i], hi = p_.ub[i];
    if (std::isfinite(lo) && std::isfinite(hi)) {
      const double pad = std::min(1e-2 * std::max(1.0, std::abs(lo)), 1e-2 * (hi - lo));
      w_[i] = std::min(std::max(w_[i], lo + pad), hi - pad);
    } else if (std::isfinite(lo)) {
      w_[i] = std::max(w_[i], lo + 1e-2 * std::max(1.0, std::abs(lo)));
    } else if (std::isfinite(hi)) {
      w_[i] = std::min(w_[i], hi - 1e-2 * std::max(1.0, std::abs(hi)));
    }
  }

  mu_ = o_.mu0;
  s_.resize(mi_);
  if (mi_ > 0) {
    const VecX c = p_.ineq(w_);
    for (int i = 0; i < mi_; ++i) s_[i] = std::max(c[i], 1e-2);
  }
  y_eq_ = VecX::Zero(me_);
  y_in_.resize(mi_);
  for (int i = 0; i < mi_; ++i) y_in_[i] = mu_ / s_[i];
  z_lb_ = VecX::Zero(n_);
  z_ub_ = VecX::Zero(n_);
  for (int i = 0; i < n_; ++i) {
    if (std::isfinite(p_.lb[i])) z_lb_[i] = mu_ / (w_[i] - p_.lb[i]);
    if (std::isfinite(p_.ub[i])) z_ub_[i] = mu_ / (p_.ub[i] - w_[i]);
  }
  nu_ = 1.0;
  bfgs_ = MatX::Identity(n_, n_);
  bfgs_ready_ = true;
}

void InteriorPoint::update_hessian_model(const Evaluation& e) {
  if (!use_bfgs_ || !have_prev_) return;
  const VecX step = w_ - prev_w_;
  if (step.norm() < 1e-13) return;

  // gradient of the Lagrangian at previous and current point, with the
  // current multipliers
  VecX gl_prev = prev_grad_lagr_gradpart_;
  if (me_ > 0) gl_prev -= prev_A_eq_.transpose() * y_eq_;
  if (mi_ > 0) gl_prev -= prev_A_in_.transpose() * y_in_;
  VecX gl_now = e.grad;
  if (me_ > 0) gl_now -= e.A_eq.transpose() * y_eq_;
  if (mi_ > 0) gl_now -= e.A_in.transpose() * y_in_;

  VecX yv = gl_now - gl_prev;
  const VecX Bs = bfgs_ * step;
  const double sBs = step.dot(Bs);
  const double sy = step.dot(yv);
  if (sBs <= 0.0) return;
  if (sy < 0.2 * sBs) {
    const double theta = 0.8 * sBs / (sBs - sy);
    yv = theta * yv + (1.0 - theta) * Bs;
  }
  const double sy_d = step.dot(yv);
  if (sy_d <= 1e-16) return;
  bfgs_ += yv * yv.transpose() / sy_d - Bs * Bs.transpose() / sBs;
}

bool InteriorPoint::compute_step(const Evaluation& e, VecX& dw, VecX& dy_eq) {
  // barrier gradient and condensed right-hand side
  VecX rbar = e.grad;
  for (int i = 0; i < n_; ++i) {
    if (std::isfinite(p_.lb[i])) rbar[i] -= mu_ / (w_[i] - p_.lb[i]);
    if (std::isfinite(p_.ub[i])) rbar[i] += mu_ / (p_.ub[i] - w_[i]);
  }
  if (me_ > 0) rbar -= e.A_eq.transpose() * y_eq_;

  VecX sigma_s(mi_), r_in(mi_);
  if (mi_ > 0) {
    r_in = e.c_in - s_;
    for (int i = 0; i < mi_; ++i) sigma_s[i] = y_in_[i] / s_[i];
    VecX t(mi_);
    for (int i = 0; i < mi_; ++i)
      t[i] = mu_ / s_[i] - sigma_s[i] * r_in[i];  // = mu/s - y - sigma r + y
    // rbar currently contains -A_in' y term? no: add it explicitly
    rbar -= e.A_in.transpose() * VecX(t);
  }

  // Hessian model
  SpMat H;
  if (p_.objective_hessian)
    H = *p_.objective_hessian;
  else if (use_bfgs_)
    H = dense_to_sparse(bfgs_);
  else
    H = SpMat(n_, n_);

  // barrier and slack condensation terms
  std::vector<Triplet> diag;
  diag.reserve(n_);
  for (int i = 0; i < n_; ++i) {
    double d = 0.0;
    if (std::isfinite(p_.lb[i])) d += z_lb_[i] / (w_[i] - p_.lb[i]);
    if (std::isfinite(p_.ub[i])) d += z_ub_[i] / (p_.ub[i] - w_[i]);
    diag.emplace_back(i, i, d);
  }
  SpMat Sigma_w(n_, n_);
  Sigma_w.setFromTriplets(diag.begin(), diag.end());
  H = H + Sigma_w;
  if (mi_ > 0) {
    SpMat D(mi_, mi_);
    std::vector<Triplet> dt;
    for (int i = 0; i < mi_; ++i) dt.emplace_back(i, i, sigma_s[i]);
    D.setFromTriplets(dt.begin(), dt.end());
    H = H + SpMat(e.A_in.transpose() * D * e.A_in);
  }

  VecX rhs(n_ + me_);
  rhs.head(n_) = -rbar;
  if (me_ > 0) rhs.tail(me_) = -e.c_eq;

  double delta = 0.0;
  for (int attempt = 0; attempt < 40; ++attempt) {
    KktSystem sys{lower_triangle(H), e.A_eq, delta, 1e-11};
    bool ok = false;
    VecX sol;
    if (use_sparse_) {
      const SpMat K = assemble_kkt(sys);
      // the pattern is evaluation-independent only with a fixed Hessian model
      if (!pattern_ready_ || use_bfgs_) {
        factor_.analyze(K);
        pattern_ready_ = true;
      }
      ok = factor_.factorize(K);
      if (ok && factor_.negative_pivots() != me_) ok = false;
      if (ok) {
        sol = factor_.solve(rhs);
        // one round of iterative refinement
        VecX resid = rhs - K.selfadjointView<Eigen::Lower>() * sol;
        sol += factor_.solve(resid);
        if (!sol.allFinite()) ok = false;
      }
    } else {
      try {
        sol = kkt_linear_solve(sys, rhs, false);
        ok = sol.allFinite();
      } catch (const SingularMatrixError&) {
        ok = false;
      }
    }
    if (ok) {
      dw = sol.head(n_);
      dy_eq = me_ > 0 ? VecX(-sol.tail(me_)) : VecX(0);
      delta_last_ = delta;
      return true;
    }
    delta = delta == 0.0 ? 1e-8 : 2.0 * delta;
    if (delta > 1e10) return false;
  }
  return false;
}

void InteriorPoint::log_line(int iter, const Evaluation& e, const KktResiduals& k,
                             double alpha) {
  if (o_.log)
    std::printf("nlp %-22s it %4d  f % .9e  stat %.2e  feas %.2e  compl %.2e  mu %.1e  alpha %.2e\n",
                p_.name.c_str(), iter, e.f, k.stationarity, k.feasibility,
                k.complementarity, mu_, alpha);
  if (csv_.is_open())
    csv_ << iter << "," << e.f << "," << k.stationarity << "," << k.feasibility << ","
         << k.complementarity << "," << mu_ << "," << alpha << "\n";
}

NlpSolution InteriorPoint::run() {
  p_.validate();
  if (!o_.log_csv.empty()) {
    csv_.open(o_.log_csv);
    csv_ << "iter,objective,stationarity,feasibility,complementarity,mu,alpha\n";
  }

  init_point();
  Evaluation e = evaluate(w_);

  NlpSolution sol;
  double best_feas = kInf;
  int stagnation = 0;
  int step_failures = 0;
  const double mu_min = o_.tol / 20.0;

  int iter = 0;
  for (; iter <= o_.max_iter; ++iter) {
    const KktResiduals kkt = kkt_residual(p_, w_, y_eq_, y_in_, z_lb_, z_ub_);

    if (o_.observer) {
      NlpIterate it{iter, e.f, kkt, mu_, 0.0, merit(e, w_, s_), w_};
      o_.observer(it);
    }

    if (kkt.max() <= o_.tol) {
      sol.status = NlpStatus::optimal;
      break;
    }
    if (e.f < -1e15) throw Error("nlp: objective unbounded below");

    // feasibility stagnation -> infeasible
    const double feas = kkt.feasibility;
    if (feas <= 0.9 * best_feas) {
      best_feas = feas;
      stagnation = 0;
    } else if (feas > o_.tol) {
      if (++stagnation >= 20) {
        sol.status = NlpStatus::infeasible;
        break;
      }
    }
    if (iter == o_.max_iter) {
      sol.status = NlpStatus::max_iter;
      break;
    }

    // barrier update on sufficient progress
    while (mu_ > mu_min && barrier_error(e, w_, s_) <= 10.0 * mu_)
      mu_ = std::max(mu_min, std::min(0.2 * mu_, std::pow(mu_, 1.5)));

    update_hessian_model(e);

    VecX dw, dy_eq;
    if (!compute_step(e, dw, dy_eq)) {
      sol.status = NlpStatus::step_failure;
      break;
    }

    // recover slack, inequality-dual and bound-dual directions
    VecX ds(mi_), dy_in(mi_);
    if (mi_ > 0) {
      const VecX Adw = e.A_in * dw;
      for (int i = 0; i < mi_; ++i) {
        ds[i] = Adw[i] + (e.c_in[i] - s_[i]);
        dy_in[i] = mu_ / s_[i] - y_in_[i] - (y_in_[i] / s_[i]) * ds[i];
      }
    }
    VecX dz_lb = VecX::Zero(n_), dz_ub = VecX::Zero(n_);
    for (int i = 0; i < n_; ++i) {
      if (std::isfinite(p_.lb[i])) {
        const double sl = w_[i] - p_.lb[i];
        dz_lb[i] = mu_ / sl - z_lb_[i] - (z_lb_[i] / sl) * dw[i];
      }
      if (std::isfinite(p_.ub[i])) {
        const double su = p_.ub[i] - w_[i];
        dz_ub[i] = mu_ / su - z_ub_[i] + (z_ub_[i] / su) * dw[i];
      }
    }

    // fraction-to-boundary step limits
    const double tau = 0.995;
    double a_primal = 1.0, a_dual = 1.0;
    for (int i = 0; i < mi_; ++i) {
      if (ds[i] < 0.0) a_primal = std::min(a_primal, -tau * s_[i] / ds[i]);
      if (dy_in[i] < 0.0) a_dual = std::min(a_dual, -tau * y_in_[i] / dy_in[i]);
    }
    for (int i = 0; i < n_; ++i) {
      if (std::isfinite(p_.lb[i])) {
        if (dw[i] < 0.0) a_primal = std::min(a_primal, -tau * (w_[i] - p_.lb[i]) / dw[i]);
        if (dz_lb[i] < 0.0) a_dual = std::min(a_dual, -tau * z_lb_[i] / dz_lb[i]);
      }
      if (std::isfinite(p_.ub[i])) {
        if (dw[i] > 0.0) a_primal = std::min(a_primal, tau * (p_.ub[i] - w_[i]) / dw[i]);
        if (dz_ub[i] < 0.0) a_dual = std::min(a_dual, tau * z_ub_[i] / dz_ub[i]);
      }
    }

    // penalty parameter keeps the merit direction a descent direction
    double multiplier_scale = 0.0;
    if (me_ > 0) multiplier_scale = (y_eq_ + dy_eq).lpNorm<Eigen::Infinity>();
    if (mi_ > 0)
      multiplier_scale =
          std::max(multiplier_scale, (y_in_ + dy_in).lpNorm<Eigen::Infinity>());
    nu_ = std::max(nu_, 1.2 * multiplier_scale + 0.1);

    const double phi0 = merit(e, w_, s_);
    double dphi = e.grad.dot(dw);
    for (int i = 0; i < n_; ++i) {
      if (std::isfinite(p_.lb[i])) dphi -= mu_ * dw[i] / (w_[i] - p_.lb[i]);
      if (std::isfinite(p_.ub[i])) dphi += mu_ * dw[i] / (p_.ub[i] - w_[i]);
    }
    for (int i = 0; i < mi_; ++i) dphi -= mu_ * ds[i] / s_[i];
    dphi -= nu_ * (e.c_eq.lpNorm<1>() + (e.c_in - s_).lpNorm<1>());

    double alpha = a_primal;
    bool accepted = false;
    Evaluation e_new;
    VecX w_new, s_new;
    for (int bt = 0; bt < 30; ++bt) {
      w_new = w_ + alpha * dw;
      s_new = mi_ > 0 ? VecX(s_ + alpha * ds) : VecX(0);
      try {
        e_new = evaluate(w_new);
        const double phi_new = merit(e_new, w_new, s_new);
        const bool armijo = phi_new <= phi0 + 1e-4 * alpha * std::min(dphi, 0.0);
        if (std::isfinite(phi_new) && (armijo || phi_new < phi0)) {
          accepted = true;
          break;
        }
      } catch (const Error&) {
        // point not evaluable; shrink
      }
      alpha *= 0.5;
    }

    if (!accepted) {
      if (++step_failures >= 3) {
        sol.status = NlpStatus::step_failure;
        break;
      }
      // shrink trust in the model and retry from the same point
      mu_ = std::min(o_.mu0, mu_ * 2.0);
      continue;
    }
    step_failures = 0;

    // accept
    prev_w_ = w_;
    prev_grad_lagr_gradpart_ = e.grad;
    prev_A_eq_ = e.A_eq;
    prev_A_in_ = e.A_in;
    have_prev_ = true;

    w_ = w_new;
    if (mi_ > 0) s_ = s_new;
    if (me_ > 0) y_eq_ += alpha * dy_eq;
    if (mi_ > 0) y_in_ += a_dual * dy_in;
    z_lb_ += a_dual * dz_lb;
    z_ub_ += a_dual * dz_ub;

    // keep bound duals commensurate with the barrier (safeguard)
    const double kappa = 1e10;
    for (int i = 0; i < n_; ++i) {
      if (std::isfinite(p_.lb[i])) {
        const double sl = w_[i] - p_.lb[i];
        z_lb_[i] = std::min(std::max(z_lb_[i], mu_ / (kappa * sl)), kappa * mu_ / sl);
      }
      if (std::isfinite(p_.ub[i])) {
        const double su = p_.ub[i] - w_[i];
        z_ub_[i] = std::min(std::max(z_ub_[i], mu_ / (kappa * su)), kappa * mu_ / su);
      }
    }
    for (int i = 0; i < mi_; ++i)
      y_in_[i] = std::min(std::max(y_in_[i], mu_ / (kappa * s_[i])), kappa * mu_ / s_[i]);

    e = e_new;
    const KktResiduals kkt_after = kkt_residual(p_, w_, y_eq_, y_in_, z_lb_, z_ub_);
    log_line(iter + 1, e, kkt_after, alpha);
  }

  sol.w = w_;
  sol.y_eq = y_eq_;
  sol.y_in = y_in_;
  sol.z_lb = z_lb_;
  sol.z_ub = z_ub_;
  sol.iterations = iter;
  sol.kkt = kkt_residual(p_, w_, y_eq_, y_in_, z_lb_, z_ub_);
  sol.objective = p_.objective(w_);
  return sol;
}

}  // namespace

NlpSolution solve_nlp(const NlpProblem& p, const NlpOptions& opts) {
  InteriorPoint ip(p, opts);
  return ip.run();
}

NlpProblem make_problem_ad(int n, const std::function<Dual(const VecD&)>& objective,
                           const std::function<VecD(const VecD&)>& eq,
                           const std::function<VecD(const VecD&)>& ineq,
                           const VecX& w0, const VecX& lb, const VecX& ub) {
  NlpProblem p;
  p.n = n;
  p.w0 = w0;
  p.lb = lb;
  p.ub = ub;
  p.m_eq = eq ? static_cast<int>(eq(constant_vector(w0)).size()) : 0;
  p.m_in = ineq ? static_cast<int>(ineq(constant_vector(w0)).size()) : 0;

  p.objective = [objective](const VecX& w) {
    return objective(constant_vector(w)).value();
  };
  p.objective_gradient = [objective, n](const VecX& w) {
    return gradient(objective, w);
  };
  if (p.m_eq > 0) {
    p.eq = [eq](const VecX& w) { return values(eq(constant_vector(w))); };
    p.eq_jacobian = [eq](const VecX& w) { return dense_to_sparse(jacobian(eq, w)); };
  }
  if (p.m_in > 0) {
    p.ineq = [ineq](const VecX& w) { return values(ineq(constant_vector(w))); };
    p.ineq_jacobian = [ineq](const VecX& w) {
      return dense_to_sparse(jacobian(ineq, w));
    };
  }
  return p;
}

}  // namespace cyclops
