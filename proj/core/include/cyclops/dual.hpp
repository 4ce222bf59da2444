#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <limits>

#include "cyclops/errors.hpp"
#include "cyclops/linalg.hpp"

namespace cyclops {

/// Forward-mode scalar carrying a value and a dense derivative vector.
///
/// An empty derivative vector means "identically zero derivative"; this keeps
/// constants allocation-free. All composed arithmetic propagates exact first
/// derivatives, so Jacobians of anything built from these scalars are exact
/// up to rounding.
class Dual {
public:
  Dual() : v_(0.0) {}
  Dual(double v) : v_(v) {}  // NOLINT: implicit by design
  Dual(double v, VecX d) : v_(v), d_(std::move(d)) {}

  static Dual seeded(double v, int index, int n_seeds) {
    VecX d = VecX::Zero(n_seeds);
    d[index] = 1.0;
    return Dual(v, std::move(d));
  }

  double value() const { return v_; }
  const VecX& deriv() const { return d_; }
  bool has_deriv() const { return d_.size() > 0; }

  Dual operator-() const { return Dual(-v_, -d_); }

  Dual& operator+=(const Dual& o) {
    v_ += o.v_;
    add_scaled(o.d_, 1.0);
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v_ -= o.v_;
    add_scaled(o.d_, -1.0);
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    // d(uv) = v du + u dv; careful: update d_ before v_ changes
    if (o.has_deriv() || has_deriv()) {
      scale(o.v_);
      add_scaled(o.d_, v_);
    }
    v_ *= o.v_;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v_;
    scale(inv);
    v_ *= inv;
    add_scaled(o.d_, -v_ * inv);
    return *this;
  }

  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
  friend Dual operator/(Dual a, const Dual& b) { return a /= b; }

  friend bool operator<(const Dual& a, const Dual& b) { return a.v_ < b.v_; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.v_ > b.v_; }
  friend bool operator<=(const Dual& a, const Dual& b) { return a.v_ <= b.v_; }
  friend bool operator>=(const Dual& a, const Dual& b) { return a.v_ >= b.v_; }
  friend bool operator==(const Dual& a, const Dual& b) { return a.v_ == b.v_; }
  friend bool operator!=(const Dual& a, const Dual& b) { return a.v_ != b.v_; }

  /// Chain rule for a univariate elementary: returns f(x) with f' applied.
  Dual chain(double fv, double dfv) const {
    if (!has_deriv()) return Dual(fv);
    return Dual(fv, dfv * d_);
  }

private:
  void scale(double s) {
    if (has_deriv()) d_ *= s;
  }
  void add_scaled(const VecX& o, double s) {
    if (o.size() == 0) return;
    if (!has_deriv())
      d_ = s * o;
    else
      d_ += s * o;
  }

  double v_;
  VecX d_;
};

inline Dual sin(const Dual& x) { return x.chain(std::sin(x.value()), std::cos(x.value())); }
inline Dual cos(const Dual& x) { return x.chain(std::cos(x.value()), -std::sin(x.value())); }
inline Dual tan(const Dual& x) {
  const double c = std::cos(x.value());
  return x.chain(std::tan(x.value()), 1.0 / (c * c));
}
inline Dual exp(const Dual& x) {
  const double e = std::exp(x.value());
  return x.chain(e, e);
}
inline Dual log(const Dual& x) { return x.chain(std::log(x.value()), 1.0 / x.value()); }
inline Dual sqrt(const Dual& x) {
  const double r = std::sqrt(x.value());
  return x.chain(r, 0.5 / r);
}
inline Dual atan(const Dual& x) {
  return x.chain(std::atan(x.value()), 1.0 / (1.0 + x.value() * x.value()));
}
inline Dual abs(const Dual& x) {
  return x.chain(std::abs(x.value()), x.value() >= 0.0 ? 1.0 : -1.0);
}
inline Dual pow(const Dual& x, double p) {
  return x.chain(std::pow(x.value(), p), p * std::pow(x.value(), p - 1.0));
}
inline Dual atan2(const Dual& y, const Dual& x) {
  const double denom = x.value() * x.value() + y.value() * y.value();
  Dual r = y.chain(0.0, x.value() / denom);
  Dual s = x.chain(0.0, -y.value() / denom);
  return Dual(std::atan2(y.value(), x.value())) + r + s;
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.value(); }

using VecD = VecT<Dual>;
using MatD = MatT<Dual>;

/// Seed a full identity basis over x: entry i carries derivative e_i.
VecD seed_vector(const VecX& x);

/// Seed a subvector of a larger seed space: entry i carries e_{offset+i}.
VecD seed_vector(const VecX& x, int offset, int n_seeds);

/// Constants: no derivative attached.
VecD constant_vector(const VecX& x);
MatD constant_matrix(const MatX& m);

VecX values(const VecD& x);

/// Collect the m x n Jacobian from fully-seeded outputs. Throws
/// EvaluationError (with the output index) on non-finite components.
MatX collect_jacobian(const VecD& out, int n_inputs);

/// Exact Jacobian of fn at x via forward seeding.
MatX jacobian(const std::function<VecD(const VecD&)>& fn, const VecX& x);

/// Exact gradient of a scalar-valued fn at x.
VecX gradient(const std::function<Dual(const VecD&)>& fn, const VecX& x);

}  // namespace cyclops

namespace Eigen {

template <>
struct NumTraits<cyclops::Dual> : NumTraits<double> {
  using Real = cyclops::Dual;
  using NonInteger = cyclops::Dual;
  using Nested = cyclops::Dual;
  using Literal = double;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 8,
    MulCost = 16
  };
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<cyclops::Dual, double, BinaryOp> {
  using ReturnType = cyclops::Dual;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, cyclops::Dual, BinaryOp> {
  using ReturnType = cyclops::Dual;
};

}  // namespace Eigen
