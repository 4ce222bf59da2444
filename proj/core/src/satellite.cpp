#include "cyclops/satellite.hpp"

#include <cmath>

namespace cyclops {

namespace {

constexpr double kNewtonToKgKmPerS2 = 1e-3;  // N = kg m/s^2 -> kg km/s^2

double wrap_two_pi(double a) {
  const double two_pi = 2.0 * M_PI;
  a = std::fmod(a, two_pi);
  if (a < 0.0) a += two_pi;
  return a;
}

// Zonal gravity in the orbit-local (radial/transverse/normal) frame.
//
// With sp = sin(geocentric latitude) the radial part sums
// (mu/r^2) Jn (n+1) (R/r)^n Pn(sp); the latitude part is projected onto the
// transverse and normal axes through the components of the polar axis in the
// local frame, which cancels the cos(latitude) in the gradient.
template <class S>
void zonal_acceleration_impl(const SatelliteParams& prm, const S& p, const S& f,
                             const S& g, const S& h, const S& k, const S& L,
                             S* out) {
  using std::cos;
  using std::sin;
  out[0] = S(0.0);
  out[1] = S(0.0);
  out[2] = S(0.0);
  if (prm.zonal == ZonalTruncation::none) return;

  const S sinL = sin(L), cosL = cos(L);
  const S w = S(1.0) + f * cosL + g * sinL;
  const S r = p / w;
  const S ssq = S(1.0) + h * h + k * k;
  const S xi = h * sinL - k * cosL;

  const S sp = S(2.0) * xi / ssq;                       // sin latitude
  const S zt = S(2.0) * (h * cosL + k * sinL) / ssq;    // polar axis . e_t
  const S zn = (S(1.0) - h * h - k * k) / ssq;          // polar axis . e_n

  const S mu_r2 = S(prm.mu_earth) / (r * r);
  const S q = S(prm.r_earth) / r;
  const S q2 = q * q;

  const int n_max = prm.zonal == ZonalTruncation::j2 ? 2 : 4;
  const double jn[5] = {0.0, 0.0, prm.j2, prm.j3, prm.j4};

  S radial = S(0.0);
  S lat_grad = S(0.0);  // sum Jn (R/r)^n Pn'(sp)
  S qn = q2;
  for (int n = 2; n <= n_max; ++n) {
    S pn, dpn;
    if (n == 2) {
      pn = (S(3.0) * sp * sp - S(1.0)) / S(2.0);
      dpn = S(3.0) * sp;
    } else if (n == 3) {
      pn = (S(5.0) * sp * sp * sp - S(3.0) * sp) / S(2.0);
      dpn = (S(15.0) * sp * sp - S(3.0)) / S(2.0);
    } else {
      const S sp2 = sp * sp;
      pn = (S(35.0) * sp2 * sp2 - S(30.0) * sp2 + S(3.0)) / S(8.0);
      dpn = (S(35.0) * sp2 - S(15.0)) * sp / S(2.0);
    }
    radial += S(jn[n] * (n + 1)) * qn * pn;
    lat_grad += S(jn[n]) * qn * dpn;
    qn = qn * q;
  }

  // the latitude gradient has no radial share: the north direction is
  // orthogonal to e_r, and the cos(latitude) factors cancel in zt, zn
  out[0] = mu_r2 * radial;
  out[1] = -mu_r2 * lat_grad * zt;
  out[2] = -mu_r2 * lat_grad * zn;
}

template <class S>
VecT<S> satellite_rhs_impl(const SatelliteParams& prm, const VecT<S>& x,
                           const VecT<S>& u) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const S& p = x[0];
  const S& f = x[1];
  const S& g = x[2];
  const S& h = x[3];
  const S& k = x[4];
  const S& L = x[5];
  const S& m = x[6];

  const S sinL = sin(L), cosL = cos(L);
  const S w = S(1.0) + f * cosL + g * sinL;
  if (!(value_of(p) > 0.0))
    throw DomainError("satellite_mee: semi-latus rectum must be positive");
  if (!(value_of(w) > 0.0))
    throw DomainError("satellite_mee: 1 + f cosL + g sinL must stay positive");
  if (!(value_of(m) > 0.0))
    throw DomainError("satellite_mee: mass must stay positive");

  S grav[3];
  zonal_acceleration_impl(prm, p, f, g, h, k, L, grav);

  const S thrust_scale = S(prm.thrust_max * kNewtonToKgKmPerS2) / m;
  const S dr = grav[0] + thrust_scale * u[0];
  const S dt = grav[1] + thrust_scale * u[1];
  const S dn = grav[2] + thrust_scale * u[2];

  const S root_p_mu = sqrt(p / S(prm.mu_earth));
  const S ssq = S(1.0) + h * h + k * k;
  const S xi = h * sinL - k * cosL;

  VecT<S> out(8);
  out[0] = root_p_mu * (S(2.0) * p / w) * dt;
  out[1] = root_p_mu * (dr * sinL + ((w + S(1.0)) * cosL + f) / w * dt -
                        g / w * xi * dn);
  out[2] = root_p_mu * (-dr * cosL + ((w + S(1.0)) * sinL + g) / w * dt +
                        f / w * xi * dn);
  out[3] = root_p_mu * ssq / (S(2.0) * w) * cosL * dn;
  out[4] = root_p_mu * ssq / (S(2.0) * w) * sinL * dn;
  out[5] = sqrt(S(prm.mu_earth) * p) * (w / p) * (w / p) +
           root_p_mu * xi / w * dn;
  out[6] = -S(prm.thrust_max / (prm.gee_sea_level * prm.isp)) *
           sqrt(u.squaredNorm() + S(prm.eps_smooth * prm.eps_smooth));
  out[7] = S(1.0);
  return out;
}

}  // namespace

void SatelliteParams::validate() const {
  if (!(m0 > 0 && thrust_max > 0 && isp > 0 && gee_sea_level > 0 &&
        mu_earth > 0 && r_earth > 0 && j2 > 0 && j4 < 0))
    throw PreconditionError("SatelliteParams: positivity constraints violated");
  if (!(j3 < 0)) throw PreconditionError("SatelliteParams: J3 must be negative");
  if (!(eps_smooth > 0 && eps_smooth < 1e-3))
    throw PreconditionError("SatelliteParams: eps_smooth must lie in (0, 1e-3)");
}

SatelliteMee::SatelliteMee(SatelliteParams params) : params_(params) {
  params_.validate();
}

VecX SatelliteMee::rhs(const VecX& x, const VecX& u) const {
  return satellite_rhs_impl<double>(params_, x, u);
}
VecD SatelliteMee::rhs(const VecD& x, const VecD& u) const {
  return satellite_rhs_impl<Dual>(params_, x, u);
}

VecX SatelliteMee::zonal_acceleration(const VecX& x6) const {
  double out[3];
  zonal_acceleration_impl(params_, x6[0], x6[1], x6[2], x6[3], x6[4], x6[5], out);
  return (VecX(3) << out[0], out[1], out[2]).finished();
}

double SatelliteMee::kepler_period(const VecX& x6) const {
  const ClassicalElements ce = classical_from_mee(x6);
  return 2.0 * M_PI * std::sqrt(ce.a * ce.a * ce.a / params_.mu_earth);
}

ClassicalElements classical_from_mee(const VecX& x6) {
  const double p = x6[0], f = x6[1], g = x6[2], h = x6[3], k = x6[4], L = x6[5];
  if (!(p > 0)) throw DomainError("classical_from_mee: p must be positive");
  ClassicalElements ce;
  ce.e = std::sqrt(f * f + g * g);
  if (!(ce.e < 1.0))
    throw DomainError("classical_from_mee: eccentricity must stay below one");
  ce.a = p / (1.0 - ce.e * ce.e);
  const double tan_half_i = std::sqrt(h * h + k * k);
  ce.inc = 2.0 * std::atan(tan_half_i);
  ce.raan = wrap_two_pi(std::atan2(k, h));
  const double lon_periapsis = std::atan2(g, f);
  ce.argp = wrap_two_pi(lon_periapsis - std::atan2(k, h));
  ce.true_anomaly = wrap_two_pi(L - lon_periapsis);
  return ce;
}

VecX mee_from_classical(const ClassicalElements& ce) {
  if (!(ce.a > 0)) throw DomainError("mee_from_classical: a must be positive");
  if (!(ce.e >= 0 && ce.e < 1))
    throw DomainError("mee_from_classical: e must lie in [0,1)");
  if (!(ce.inc >= 0 && ce.inc < M_PI))
    throw DomainError("mee_from_classical: inclination must lie in [0, pi)");

  VecX x6(6);
  x6[0] = ce.a * (1.0 - ce.e * ce.e);
  x6[1] = ce.e * std::cos(ce.argp + ce.raan);
  x6[2] = ce.e * std::sin(ce.argp + ce.raan);
  const double t = std::tan(ce.inc / 2.0);
  x6[3] = t * std::cos(ce.raan);
  x6[4] = t * std::sin(ce.raan);
  x6[5] = ce.raan + ce.argp + ce.true_anomaly;
  return x6;
}

}  // namespace cyclops
