#pragma once

#include "cyclops/model.hpp"

namespace cyclops {

/// Which zonal harmonics enter the gravity perturbation.
enum class ZonalTruncation { none, j2, j2j3j4 };

/// Physical constants and engine data for the low-thrust satellite.
/// Units: km, s, kg internally; thrust is given in N and converted at the
/// model boundary, the mass-flow equation keeps SI (N, m/s^2, s -> kg/s).
struct SatelliteParams {
  double m0 = 160.0;              // initial mass [kg]
  double thrust_max = 0.2;        // maximum thrust T0 [N]
  double isp = 1600.0;            // specific impulse [s]
  double gee_sea_level = 9.81;    // gravitational acceleration at sea level [m/s^2]
  double eps_smooth = 1e-5;       // smoothing of the control-norm square root
  double mu_earth = 398600.44;    // gravitational parameter [km^3/s^2]
  double r_earth = 6378.14;       // equatorial radius [km]
  double j2 = 1.08263e-3;
  double j3 = -2.532e-6;
  double j4 = -1.62e-6;
  ZonalTruncation zonal = ZonalTruncation::j2j3j4;

  void validate() const;
};

/// Classical orbit elements. Angles in radians.
struct ClassicalElements {
  double a;             // semi-major axis [km]
  double e;             // eccentricity
  double inc;           // inclination
  double raan;          // right ascension of the ascending node
  double argp;          // argument of perigee
  double true_anomaly;
};

/// Modified equinoctial elements (p,f,g,h,k,L) <-> classical elements.
/// The map is singular at inc = pi (tan(inc/2) blows up) -> DomainError.
ClassicalElements classical_from_mee(const VecX& x6);
VecX mee_from_classical(const ClassicalElements& ce);

/// Low-thrust satellite in modified equinoctial elements, extended with a
/// mass state and a clock state:
///   x = [p, f, g, h, k, L, m, t],   u in R^3 (radial, transverse, normal).
///
/// The first six rates are A(x) (Delta_G(x) + (T0/m) u) + b(x); Delta_G
/// collects the selected zonal-harmonic accelerations rotated into the
/// orbit-local frame. Mass flows as -T0/(g0 Isp) sqrt(u'u + eps^2), the
/// clock state advances at rate one.
class SatelliteMee final : public ControlledOdeModel {
public:
  explicit SatelliteMee(SatelliteParams params);

  int state_dim() const override { return 8; }
  int control_dim() const override { return 3; }
  const std::string& name() const override { return name_; }
  const std::vector<std::string>& state_labels() const override { return labels_; }
  VecX rhs(const VecX& x, const VecX& u) const override;
  VecD rhs(const VecD& x, const VecD& u) const override;

  const SatelliteParams& params() const { return params_; }

  /// Gravity perturbation alone (km/s^2, orbit-local frame); exposed for tests.
  VecX zonal_acceleration(const VecX& x6) const;

  /// Kepler period of the osculating orbit through x6.
  double kepler_period(const VecX& x6) const;

private:
  SatelliteParams params_;
  std::string name_ = "satellite_mee";
  std::vector<std::string> labels_ = {"p", "f", "g", "h", "k", "L", "m", "t"};
};

}  // namespace cyclops
