#pragma once

#include "nftrack/geometry.hpp"
#include "nftrack/types.hpp"

namespace nftrack {

/// CTRV state: pose plus linear speed v (m/s) and turn rate omega (rad/s).
/// psi is kept unwrapped.
struct MsState {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
  double v = 0.0;
  double omega = 0.0;

  Vec5 vec() const;
  static MsState from_vec(const Vec5& s);
  Pose pose() const { return {x, y, psi}; }
};

/// Process noise on the velocity components only:
/// N_s = diag(0, 0, 0, (tau sigma_v)^2, (tau sigma_omega)^2).
struct ProcessNoiseSpec {
  double sigma_v = 0.0;      // m/s^2
  double sigma_omega = 0.0;  // rad/s^2
  double tau = 0.02;         // s

  Mat5 covariance() const;
  void validate() const;
};

/// Turn rates below this magnitude use the second-order Taylor expansion of the
/// CTRV flow around omega = 0.
inline constexpr double kOmegaEps = 1e-6;

MsState ctrv_transition(const MsState& state, double tau);

/// d a(s) / d s, 5x5.
Mat5 ctrv_jacobian(const MsState& state, double tau);

Vec5 sample_process_noise(const ProcessNoiseSpec& spec, Rng& rng);

}  // namespace nftrack
