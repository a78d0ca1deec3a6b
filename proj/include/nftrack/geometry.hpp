#pragma once

#include <optional>
#include <vector>

#include "nftrack/types.hpp"

namespace nftrack {

/// Uniform linear arrays at the base station (BS, along the y-axis, centred at
/// the origin) and at the mobile station (MS).
struct ArrayConfig {
  int n_b = 1;
  int n_m = 1;
  double carrier_freq = 28e9;  // Hz
  double wavelength = kSpeedOfLight / 28e9;
  double d_b = 0.5 * kSpeedOfLight / 28e9;  // BS element spacing, m
  double d_m = 0.5 * kSpeedOfLight / 28e9;  // MS element spacing, m

  /// Builds a configuration; spacings default to half a wavelength.
  static ArrayConfig make(int n_b, int n_m, double carrier_freq_hz,
                          std::optional<double> d_b = std::nullopt,
                          std::optional<double> d_m = std::nullopt);

  double wavenumber() const { return 2.0 * kPi / wavelength; }
  double bs_aperture() const { return (n_b - 1) * d_b; }
  double ms_aperture() const { return (n_m - 1) * d_m; }

  /// Signed antenna indices, centred on 0. Odd counts give {-N..N}, even counts
  /// {-N..N-1} with N = n/2.
  std::vector<int> bs_indices() const;
  std::vector<int> ms_indices() const;
  int ms_min_index() const;
  int ms_max_index() const;

  /// Throws InvalidArgument when counts or spacings are out of range.
  void validate() const;
};

std::vector<int> antenna_indices(int count);

/// Planar MS pose: array centre (x, y) and heading psi w.r.t. the x-axis.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;

  double range() const { return std::hypot(x, y); }
  double polar_angle() const { return std::atan2(y, x); }
};

using ChannelMatrix = CMatrix;  // n_b x n_m, row = BS antenna, column = MS antenna

enum class PoseParam { x = 0, y = 1, psi = 2 };

/// Pose derivatives of the channel matrix, each n_b x n_m.
struct ChannelDerivatives {
  CMatrix j_x;
  CMatrix j_y;
  CMatrix j_psi;

  const CMatrix& operator[](PoseParam p) const;
};

struct GeometrySummary {
  double r = 0.0;
  double theta = 0.0;
  Complex eta;  // -(1/r + j 2pi/lambda)
  double d_m_eff = 0.0;
  double d_fresnel = 0.0;
};

/// Amplitude law used when building channels. `exact` uses the per-element
/// distance for the path loss; `uniform` uses the centre distance r for every
/// element while keeping exact phases.
enum class AmplitudeModel { exact, uniform };

double pair_distance(const Pose& pose, const ArrayConfig& cfg, int n_b_idx, int n_m_idx);

ChannelMatrix channel_matrix(const Pose& pose, const ArrayConfig& cfg,
                             AmplitudeModel model = AmplitudeModel::exact);

ChannelDerivatives channel_derivatives(const Pose& pose, const ArrayConfig& cfg,
                                       AmplitudeModel model = AmplitudeModel::exact);

/// Large-array approximations: J_x ~ eta (x/r) H, J_y ~ eta (y/r) H and
/// J_psi ~ eta d_m sin(theta - psi) H diag(ms indices).
ChannelDerivatives channel_derivatives_asymptotic(const Pose& pose, const ArrayConfig& cfg);

double fresnel_distance(const ArrayConfig& cfg);

GeometrySummary geometry_summary(const Pose& pose, const ArrayConfig& cfg);

}  // namespace nftrack
