#pragma once

#include <optional>

#include "nftrack/combiner.hpp"
#include "nftrack/geometry.hpp"
#include "nftrack/types.hpp"

namespace nftrack {

/// Uplink pilot x with E[x x^H] = (P_m / n_m) I.
struct Pilot {
  CVector symbols;
  double power = 0.0;  // P_m, W
};

/// Compressed snapshot z = Q y; y_full is kept only for diagnostics.
struct Observation {
  CVector z;
  std::optional<CVector> y_full;
};

/// B = [J_x x, J_y x, J_psi x, 0, 0], n_b x 5.
struct ObservationJacobian {
  CMatrix b;
};

/// Observation function b(s) = H(p) x and its Jacobian, evaluated together.
struct Linearization {
  CVector predicted;  // H(p) x
  ObservationJacobian jacobian;
};

Pilot generate_pilot(Rng& rng, double power_watts, int n_m);

/// n_o ~ CN(0, sigma^2 I) drawn on the full array.
CVector sample_array_noise(Rng& rng, int n_b, double noise_power);

/// z = Q (H x + n_o) for a given full-array noise realization.
Observation observe_with_noise(const ChannelMatrix& h, const Pilot& pilot, const Combiner& q,
                               const CVector& array_noise);

/// z = Q (H x + n_o), drawing n_o from rng.
Observation observe(const ChannelMatrix& h, const Pilot& pilot, const Combiner& q,
                    double noise_power, Rng& rng);

ObservationJacobian observation_jacobian(const Pose& pose, const ArrayConfig& cfg,
                                         const Pilot& pilot);

/// One pass over the array computing H(p) x and B without storing H or J.
Linearization linearize(const Pose& pose, const ArrayConfig& cfg, const Pilot& pilot);

}  // namespace nftrack
