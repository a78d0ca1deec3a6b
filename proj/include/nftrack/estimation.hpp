#pragma once

#include "nftrack/combiner.hpp"
#include "nftrack/dynamics.hpp"
#include "nftrack/observation.hpp"

namespace nftrack {

/// State estimate with its 5x5 error covariance (prior or posterior).
struct Belief {
  MsState mean;
  Mat5 cov = Mat5::Identity();
};

using Fim = Mat5;

/// Inverts a symmetric positive definite 5x5 matrix through Cholesky on its
/// symmetrized copy. On failure retries once with 1e-12 * trace / 5 added to
/// the diagonal, then throws SingularMatrix.
Mat5 spd_inverse(const Mat5& m);

CMatrix row_space_projection(const Combiner& q);

/// g = (2/sigma^2) Re{ B^H Q^H (Q Q^H)^{-1} (z - Q b(s)) }.
Vec5 score(const Observation& z, const Combiner& q, const ObservationJacobian& b,
           const CVector& predicted_obs, double noise_power);

/// F = (2/sigma^2) Re{ B^H P_Q B }.
Fim fim(const ObservationJacobian& b, const Combiner& q, double noise_power);

/// Propagates a posterior through the CTRV model: mean a(s), covariance
/// A P A^T + N_s.
Belief ekf_predict(const Belief& posterior, const ProcessNoiseSpec& spec);

/// Information-form update linearized at the prior mean:
/// P+ = (P^{-1} + F)^{-1}, s+ = s + P+ g.
/// Throws SingularPriorCovariance when P or P^{-1} + F cannot be inverted.
Belief ekf_update(const Belief& prior, const Observation& z, const Combiner& q,
                  const Pilot& pilot, const ArrayConfig& cfg, double noise_power);

/// Same update with the linearization at the prior mean already computed.
Belief ekf_update(const Belief& prior, const Observation& z, const Combiner& q,
                  const Linearization& lin, double noise_power);

}  // namespace nftrack
