#pragma once

#include <optional>
#include <utility>

#include "nftrack/combiner.hpp"
#include "nftrack/combiners.hpp"
#include "nftrack/dynamics.hpp"
#include "nftrack/geometry.hpp"
#include "nftrack/observation.hpp"

namespace nftrack {

/// Pilot-averaged Fisher information per pose parameter.
struct AvgFisher {
  double f_x = 0.0;    // 1/m^2
  double f_y = 0.0;    // 1/m^2
  double f_psi = 0.0;  // 1/rad^2
};

/// F_mu = (2 P_m / (sigma^2 n_m)) ||P_Q J_mu||_F^2.
AvgFisher avg_fisher(const ChannelDerivatives& derivs, const Combiner& q, double p_m,
                     double noise_power, int n_m);

/// Full 3x3 pose block (2 P_m / (sigma^2 n_m)) Re tr(J_mu^H P_Q J_nu).
Mat3 avg_fisher_matrix(const ChannelDerivatives& derivs, const Combiner& q, double p_m,
                       double noise_power, int n_m);

struct FisherBounds {
  double position = 0.0;     // 1/m^2, bound on F_x + F_y
  double orientation = 0.0;  // 1/rad^2
};

/// Leading-order large-array values of the FD average information:
/// position P_m n_b / (2 sigma^2 r^2),
/// orientation P_m n_b D_eff^2 / (24 sigma^2 r^2) (1 + 2/(n_m - 1)).
/// Throws AssumptionViolated when r <= d_fresnel.
FisherBounds fisher_scaling_bounds(const Pose& pose, const ArrayConfig& cfg, double p_m,
                                   double noise_power);

struct BayesianFimState {
  Mat5 f_b = Mat5::Zero();
  int k = 0;
};

/// F_b,0 = P0^{-1}. Throws SingularMatrix when P0 is not positive definite.
BayesianFimState bayesian_fim_init(const Mat5& prior_cov0);

/// Combiner strategy applied at each sampled state when forming the expected
/// data information. `random` needs a fixed combiner, `svd_pe` a pilot (also
/// used as the fallback when the QOM geometry degenerates).
struct CombinerPolicy {
  CombinerKind kind = CombinerKind::fd;
  int n_rf = 3;
  std::optional<Combiner> fixed;
  std::optional<Pilot> pilot;

  Combiner build(const Pose& pose, const ArrayConfig& cfg) const;
};

/// One step of the recursion F_b,k = F_p,k + F_d,k with
/// F_p,k = (A F_b,k-1^{-1} A^T + N_s)^{-1} (A at true_state_prev) and F_d,k
/// the Monte Carlo mean over antithetic draws of s_k | s_k-1 of the
/// pilot-averaged FIM.
BayesianFimState bayesian_fim_step(const BayesianFimState& state, const MsState& true_state_prev,
                                   const ArrayConfig& cfg, const ProcessNoiseSpec& spec,
                                   double pilot_power, double noise_power,
                                   const CombinerPolicy& q_policy, int n_samples, Rng& rng);

/// F_b^{-1}, symmetrized.
Mat5 bcrb(const BayesianFimState& state);

}  // namespace nftrack
