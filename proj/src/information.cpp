#include "nftrack/information.hpp"

#include <array>

#include "nftrack/errors.hpp"
#include "nftrack/estimation.hpp"

namespace nftrack {

namespace {

double pilot_scale(double p_m, double noise_power, int n_m) {
  if (p_m < 0.0) throw InvalidArgument("pilot power must be >= 0");
  if (!(noise_power > 0.0)) throw InvalidArgument("noise power must be positive");
  if (n_m < 1) throw InvalidArgument("n_m must be >= 1");
  return 2.0 * p_m / (noise_power * n_m);
}

std::array<CMatrix, 3> whitened(const ChannelDerivatives& d, const Combiner& q) {
  if (d.j_x.rows() != q.cols() || d.j_y.rows() != q.cols() || d.j_psi.rows() != q.cols())
    throw ShapeMismatch("derivative rows != combiner columns");
  return {q.whiten(d.j_x), q.whiten(d.j_y), q.whiten(d.j_psi)};
}

}  // namespace

AvgFisher avg_fisher(const ChannelDerivatives& derivs, const Combiner& q, double p_m,
                     double noise_power, int n_m) {
  const double c = pilot_scale(p_m, noise_power, n_m);
  const auto w = whitened(derivs, q);
  return {c * w[0].squaredNorm(), c * w[1].squaredNorm(), c * w[2].squaredNorm()};
}

Mat3 avg_fisher_matrix(const ChannelDerivatives& derivs, const Combiner& q, double p_m,
                       double noise_power, int n_m) {
  const double c = pilot_scale(p_m, noise_power, n_m);
  const auto w = whitened(derivs, q);
  Mat3 f;
  for (int a = 0; a < 3; ++a) {
    for (int b = a; b < 3; ++b) {
      // Re tr(W_a^H W_b) = Re sum conj(W_a) .* W_b
      const double v = c * (w[a].conjugate().cwiseProduct(w[b])).sum().real();
      f(a, b) = v;
      f(b, a) = v;
    }
  }
  return f;
}

FisherBounds fisher_scaling_bounds(const Pose& pose, const ArrayConfig& cfg, double p_m,
                                   double noise_power) {
  const GeometrySummary g = geometry_summary(pose, cfg);
  if (g.r <= g.d_fresnel)
    throw AssumptionViolated("range " + std::to_string(g.r) + " m is inside the Fresnel distance " +
                             std::to_string(g.d_fresnel) + " m");
  if (!(noise_power > 0.0)) throw InvalidArgument("noise power must be positive");
  const double r2 = g.r * g.r;
  FisherBounds b;
  b.position = p_m * cfg.n_b / (2.0 * noise_power * r2);
  if (cfg.n_m > 1) {
    b.orientation = p_m * cfg.n_b * g.d_m_eff * g.d_m_eff / (24.0 * noise_power * r2) *
                    (1.0 + 2.0 / (cfg.n_m - 1));
  }
  return b;
}

BayesianFimState bayesian_fim_init(const Mat5& prior_cov0) {
  Eigen::LLT<Mat5> llt(symmetrized(prior_cov0));
  if (llt.info() != Eigen::Success) throw SingularMatrix("prior covariance is not positive definite");
  BayesianFimState s;
  s.f_b = symmetrized(llt.solve(Mat5::Identity()).eval());
  s.k = 0;
  return s;
}

Combiner CombinerPolicy::build(const Pose& pose, const ArrayConfig& cfg) const {
  auto svd = [&]() {
    if (!pilot) throw InvalidArgument("svd_pe policy needs a pilot");
    return combiner_svd_pe(observation_jacobian(pose, cfg, *pilot), n_rf);
  };
  switch (kind) {
    case CombinerKind::fd: return combiner_fd(cfg);
    case CombinerKind::random:
      if (!fixed) throw InvalidArgument("random policy needs a fixed combiner");
      return *fixed;
    case CombinerKind::svd_pe: return svd();
    case CombinerKind::qom:
      try {
        return combiner_qom(pose, cfg, n_rf);
      } catch (const DegenerateGeometry&) {
        return svd();
      }
    case CombinerKind::mo: break;
  }
  throw InvalidArgument("unsupported combiner policy '" + to_string(kind) + "'");
}

BayesianFimState bayesian_fim_step(const BayesianFimState& state, const MsState& true_state_prev,
                                   const ArrayConfig& cfg, const ProcessNoiseSpec& spec,
                                   double pilot_power, double noise_power,
                                   const CombinerPolicy& q_policy, int n_samples, Rng& rng) {
  if (n_samples < 1) throw InvalidArgument("n_samples must be >= 1");
  const Mat5 a = ctrv_jacobian(true_state_prev, spec.tau);
  const Mat5 v_pred = a * spd_inverse(state.f_b) * a.transpose() + spec.covariance();
  const Mat5 f_p = spd_inverse(v_pred);

  const MsState mean = ctrv_transition(true_state_prev, spec.tau);
  const Vec5 mean_vec = mean.vec();
  Mat5 f_d = Mat5::Zero();
  Vec5 w = Vec5::Zero();
  // Process noise moves only (v, omega), so consecutive samples often share a
  // pose; the information depends on the pose alone.
  std::optional<Pose> last_pose;
  Mat3 last_info = Mat3::Zero();
  for (int i = 0; i < n_samples; ++i) {
    w = (i % 2 == 0) ? sample_process_noise(spec, rng) : Vec5(-w);
    const Pose pose = MsState::from_vec(mean_vec + w).pose();
    if (!last_pose || pose.x != last_pose->x || pose.y != last_pose->y || pose.psi != last_pose->psi) {
      const Combiner q = q_policy.build(pose, cfg);
      last_info = avg_fisher_matrix(channel_derivatives(pose, cfg), q, pilot_power, noise_power, cfg.n_m);
      last_pose = pose;
    }
    f_d.topLeftCorner<3, 3>() += last_info;
  }
  f_d /= static_cast<double>(n_samples);

  BayesianFimState next;
  next.f_b = symmetrized(f_p + f_d);
  next.k = state.k + 1;
  return next;
}

Mat5 bcrb(const BayesianFimState& state) { return spd_inverse(state.f_b); }

}  // namespace nftrack
