#include "nftrack/estimation.hpp"

#include "nftrack/errors.hpp"

namespace nftrack {

Mat5 spd_inverse(const Mat5& m) {
  const Mat5 sym = symmetrized(m);
  Eigen::LLT<Mat5> llt(sym);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-12 * sym.trace() / 5.0;
    llt.compute(sym + jitter * Mat5::Identity());
    if (llt.info() != Eigen::Success) throw SingularMatrix("matrix not positive definite");
  }
  return symmetrized(llt.solve(Mat5::Identity()));
}

CMatrix row_space_projection(const Combiner& q) { return q.projection(); }

namespace {

void check_jacobian(const ObservationJacobian& b, const Combiner& q) {
  if (b.b.cols() != 5) throw ShapeMismatch("observation Jacobian must have 5 columns");
  if (b.b.rows() != q.cols()) throw ShapeMismatch("Jacobian rows != combiner columns");
}

}  // namespace

Vec5 score(const Observation& z, const Combiner& q, const ObservationJacobian& b,
           const CVector& predicted_obs, double noise_power) {
  check_jacobian(b, q);
  if (z.z.size() != q.rows()) throw ShapeMismatch("observation length != combiner rows");
  if (predicted_obs.size() != q.cols()) throw ShapeMismatch("predicted observation length");
  const CVector residual = z.z - q.compress(predicted_obs);
  const CMatrix wb = q.whiten(b.b);
  const CMatrix wr = q.whiten_compressed(residual);
  return (2.0 / noise_power) * (wb.adjoint() * wr).real();
}

Fim fim(const ObservationJacobian& b, const Combiner& q, double noise_power) {
  check_jacobian(b, q);
  const CMatrix wb = q.whiten(b.b);
  return symmetrized((2.0 / noise_power) * (wb.adjoint() * wb).real().eval());
}

Belief ekf_predict(const Belief& posterior, const ProcessNoiseSpec& spec) {
  const Mat5 a = ctrv_jacobian(posterior.mean, spec.tau);
  Belief prior;
  prior.mean = ctrv_transition(posterior.mean, spec.tau);
  prior.cov = symmetrized(a * posterior.cov * a.transpose() + spec.covariance());
  return prior;
}

Belief ekf_update(const Belief& prior, const Observation& z, const Combiner& q,
                  const Pilot& pilot, const ArrayConfig& cfg, double noise_power) {
  return ekf_update(prior, z, q, linearize(prior.mean.pose(), cfg, pilot), noise_power);
}

Belief ekf_update(const Belief& prior, const Observation& z, const Combiner& q,
                  const Linearization& lin, double noise_power) {
  const Fim f = fim(lin.jacobian, q, noise_power);
  const Vec5 g = score(z, q, lin.jacobian, lin.predicted, noise_power);
  if (f.isZero(0.0) && g.isZero(0.0)) return {prior.mean, symmetrized(prior.cov)};
  Belief post;
  try {
    post.cov = spd_inverse(spd_inverse(prior.cov) + f);
  } catch (const SingularMatrix& e) {
    throw SingularPriorCovariance(std::string("EKF update: ") + e.what());
  }
  post.mean = MsState::from_vec(prior.mean.vec() + post.cov * g);
  return post;
}

}  // namespace nftrack
