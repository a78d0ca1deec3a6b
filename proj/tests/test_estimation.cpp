#include <doctest.h>

#include "nftrack/errors.hpp"
#include "nftrack/estimation.hpp"

using namespace nftrack;

namespace {

CMatrix rademacher(Rng& rng, int rows, int cols) {
  CMatrix q(rows, cols);
  for (int i = 0; i < q.size(); ++i) q(i) = (rng() >> 63) ? 1.0 : -1.0;
  return q;
}

Mat5 default_p0() {
  return Vec5(0.05 * 0.05, 0.05 * 0.05, 0.001 * 0.001, 1.0, 1e-4).asDiagonal();
}

// Straight evaluation of the update with explicit inverses.
Belief update_reference(const Belief& prior, const CVector& z, const CMatrix& q, const CMatrix& b,
                        const CVector& pred, double s2) {
  const CMatrix gi = (q * q.adjoint()).inverse();
  Vec5 g;
  Mat5 f;
  for (int i = 0; i < 5; ++i) {
    g(i) = (2.0 / s2) * (b.col(i).adjoint() * q.adjoint() * gi * (z - q * pred))(0).real();
    for (int j = 0; j < 5; ++j)
      f(i, j) = (2.0 / s2) * (b.col(i).adjoint() * q.adjoint() * gi * q * b.col(j))(0).real();
  }
  Belief post;
  post.cov = (prior.cov.inverse() + f).inverse();
  post.mean = MsState::from_vec(prior.mean.vec() + post.cov * g);
  return post;
}

}  // namespace

TEST_SUITE("estimation") {

TEST_CASE("projection laws") {
  CHECK(row_space_projection(Combiner::identity(6)).isIdentity(0.0));

  const int n = 9;
  const CMatrix ones = row_space_projection(Combiner::from_matrix(CMatrix::Ones(1, n), true));
  CHECK((ones - CMatrix::Constant(n, n, 1.0 / n)).norm() < 1e-14);

  Rng rng(8);
  const Combiner q = Combiner::from_matrix(rademacher(rng, 3, 32), true);
  const CMatrix p = row_space_projection(q);
  CHECK((p * p - p).norm() < 1e-9);
  CHECK((p.adjoint() - p).norm() < 1e-9);
  CHECK(std::abs(p.trace() - 3.0) < 1e-9);

  CMatrix dup = CMatrix::Ones(2, 5);
  CHECK_THROWS_AS(Combiner::from_matrix(dup, true), RankDeficientCombiner);
}

TEST_CASE("score and FIM structure") {
  const ArrayConfig c = ArrayConfig::make(31, 9, 28e9);
  Rng rng(9);
  const Pilot x = generate_pilot(rng, 0.01, c.n_m);
  const Pose p{6, 3, 0.7};
  const Linearization lin = linearize(p, c, x);
  const Combiner q = Combiner::from_matrix(rademacher(rng, 3, c.n_b), true);
  const double s2 = 1e-10;

  const Observation exact{q.compress(lin.predicted), std::nullopt};
  CHECK(score(exact, q, lin.jacobian, lin.predicted, s2).norm() < 1e-20);

  const Observation noisy = observe(channel_matrix(p, c), x, q, s2, rng);
  const Vec5 g = score(noisy, q, lin.jacobian, lin.predicted, s2);
  CHECK(g(3) == 0.0);
  CHECK(g(4) == 0.0);

  const Fim f_fd = fim(lin.jacobian, Combiner::identity(c.n_b), s2);
  const Mat5 ref = (2.0 / s2) * (lin.jacobian.b.adjoint() * lin.jacobian.b).real();
  CHECK((f_fd - ref).norm() <= 1e-12 * ref.norm());
  const Fim f_q = fim(lin.jacobian, q, s2);
  CHECK(f_q.row(3).isZero(0.0));
  CHECK(f_q.col(4).isZero(0.0));
  CHECK(f_q.trace() <= f_fd.trace());
}

TEST_CASE("zero-mean score at the true state") {
  const ArrayConfig c = ArrayConfig::make(31, 9, 28e9);
  Rng rng(10);
  const Pilot x = generate_pilot(rng, 0.01, c.n_m);
  const Pose p{6, 3, 0.7};
  const Linearization lin = linearize(p, c, x);
  const Combiner q = Combiner::from_matrix(rademacher(rng, 4, c.n_b), true);
  const double s2 = 1e-10;
  const ChannelMatrix h = channel_matrix(p, c);
  const int n = 10000;
  Eigen::Matrix<double, 3, 1> mean = Eigen::Matrix<double, 3, 1>::Zero();
  Mat3 sq = Mat3::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec5 g = score(observe(h, x, q, s2, rng), q, lin.jacobian, lin.predicted, s2);
    mean += g.head<3>();
    sq += g.head<3>() * g.head<3>().transpose();
  }
  mean /= n;
  sq /= n;
  for (int i = 0; i < 3; ++i) CHECK(std::abs(mean(i)) < 4 * std::sqrt(sq(i, i) / n));
}

TEST_CASE("nested row spaces never lose information") {
  const ArrayConfig c = ArrayConfig::make(31, 9, 28e9);
  Rng rng(11);
  const Pilot x = generate_pilot(rng, 0.01, c.n_m);
  const ObservationJacobian b = observation_jacobian({6, 3, 0.7}, c, x);
  for (int i = 0; i < 50; ++i) {
    const CMatrix big = rademacher(rng, 4, c.n_b);
    const Combiner small = Combiner::from_matrix(big.topRows(2), true);
    const Combiner large = Combiner::from_matrix(big, true);
    CHECK(fim(b, small, 1.0).trace() <= fim(b, large, 1.0).trace() * (1 + 1e-12));
  }
}

TEST_CASE("prediction") {
  const ProcessNoiseSpec none{0, 0, 0.02};
  Belief still{{1, 2, 0.3, 0, 0}, default_p0()};
  const Belief pred = ekf_predict(still, none);
  Mat5 a = Mat5::Identity();
  a(0, 3) = 0.02 * std::cos(0.3);
  a(1, 3) = 0.02 * std::sin(0.3);
  a(2, 4) = 0.02;
  CHECK((pred.cov - a * still.cov * a.transpose()).norm() < 1e-18);

  const ProcessNoiseSpec spec{2.0, 0.1, 0.02};
  Belief start{{15, -15, 3 * kPi / 8, 10, 0.1}, default_p0()};
  const Belief p1 = ekf_predict(start, spec);
  const Mat5 ja = ctrv_jacobian(start.mean, 0.02);
  const Mat5 hand = ja * start.cov * ja.transpose() + spec.covariance();
  CHECK((p1.cov - hand).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((p1.cov - p1.cov.transpose()).norm() == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Mat5>(p1.cov).eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("update") {
  const ArrayConfig c = ArrayConfig::make(101, 25, 28e9);
  Rng rng(12);
  const Pilot x = generate_pilot(rng, 0.01, c.n_m);
  const Belief prior{{15, -15, 3 * kPi / 8, 10, 0.1}, default_p0()};
  const MsState truth{15.02, -14.97, 3 * kPi / 8 + 5e-4, 10, 0.1};
  const double s2 = dbm_to_watts(-70);
  const Combiner fd = Combiner::identity(c.n_b);
  const Observation z = observe(channel_matrix(truth.pose(), c), x, fd, s2, rng);

  SUBCASE("matches an explicit evaluation") {
    const Belief post = ekf_update(prior, z, fd, x, c, s2);
    const Linearization lin = linearize(prior.mean.pose(), c, x);
    const Belief ref = update_reference(prior, z.z, CMatrix::Identity(c.n_b, c.n_b), lin.jacobian.b,
                                        lin.predicted, s2);
    CHECK((post.mean.vec() - ref.mean.vec()).norm() < 1e-9);
    CHECK((post.cov - ref.cov).norm() <= 1e-8 * ref.cov.norm());
    // Loewner order
    CHECK(Eigen::SelfAdjointEigenSolver<Mat5>(prior.cov - post.cov).eigenvalues().minCoeff() >= -1e-10);
  }
  SUBCASE("compressed combiner matches an explicit evaluation") {
    const CMatrix qm = rademacher(rng, 3, c.n_b);
    const Combiner q = Combiner::from_matrix(qm, true);
    const Observation zq = observe(channel_matrix(truth.pose(), c), x, q, s2, rng);
    const Belief post = ekf_update(prior, zq, q, x, c, s2);
    const Linearization lin = linearize(prior.mean.pose(), c, x);
    const Belief ref = update_reference(prior, zq.z, qm, lin.jacobian.b, lin.predicted, s2);
    CHECK((post.mean.vec() - ref.mean.vec()).norm() < 1e-9);
    CHECK((post.cov - ref.cov).norm() <= 1e-8 * ref.cov.norm());
  }
  SUBCASE("no information keeps the prior") {
    const Pilot zero{CVector::Zero(c.n_m), 0.0};
    const Observation z0 = observe(channel_matrix(truth.pose(), c), zero, fd, 0.0, rng);
    const Belief post = ekf_update(prior, z0, fd, zero, c, s2);
    CHECK(post.mean.vec() == prior.mean.vec());
    CHECK(post.cov == prior.cov);
  }
  SUBCASE("tiny noise dominates the prior") {
    const double tiny = 1e-6 * s2;
    const Belief post = ekf_update(prior, z, fd, x, c, tiny);
    CHECK(post.cov.topLeftCorner<3, 3>().trace() * 10 < prior.cov.topLeftCorner<3, 3>().trace());
  }
}

TEST_CASE("Cholesky jitter policy") {
  Mat5 spd = Mat5::Identity();
  CHECK((spd_inverse(spd) - spd).norm() == 0.0);
  Mat5 bad = -Mat5::Identity();
  CHECK_THROWS_AS(spd_inverse(bad), SingularMatrix);
  const Belief broken{{15, -15, 0, 1, 0}, -Mat5::Identity()};
  const ArrayConfig c = ArrayConfig::make(11, 3, 28e9);
  Rng rng(1);
  const Pilot x = generate_pilot(rng, 1.0, c.n_m);
  const Observation z = observe(channel_matrix({15, -15, 0}, c), x, Combiner::identity(c.n_b), 1e-9, rng);
  CHECK_THROWS_AS(ekf_update(broken, z, Combiner::identity(c.n_b), x, c, 1e-9), SingularPriorCovariance);
}

}  // TEST_SUITE
