#include <doctest.h>

#include "nftrack/errors.hpp"
#include "nftrack/observation.hpp"
#include "oracles.hpp"

using namespace nftrack;

TEST_SUITE("observation") {

TEST_CASE("pilot power and determinism") {
  Rng rng(1);
  const double pm = 0.01;
  double acc = 0.0;
  for (int i = 0; i < 10000; ++i) acc += generate_pilot(rng, pm, 25).symbols.squaredNorm();
  CHECK(acc / 10000 == doctest::Approx(pm).epsilon(0.02));

  Rng a(77), b(77);
  CHECK(generate_pilot(a, pm, 9).symbols == generate_pilot(b, pm, 9).symbols);
  CHECK_THROWS_AS(generate_pilot(rng, 0.0, 9), InvalidArgument);
}

TEST_CASE("noiseless fully digital observation") {
  const ArrayConfig c = ArrayConfig::make(15, 5, 28e9);
  Rng rng(2);
  const Pilot x = generate_pilot(rng, 1.0, c.n_m);
  const ChannelMatrix h = channel_matrix({5, 1, 0.3}, c);
  const Observation z = observe(h, x, Combiner::identity(c.n_b), 0.0, rng);
  CHECK((z.z - h * x.symbols).norm() == 0.0);
}

TEST_CASE("compressed noise energy") {
  const ArrayConfig c = ArrayConfig::make(32, 5, 28e9);
  Rng rng(3);
  CMatrix qm(3, c.n_b);
  for (int i = 0; i < qm.size(); ++i) qm(i) = (rng() & 1) ? 1.0 : -1.0;
  const Combiner q = Combiner::from_matrix(qm, true);
  const Pilot x = generate_pilot(rng, 1.0, c.n_m);
  const ChannelMatrix h = channel_matrix({5, 1, 0.3}, c);
  const double s2 = 0.3;
  const CVector clean = qm * h * x.symbols;
  double acc = 0.0;
  for (int i = 0; i < 10000; ++i) acc += (observe(h, x, q, s2, rng).z - clean).squaredNorm();
  CHECK(acc / 10000 == doctest::Approx(s2 * (qm * qm.adjoint()).trace().real()).epsilon(0.03));
}

TEST_CASE("all-ones row sums unit-variance noise") {
  const int n = 40;
  const Combiner q = Combiner::from_matrix(CMatrix::Ones(1, n), true);
  const ChannelMatrix h = CMatrix::Zero(n, 1);
  const Pilot x{CVector::Ones(1), 1.0};
  Rng rng(4);
  double acc = 0.0;
  for (int i = 0; i < 20000; ++i) acc += std::norm(observe(h, x, q, 1.0, rng).z(0));
  CHECK(acc / 20000 == doctest::Approx(n).epsilon(0.05));
}

TEST_CASE("linearity and compression consistency") {
  const ArrayConfig c = ArrayConfig::make(21, 7, 28e9);
  Rng rng(5);
  const Pilot x = generate_pilot(rng, 1.0, c.n_m);
  const ChannelMatrix h = channel_matrix({9, -2, 1.0}, c);
  CMatrix qm = CMatrix::Random(4, c.n_b);
  const Combiner q = Combiner::from_matrix(qm, false);
  const Complex alpha(0.3, -1.7);
  const CVector zero = CVector::Zero(c.n_b);
  const Pilot ax{alpha * x.symbols, x.power};
  CHECK((observe_with_noise(h, ax, q, zero).z - alpha * observe_with_noise(h, x, q, zero).z).norm() < 1e-14);

  const CVector noise = sample_array_noise(rng, c.n_b, 0.5);
  const Observation fd = observe_with_noise(h, x, Combiner::identity(c.n_b), noise);
  const Observation comp = observe_with_noise(h, x, q, noise);
  CHECK((comp.z - qm * fd.z).norm() <= 1e-12 * comp.z.norm());

  CHECK_THROWS_AS(observe_with_noise(h, x, q, CVector::Zero(3)), ShapeMismatch);
  CHECK_THROWS_AS(observe_with_noise(h, Pilot{CVector::Zero(2), 1.0}, q, zero), ShapeMismatch);
}

TEST_CASE("observation Jacobian") {
  const ArrayConfig c = ArrayConfig::make(61, 15, 28e9);
  Rng rng(6);
  const Pilot x = generate_pilot(rng, 0.01, c.n_m);
  const Pose p{12, -5, 2.0};
  const ObservationJacobian b = observation_jacobian(p, c, x);
  CHECK(b.b.col(3).isZero(0.0));
  CHECK(b.b.col(4).isZero(0.0));

  auto obs = [&](const Pose& q) { return CMatrix(channel_matrix(q, c) * x.symbols); };
  const CMatrix fx = oracle::central_difference([&](double v) { return obs({v, p.y, p.psi}); }, p.x, 1e-6);
  const CMatrix fy = oracle::central_difference([&](double v) { return obs({p.x, v, p.psi}); }, p.y, 1e-6);
  const CMatrix fp = oracle::central_difference([&](double v) { return obs({p.x, p.y, v}); }, p.psi, 1e-7);
  CHECK(oracle::relative_error(b.b.col(0), fx) < 1e-5);
  CHECK(oracle::relative_error(b.b.col(1), fy) < 1e-5);
  CHECK(oracle::relative_error(b.b.col(2), fp) < 1e-5);

  // consistent with the geometry derivatives
  const ChannelDerivatives d = channel_derivatives(p, c);
  CHECK((b.b.col(0) - d.j_x * x.symbols).norm() <= 1e-12 * b.b.col(0).norm());
  CHECK((b.b.col(2) - d.j_psi * x.symbols).norm() <= 1e-12 * b.b.col(2).norm());
  const Linearization lin = linearize(p, c, x);
  CHECK((lin.predicted - channel_matrix(p, c) * x.symbols).norm() <= 1e-12 * lin.predicted.norm());

  const Pilot zero{CVector::Zero(c.n_m), 0.0};
  CHECK(observation_jacobian(p, c, zero).b.isZero(0.0));
}

}  // TEST_SUITE
