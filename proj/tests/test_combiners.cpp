#include <doctest.h>

#include "nftrack/combiners.hpp"
#include "nftrack/errors.hpp"
#include "nftrack/harness.hpp"

using namespace nftrack;

namespace {

const ArrayConfig kLarge = ArrayConfig::make(275, 75, 28e9);
const Pose kPose{15, -15, 3 * kPi / 8};

double max_modulus_error(const CMatrix& q) { return (q.cwiseAbs().array() - 1.0).abs().maxCoeff(); }

ArrayConfig with_ms(int n_m) { return ArrayConfig::make(101, n_m, 28e9); }

}  // namespace

TEST_SUITE("combiners") {

TEST_CASE("fully digital") {
  const Combiner q = combiner_fd(ArrayConfig::make(16, 3, 28e9));
  CHECK(q.is_identity());
  CHECK_FALSE(q.unit_modulus());
  CHECK(row_space_projection(q).isIdentity(0.0));

  Rng rng(1);
  const ArrayConfig c = ArrayConfig::make(41, 9, 28e9);
  const ObservationJacobian b = observation_jacobian({7, 2, 0.5}, c, generate_pilot(rng, 0.01, c.n_m));
  const double fd_trace = fim(b, combiner_fd(c), 1.0).trace();
  for (int i = 0; i < 20; ++i)
    CHECK(fim(b, Combiner::from_matrix(CMatrix::Random(3, c.n_b), false), 1.0).trace() <= fd_trace * (1 + 1e-12));
}

TEST_CASE("random binary") {
  int passed = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    try {
      const Combiner q = combiner_random(rng, 3, 64);
      CHECK((q.matrix().real().cwiseAbs().array() == 1.0).all());
      CHECK(q.matrix().imag().isZero(0.0));
      ++passed;
    } catch (const RankDeficientCombiner&) {
    }
  }
  CHECK(passed == 100);
  Rng a(5), b(5);
  CHECK(combiner_random(a, 3, 64).matrix() == combiner_random(b, 3, 64).matrix());
}

TEST_CASE("SVD phase extraction") {
  Rng rng(2);
  const Pilot x = generate_pilot(rng, 0.01, kLarge.n_m);
  const ObservationJacobian b = observation_jacobian(kPose, kLarge, x);
  const Combiner q3 = combiner_svd_pe(b, 3);
  CHECK(q3.rows() == 3);
  CHECK(max_modulus_error(q3.matrix()) < 1e-12);
  CHECK(combiner_svd_pe(b, 5).rows() == 3);
  CHECK(combiner_svd_pe(b, 1).rows() == 1);
  // deterministic
  CHECK(combiner_svd_pe(b, 3).matrix() == q3.matrix());

  ObservationJacobian zero{CMatrix::Zero(kLarge.n_b, 5)};
  CHECK_THROWS_AS(combiner_svd_pe(zero, 3), DegenerateJacobian);
}

TEST_CASE("SVD-PE retains at least the random combiner's information") {
  const ScenarioConfig cfg = ScenarioConfig::full_scale();
  const double s2 = cfg.noise_watts();
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Pilot x = generate_pilot(rng, cfg.p_m_watts(), kLarge.n_m);
    const Belief pred = ekf_predict({cfg.initial_state, cfg.initial_cov}, cfg.noise);
    const ObservationJacobian b = observation_jacobian(pred.mean.pose(), kLarge, x);
    const double svd = fim(b, combiner_svd_pe(b, 3), s2).trace();
    const double rnd = fim(b, combiner_random(rng, 3, kLarge.n_b), s2).trace();
    wins += svd >= rnd ? 1 : 0;
  }
  CHECK(wins == 20);
}

TEST_CASE("QOM resolution") {
  // direct formula
  const GeometrySummary g = geometry_summary(kPose, kLarge);
  const double arg = kLarge.wavelength * g.r /
                     (kLarge.d_b * kLarge.d_m * std::abs(std::cos(g.theta) * std::sin(kPose.psi - g.theta)) * kLarge.n_b);
  const int delta = qom_resolution(kPose, kLarge);
  CHECK(delta == static_cast<int>(std::ceil(arg)));
  CHECK(delta == 45);

  // doubling n_b roughly halves it
  const ArrayConfig twice = ArrayConfig::make(550, 75, 28e9);
  CHECK(qom_resolution(kPose, twice) <= std::ceil(arg / 2 + 1));

  CHECK_THROWS_AS(qom_resolution({5, 5, kPi / 4}, kLarge), DegenerateGeometry);
  CHECK_THROWS_AS(qom_resolution({0, 5, 1.0}, kLarge), DegenerateGeometry);
}

TEST_CASE("QOM resolution against a brute-force orthogonality search") {
  // smallest spacing whose beamfocused vectors are nearly orthogonal, probed
  // around the array centre
  const int delta = qom_resolution(kPose, kLarge);
  int brute = 0;
  for (int s = 1; s <= 200 && !brute; ++s) {
    const double ip = std::abs(qom_vector(kPose, kLarge, 0).dot(qom_vector(kPose, kLarge, s)));
    if (ip < 0.3) brute = s;
  }
  MESSAGE("formula delta = " << delta << ", brute-force spacing = " << brute);
  CHECK(brute > 0);
  CHECK(brute <= delta);
  CHECK(std::abs(qom_vector(kPose, kLarge, 0).dot(qom_vector(kPose, kLarge, delta))) < 0.3);
}

TEST_CASE("QOM plans") {
  SUBCASE("full resolution, center first") {
    const QomPlan p = qom_plan_for_delta(ArrayConfig::make(101, 5, 28e9), 1, 5, QomOrdering::center_first);
    CHECK(p.indices == std::vector<int>{0, -1, 1, -2, 2});
    CHECK(p.n_e == 5);
  }
  SUBCASE("set formula with delta 2") {
    const QomPlan p = qom_plan_for_delta(with_ms(7), 2, 4, QomOrdering::center_first);
    CHECK(p.ell0 == -3);
    CHECK(p.n_e == 4);
    std::vector<int> sorted = p.indices;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{-3, -1, 1, 3});
  }
  SUBCASE("mixed ordering") {
    CHECK(order_qoms({-3, -1, 1, 3}, QomOrdering::mixed_edge_center) == std::vector<int>{-3, -1, 3, 1});
    CHECK(order_qoms({-3, -1, 1, 3}, QomOrdering::edge_first) == std::vector<int>{-3, 3, -1, 1});
    const auto m = order_qoms({-6, -4, -2, 0, 2, 4, 6}, QomOrdering::mixed_edge_center);
    for (size_t i = 0; i + 2 < m.size(); i += 2) CHECK(std::abs(m[i]) >= std::abs(m[i + 2]));
    for (size_t i = 1; i + 2 < m.size(); i += 2) CHECK(std::abs(m[i]) <= std::abs(m[i + 2]));
  }
  SUBCASE("virtual modes") {
    const QomPlan p = qom_plan_for_delta(with_ms(7), 3, 6, QomOrdering::mixed_edge_center);
    // dominant {-3, 0, 3}, then -6, 6, -9
    CHECK(p.n_e == 3);
    CHECK(p.indices == std::vector<int>{-3, 0, 3, -6, 6, -9});
    for (int v : p.indices) CHECK((v - p.indices.front()) % p.delta == 0);
  }
  SUBCASE("even MS count") {
    const QomPlan p = qom_plan_for_delta(with_ms(8), 3, 3, QomOrdering::center_first);
    // indices {-4..3}, span 7: ell0 = -4 + ceil(1/2) = -3, set {-3, 0, 3}
    CHECK(p.ell0 == -3);
    CHECK(p.n_e == 3);
  }
}

TEST_CASE("QOM vectors and combiner") {
  CHECK(qom_vector(kPose, kLarge, 7).norm() == doctest::Approx(1.0).epsilon(1e-14));
  const QomPlan plan = qom_plan(kPose, kLarge, 2, QomOrdering::center_first);
  for (size_t i = 0; i < plan.indices.size(); ++i)
    for (size_t j = i + 1; j < plan.indices.size(); ++j)
      CHECK(std::abs(qom_vector(kPose, kLarge, plan.indices[i]).dot(
                qom_vector(kPose, kLarge, plan.indices[j]))) < 0.3);

  const Combiner q = combiner_qom(kPose, kLarge, 3);
  CHECK(max_modulus_error(q.matrix()) < 1e-12);
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      CHECK(std::abs(q.matrix().row(i).dot(q.matrix().row(j))) / kLarge.n_b < 0.3);

  // proportional to the uniform-amplitude channel column in the far regime
  const ArrayConfig c = ArrayConfig::make(33, 9, 28e9);
  const double r = 10 * c.bs_aperture();
  const Pose far{r * 0.8, r * 0.6, 2.0};
  const ChannelMatrix h = channel_matrix(far, c, AmplitudeModel::uniform);
  const int col = 2;  // ms index -2
  const CVector w = qom_vector(far, c, c.ms_indices()[col]);
  CHECK(std::abs(w.dot(h.col(col))) == doctest::Approx(h.col(col).norm()).epsilon(1e-3));
}

TEST_CASE("QOM keeps most of the fully digital information") {
  const ScenarioConfig cfg = ScenarioConfig::full_scale();
  const double s2 = cfg.noise_watts();
  const Belief pred = ekf_predict({cfg.initial_state, cfg.initial_cov}, cfg.noise);
  double worst = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const ObservationJacobian b =
        observation_jacobian(pred.mean.pose(), kLarge, generate_pilot(rng, cfg.p_m_watts(), kLarge.n_m));
    const double ratio = fim(b, combiner_qom(pred.mean.pose(), kLarge, 3), s2).trace() /
                         fim(b, combiner_fd(kLarge), s2).trace();
    worst = std::min(worst, ratio);
  }
  MESSAGE("worst QOM/FD FIM trace ratio over 20 pilots: " << worst);
  CHECK(worst >= 0.5);
}

TEST_CASE("MO gradient matches central differences") {
  Rng rng(3);
  const ArrayConfig c = ArrayConfig::make(41, 9, 28e9);
  const ScenarioConfig cfg = ScenarioConfig::full_scale();
  const Pose p{12, -6, 1.0};
  const ObservationJacobian b = observation_jacobian(p, c, generate_pilot(rng, 0.01, c.n_m));
  const Mat5 info = spd_inverse(cfg.initial_cov);
  const double s2 = 1e-10;
  const CMatrix q = combiner_random(rng, 3, c.n_b).matrix();
  const CMatrix g = mo_gradient(q, info, b, s2);
  for (int trial = 0; trial < 5; ++trial) {
    const CMatrix dir = CMatrix::Random(q.rows(), q.cols());
    const double h = 1e-6 * q.norm() / dir.norm();
    const double num = (mo_objective(q + h * dir, info, b, s2) - mo_objective(q - h * dir, info, b, s2)) / (2 * h);
    const double ana = (g.adjoint() * dir).trace().real();
    CHECK(ana == doctest::Approx(num).epsilon(1e-5));
  }
}

TEST_CASE("MO descends from random and barely moves QOM") {
  const ScenarioConfig cfg = ScenarioConfig::full_scale();
  const double s2 = cfg.noise_watts();
  const Belief prior = ekf_predict({cfg.initial_state, cfg.initial_cov}, cfg.noise);
  int improved = 0;
  double worst_qom = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const ObservationJacobian b =
        observation_jacobian(prior.mean.pose(), kLarge, generate_pilot(rng, cfg.p_m_watts(), kLarge.n_m));
    const MoResult r = combiner_mo_detailed(combiner_random(rng, 3, kLarge.n_b), prior, b, s2, 5);
    CHECK(r.final_objective <= r.initial_objective);
    CHECK(max_modulus_error(r.combiner.matrix()) < 1e-9);
    improved += r.final_objective < r.initial_objective ? 1 : 0;

    const MoResult rq = combiner_mo_detailed(combiner_qom(prior.mean.pose(), kLarge, 3), prior, b, s2, 5);
    worst_qom = std::max(worst_qom, (rq.initial_objective - rq.final_objective) / rq.initial_objective);
  }
  CHECK(improved >= 18);
  MESSAGE("largest relative MO improvement from QOM: " << worst_qom);
  CHECK(worst_qom < 0.01);
}

TEST_CASE("combiner spec parsing") {
  const CombinerSpec fd = CombinerSpec::parse("fd", 3, 101);
  CHECK(fd.n_rf == 101);
  const CombinerSpec mo = CombinerSpec::parse("mo:qom", 3, 101);
  CHECK(mo.kind == CombinerKind::mo);
  CHECK(*mo.mo_init == CombinerKind::qom);
  CHECK(mo.name() == "mo:qom");
  CHECK_THROWS_AS(CombinerSpec::parse("bogus", 3, 101), ConfigError);
  CHECK_THROWS_AS(CombinerSpec::parse("svd_pe", 101, 101), ConfigError);
  CHECK_THROWS_AS(CombinerSpec::parse("mo:fd", 3, 101), ConfigError);
}

}  // TEST_SUITE
