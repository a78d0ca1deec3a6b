#include "nftrack/combiners.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <numeric>

#include "nftrack/errors.hpp"

namespace nftrack {

std::string to_string(CombinerKind kind) {
  switch (kind) {
    case CombinerKind::fd: return "fd";
    case CombinerKind::random: return "rand";
    case CombinerKind::svd_pe: return "svd_pe";
    case CombinerKind::qom: return "qom";
    case CombinerKind::mo: return "mo";
  }
  return "?";
}

CombinerKind parse_combiner_kind(const std::string& name) {
  if (name == "fd") return CombinerKind::fd;
  if (name == "rand" || name == "random") return CombinerKind::random;
  if (name == "svd_pe" || name == "svdpe") return CombinerKind::svd_pe;
  if (name == "qom") return CombinerKind::qom;
  if (name == "mo") return CombinerKind::mo;
  throw ConfigError("unknown combiner kind '" + name + "'");
}

std::string to_string(QomOrdering ordering) {
  switch (ordering) {
    case QomOrdering::center_first: return "center_first";
    case QomOrdering::edge_first: return "edge_first";
    case QomOrdering::mixed_edge_center: return "mixed_edge_center";
  }
  return "?";
}

CombinerSpec CombinerSpec::parse(const std::string& name, int n_rf, int n_b) {
  CombinerSpec spec;
  const auto colon = name.find(':');
  if (colon != std::string::npos) {
    if (name.substr(0, colon) != "mo") throw ConfigError("only mo takes an init: '" + name + "'");
    spec.kind = CombinerKind::mo;
    spec.mo_init = parse_combiner_kind(name.substr(colon + 1));
    if (*spec.mo_init == CombinerKind::mo || *spec.mo_init == CombinerKind::fd)
      throw ConfigError("mo init must be rand, svd_pe or qom");
  } else {
    spec.kind = parse_combiner_kind(name);
    if (spec.kind == CombinerKind::mo) spec.mo_init = CombinerKind::random;
  }
  spec.n_rf = spec.kind == CombinerKind::fd ? n_b : n_rf;
  spec.validate(n_b);
  return spec;
}

std::string CombinerSpec::name() const {
  if (kind == CombinerKind::mo) return "mo:" + to_string(mo_init.value_or(CombinerKind::random));
  return to_string(kind);
}

void CombinerSpec::validate(int n_b) const {
  if (kind == CombinerKind::fd) {
    if (n_rf != n_b) throw ConfigError("fd combiner requires n_rf = n_b");
    return;
  }
  if (n_rf < 1 || n_rf >= n_b) throw ConfigError("n_rf must satisfy 1 <= n_rf < n_b");
  if (kind == CombinerKind::mo && mo_iters < 1) throw ConfigError("mo_iters must be >= 1");
}

Combiner combiner_fd(const ArrayConfig& cfg) { return Combiner::identity(cfg.n_b); }

Combiner combiner_random(Rng& rng, int n_rf, int n_b) {
  if (n_rf < 1 || n_rf > n_b) throw InvalidArgument("random combiner needs 1 <= n_rf <= n_b");
  CMatrix q(n_rf, n_b);
  // Column-major fill, one top bit per entry.
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    for (Eigen::Index i = 0; i < q.rows(); ++i) q(i, j) = (rng() >> 63) ? 1.0 : -1.0;
  return Combiner::from_matrix(std::move(q), true);
}

namespace {

CVector unit_phases(const CVector& v) {
  CVector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i));
    out(i) = a > 0.0 ? v(i) / a : Complex(1.0, 0.0);
  }
  return out;
}

CMatrix unit_phases(const CMatrix& m) {
  CMatrix out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double a = std::abs(m(i, j));
      out(i, j) = a > 0.0 ? m(i, j) / a : Complex(1.0, 0.0);
    }
  }
  return out;
}

bool lexicographic_less(const CVector& a, const CVector& b) {
  auto rnd = [](double v) { return std::round(v * 1e9); };
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double ar = rnd(a(i).real()), br = rnd(b(i).real());
    if (ar != br) return ar < br;
    const double ai = rnd(a(i).imag()), bi = rnd(b(i).imag());
    if (ai != bi) return ai < bi;
  }
  return false;
}

}  // namespace

Combiner combiner_svd_pe(const ObservationJacobian& b_pred, int n_rf) {
  if (b_pred.b.cols() != 5) throw ShapeMismatch("observation Jacobian must have 5 columns");
  if (n_rf < 1) throw InvalidArgument("n_rf must be >= 1");
  const CMatrix b3 = b_pred.b.leftCols(3);
  if (b3.norm() < 1e-15) throw DegenerateJacobian("observation Jacobian is numerically zero");

  Eigen::JacobiSVD<CMatrix> svd(b3, Eigen::ComputeThinU);
  const Vector sv = svd.singularValues();
  CMatrix u = svd.matrixU();
  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    Eigen::Index imax = 0;
    u.col(c).cwiseAbs().maxCoeff(&imax);
    const Complex pivot = u(imax, c);
    u.col(c) *= std::conj(pivot) / std::abs(pivot);
  }

  std::vector<int> order(static_cast<size_t>(sv.size()));
  std::iota(order.begin(), order.end(), 0);
  const double tie_tol = 1e-12 * sv(0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (std::abs(sv(a) - sv(b)) > tie_tol) return sv(a) > sv(b);
    return lexicographic_less(u.col(a), u.col(b));
  });

  const int keep = std::min<int>(n_rf, static_cast<int>(sv.size()));
  CMatrix q(keep, b3.rows());
  for (int i = 0; i < keep; ++i) q.row(i) = unit_phases(CVector(u.col(order[i]).conjugate())).transpose();
  return Combiner::from_matrix(std::move(q), true);
}

double qom_resolution_argument(const Pose& pose, const ArrayConfig& cfg) {
  const double r = pose.range();
  if (!(r > 0.0)) throw InvalidArgument("MS must not sit at the BS array centre");
  const double theta = pose.polar_angle();
  const double proj = std::cos(theta) * std::sin(pose.psi - theta);
  if (std::abs(proj) < 1e-12) throw DegenerateGeometry("cos(theta) sin(psi - theta) vanishes");
  return cfg.wavelength * r / (cfg.d_b * cfg.d_m * std::abs(proj) * cfg.n_b);
}

int qom_resolution(const Pose& pose, const ArrayConfig& cfg) {
  const double arg = qom_resolution_argument(pose, cfg);
  const double delta = std::ceil(arg);
  if (delta > std::numeric_limits<int>::max() / 4) throw DegenerateGeometry("QOM resolution overflows");
  return std::max(1, static_cast<int>(delta));
}

std::vector<int> qom_dominant_set(const ArrayConfig& cfg, int delta, int* ell0) {
  if (delta < 1) throw InvalidArgument("QOM resolution must be >= 1");
  const int lo = cfg.ms_min_index();
  const int span = cfg.ms_max_index() - lo;
  const int start = lo + (span % delta + 1) / 2;
  const int n_e = span / delta + 1;
  std::vector<int> set(static_cast<size_t>(n_e));
  for (int i = 0; i < n_e; ++i) set[static_cast<size_t>(i)] = start + i * delta;
  if (ell0) *ell0 = start;
  return set;
}

std::vector<int> order_qoms(const std::vector<int>& dominant, QomOrdering ordering) {
  // |l| ascending, negative first on ties.
  auto center_less = [](int a, int b) {
    if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
    return a < b;
  };
  auto edge_less = [](int a, int b) {
    if (std::abs(a) != std::abs(b)) return std::abs(a) > std::abs(b);
    return a < b;
  };
  std::vector<int> c = dominant, e = dominant;
  std::sort(c.begin(), c.end(), center_less);
  std::sort(e.begin(), e.end(), edge_less);
  if (ordering == QomOrdering::center_first) return c;
  if (ordering == QomOrdering::edge_first) return e;

  std::vector<int> out;
  out.reserve(dominant.size());
  auto taken = [&](int v) { return std::find(out.begin(), out.end(), v) != out.end(); };
  size_t ie = 0, ic = 0;
  bool from_edge = true;
  while (out.size() < dominant.size()) {
    auto& list = from_edge ? e : c;
    auto& pos = from_edge ? ie : ic;
    while (pos < list.size() && taken(list[pos])) ++pos;
    if (pos < list.size()) out.push_back(list[pos++]);
    from_edge = !from_edge;
  }
  return out;
}

QomPlan qom_plan_for_delta(const ArrayConfig& cfg, int delta, int n_rf, QomOrdering ordering) {
  if (n_rf < 1) throw InvalidArgument("n_rf must be >= 1");
  QomPlan plan;
  plan.delta = delta;
  plan.ordering = ordering;
  const std::vector<int> dominant = qom_dominant_set(cfg, delta, &plan.ell0);
  plan.n_e = static_cast<int>(dominant.size());
  plan.indices = order_qoms(dominant, ordering);

  // Virtual modes beyond the array in center-first order; for a symmetric
  // dominant set this alternates sides starting from the negative one.
  const int missing = n_rf - plan.n_e;
  if (missing > 0) {
    std::vector<int> virt;
    for (int step = 1; step <= missing; ++step) {
      virt.push_back(dominant.front() - step * delta);
      virt.push_back(dominant.back() + step * delta);
    }
    virt = order_qoms(virt, QomOrdering::center_first);
    plan.indices.insert(plan.indices.end(), virt.begin(), virt.begin() + missing);
  }
  plan.indices.resize(static_cast<size_t>(n_rf));
  return plan;
}

QomPlan qom_plan(const Pose& pose, const ArrayConfig& cfg, int n_rf, QomOrdering ordering) {
  return qom_plan_for_delta(cfg, qom_resolution(pose, cfg), n_rf, ordering);
}

CVector qom_vector(const Pose& pose, const ArrayConfig& cfg, int ell) {
  const auto bs = cfg.bs_indices();
  const double k = cfg.wavenumber();
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.n_b));
  CVector w(cfg.n_b);
  for (int i = 0; i < cfg.n_b; ++i)
    w(i) = std::polar(scale, -k * pair_distance(pose, cfg, bs[static_cast<size_t>(i)], ell));
  return w;
}

Combiner combiner_qom(const Pose& pose_pred, const ArrayConfig& cfg, int n_rf, QomOrdering ordering) {
  const QomPlan plan = qom_plan(pose_pred, cfg, n_rf, ordering);
  const double root = std::sqrt(static_cast<double>(cfg.n_b));
  CMatrix q(n_rf, cfg.n_b);
  for (int i = 0; i < n_rf; ++i)
    q.row(i) = root * qom_vector(pose_pred, cfg, plan.indices[static_cast<size_t>(i)]).adjoint();
  return Combiner::from_matrix(std::move(q), true);
}

namespace {

constexpr double kArmijo = 1e-4;

struct MoEval {
  bool ok = false;
  double value = std::numeric_limits<double>::infinity();
  Mat5 s;  // (P^{-1} + F)^{-1}
};

MoEval mo_evaluate(const CMatrix& q, const Mat5& prior_info, const CMatrix& b, double noise_power) {
  MoEval out;
  Eigen::LLT<CMatrix> gram(q * q.adjoint());
  if (gram.info() != Eigen::Success) return out;
  const CMatrix w = gram.matrixL().solve(q * b);
  const Mat5 f = (2.0 / noise_power) * (w.adjoint() * w).real();
  Eigen::LLT<Mat5> info(symmetrized(prior_info + f));
  if (info.info() != Eigen::Success) return out;
  out.s = symmetrized(info.solve(Mat5::Identity()).eval());
  out.value = out.s.topLeftCorner<3, 3>().trace();
  out.ok = std::isfinite(out.value);
  return out;
}

void check_mo_inputs(const CMatrix& q, const ObservationJacobian& b, double noise_power) {
  if (b.b.cols() != 5) throw ShapeMismatch("observation Jacobian must have 5 columns");
  if (q.cols() != b.b.rows()) throw ShapeMismatch("combiner columns != Jacobian rows");
  if (!(noise_power > 0.0)) throw InvalidArgument("noise power must be positive");
}

}  // namespace

double mo_objective(const CMatrix& q, const Mat5& prior_info, const ObservationJacobian& b,
                    double noise_power) {
  check_mo_inputs(q, b, noise_power);
  return mo_evaluate(q, prior_info, b.b, noise_power).value;
}

CMatrix mo_gradient(const CMatrix& q, const Mat5& prior_info, const ObservationJacobian& b,
                    double noise_power) {
  check_mo_inputs(q, b, noise_power);
  const MoEval ev = mo_evaluate(q, prior_info, b.b, noise_power);
  if (!ev.ok) throw SingularMatrix("MO objective undefined at this combiner");
  Mat5 d = Mat5::Zero();
  d.topLeftCorner<3, 3>().setIdentity();
  const Mat5 m = ev.s * d * ev.s;
  Eigen::LLT<CMatrix> gram(q * q.adjoint());
  const CMatrix y = gram.solve(q * b.b);  // G^{-1} Q B
  const CMatrix resid = b.b.adjoint() - y.adjoint() * q;
  return (-4.0 / noise_power) * (y * m.cast<Complex>() * resid);
}

MoResult combiner_mo_detailed(const Combiner& init, const Belief& prior,
                              const ObservationJacobian& b_pred, double noise_power, int iters) {
  if (iters < 1) throw InvalidArgument("MO needs at least one iteration");
  if (!init.unit_modulus()) throw InvalidArgument("MO init must be unit-modulus");
  check_mo_inputs(init.matrix(), b_pred, noise_power);
  const Mat5 prior_info = spd_inverse(prior.cov);

  CMatrix q = init.matrix();
  MoEval cur = mo_evaluate(q, prior_info, b_pred.b, noise_power);
  MoResult res{init, cur.value, cur.value, 0, false};
  if (!cur.ok) {
    res.stalled = true;
    return res;
  }
  CMatrix best = q;
  double best_val = cur.value;

  for (int it = 0; it < iters; ++it) {
    const CMatrix g = mo_gradient(q, prior_info, b_pred, noise_power);
    const CMatrix radial = (g.array() * q.array().conjugate()).real().cast<Complex>() * q.array();
    const CMatrix rg = g - radial;
    const double gnorm = rg.norm();
    if (!(gnorm > 0.0)) break;
    double t = 1e-2 * q.norm() / gnorm;
    bool accepted = false;
    for (int bt = 0; bt <= 10; ++bt, t *= 0.5) {
      const CMatrix cand = unit_phases(CMatrix(q - t * rg));
      const MoEval ev = mo_evaluate(cand, prior_info, b_pred.b, noise_power);
      if (ev.ok && ev.value <= cur.value - kArmijo * t * gnorm * gnorm) {
        q = cand;
        cur = ev;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    ++res.accepted_steps;
    if (cur.value < best_val) {
      best_val = cur.value;
      best = q;
    }
  }

  res.stalled = res.accepted_steps == 0;
  if (res.stalled) return res;
  try {
    res.combiner = Combiner::from_matrix(best, true);
    res.final_objective = best_val;
  } catch (const RankDeficientCombiner&) {
    res.stalled = true;
  }
  return res;
}

Combiner combiner_mo(const Combiner& init, const Belief& prior, const ObservationJacobian& b_pred,
                     double noise_power, int iters) {
  return combiner_mo_detailed(init, prior, b_pred, noise_power, iters).combiner;
}

}  // namespace nftrack
