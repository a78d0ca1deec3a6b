#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nftrack/combiner.hpp"
#include "nftrack/estimation.hpp"
#include "nftrack/geometry.hpp"
#include "nftrack/observation.hpp"

namespace nftrack {

enum class CombinerKind { fd, random, svd_pe, qom, mo };
enum class QomOrdering { center_first, edge_first, mixed_edge_center };

std::string to_string(CombinerKind kind);
CombinerKind parse_combiner_kind(const std::string& name);
std::string to_string(QomOrdering ordering);

struct CombinerSpec {
  CombinerKind kind = CombinerKind::fd;
  int n_rf = 3;
  std::optional<CombinerKind> mo_init;
  int mo_iters = 5;

  /// "fd", "rand", "svd_pe", "qom", "mo:rand", "mo:svd_pe", "mo:qom".
  /// fd always gets n_rf = n_b.
  static CombinerSpec parse(const std::string& name, int n_rf, int n_b);
  std::string name() const;
  void validate(int n_b) const;
};

struct QomPlan {
  int delta = 1;
  int ell0 = 0;
  int n_e = 1;
  std::vector<int> indices;
  QomOrdering ordering = QomOrdering::mixed_edge_center;
};

Combiner combiner_fd(const ArrayConfig& cfg);

/// i.i.d. Rademacher entries.
Combiner combiner_random(Rng& rng, int n_rf, int n_b);

/// Phase extraction of the top min(n_rf, 3) left singular vectors of B.
Combiner combiner_svd_pe(const ObservationJacobian& b_pred, int n_rf);

/// Pre-ceiling resolution argument lambda r / (d_b d_m |cos(theta) sin(psi - theta)| n_b).
double qom_resolution_argument(const Pose& pose, const ArrayConfig& cfg);
int qom_resolution(const Pose& pose, const ArrayConfig& cfg);

/// In-array QOM set for a given resolution, ordered by ascending index.
std::vector<int> qom_dominant_set(const ArrayConfig& cfg, int delta, int* ell0 = nullptr);

std::vector<int> order_qoms(const std::vector<int>& dominant, QomOrdering ordering);

QomPlan qom_plan_for_delta(const ArrayConfig& cfg, int delta, int n_rf, QomOrdering ordering);
QomPlan qom_plan(const Pose& pose, const ArrayConfig& cfg, int n_rf, QomOrdering ordering);

/// w_l = n_b^{-1/2} exp(-j k r_{l, n_b}) from the (possibly virtual) MS element l.
CVector qom_vector(const Pose& pose, const ArrayConfig& cfg, int ell);

Combiner combiner_qom(const Pose& pose_pred, const ArrayConfig& cfg, int n_rf,
                      QomOrdering ordering = QomOrdering::mixed_edge_center);

/// trace(D (P^{-1} + F(Q))^{-1}) with D selecting the pose block.
double mo_objective(const CMatrix& q, const Mat5& prior_info, const ObservationJacobian& b,
                    double noise_power);

/// Euclidean gradient of mo_objective under <X, Y> = Re tr(X^H Y).
CMatrix mo_gradient(const CMatrix& q, const Mat5& prior_info, const ObservationJacobian& b,
                    double noise_power);

struct MoResult {
  Combiner combiner;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int accepted_steps = 0;
  bool stalled = false;  // no backtracking step was accepted
};

MoResult combiner_mo_detailed(const Combiner& init, const Belief& prior,
                              const ObservationJacobian& b_pred, double noise_power, int iters);

Combiner combiner_mo(const Combiner& init, const Belief& prior, const ObservationJacobian& b_pred,
                     double noise_power, int iters);

}  // namespace nftrack
