#pragma once

#include "nftrack/types.hpp"

namespace nftrack {

/// Analog combining matrix Q (n_rf x n_b) together with a Cholesky factor of
/// its Gram matrix Q Q^H. All projection-based quantities go through the
/// whitened product L^{-1} Q X (Q Q^H = L L^H), so the n_b x n_b projector is
/// only formed when asked for.
class Combiner {
 public:
  /// Fully digital combiner Q = I.
  static Combiner identity(int n_b);

  /// Validates the rank gate (smallest singular value > 1e-8 * largest) and
  /// factors the Gram matrix. Throws RankDeficientCombiner.
  static Combiner from_matrix(CMatrix q, bool unit_modulus);

  const CMatrix& matrix() const { return q_; }
  int rows() const { return static_cast<int>(q_.rows()); }
  int cols() const { return static_cast<int>(q_.cols()); }
  bool unit_modulus() const { return unit_modulus_; }
  bool is_identity() const { return identity_; }

  /// Q^H (Q Q^H)^{-1} Q.
  CMatrix projection() const;

  /// L^{-1} Q x for an n_b-row operand.
  CMatrix whiten(const CMatrix& x) const;

  /// L^{-1} z for a compressed (n_rf-row) operand.
  CMatrix whiten_compressed(const CMatrix& z) const;

  /// Q y.
  CVector compress(const CVector& y) const;

 private:
  Combiner() = default;

  CMatrix q_;
  CMatrix gram_chol_;  // lower-triangular L
  bool unit_modulus_ = false;
  bool identity_ = false;
};

}  // namespace nftrack
