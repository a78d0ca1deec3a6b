#include "nftrack/combiner.hpp"

#include <string>

#include "nftrack/errors.hpp"

namespace nftrack {

Combiner Combiner::identity(int n_b) {
  if (n_b < 1) throw InvalidArgument("identity combiner needs n_b >= 1");
  Combiner c;
  c.q_ = CMatrix::Identity(n_b, n_b);
  c.identity_ = true;
  return c;
}

Combiner Combiner::from_matrix(CMatrix q, bool unit_modulus) {
  if (q.rows() < 1 || q.cols() < 1) throw InvalidArgument("empty combiner");
  if (q.rows() > q.cols()) throw RankDeficientCombiner("combiner has more rows than columns");

  Eigen::JacobiSVD<CMatrix> svd(q);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smax > 0.0) || !(smin > 1e-8 * smax)) {
    throw RankDeficientCombiner("combiner singular values " + std::to_string(smin) + " / " +
                                std::to_string(smax) + " fail the rank gate");
  }

  Combiner c;
  const CMatrix gram = q * q.adjoint();
  Eigen::LLT<CMatrix> llt(gram);
  if (llt.info() != Eigen::Success) throw RankDeficientCombiner("Gram matrix not positive definite");
  c.gram_chol_ = llt.matrixL();
  c.q_ = std::move(q);
  c.unit_modulus_ = unit_modulus;
  return c;
}

CMatrix Combiner::projection() const {
  if (identity_) return CMatrix::Identity(cols(), cols());
  const CMatrix w = whiten_compressed(q_);  // L^{-1} Q
  return w.adjoint() * w;
}

CMatrix Combiner::whiten(const CMatrix& x) const {
  if (x.rows() != cols()) throw ShapeMismatch("operand rows must equal combiner columns");
  if (identity_) return x;
  return gram_chol_.triangularView<Eigen::Lower>().solve(q_ * x);
}

CMatrix Combiner::whiten_compressed(const CMatrix& z) const {
  if (z.rows() != rows()) throw ShapeMismatch("operand rows must equal combiner rows");
  if (identity_) return z;
  return gram_chol_.triangularView<Eigen::Lower>().solve(z);
}

CVector Combiner::compress(const CVector& y) const {
  if (y.size() != cols()) throw ShapeMismatch("snapshot length must equal combiner columns");
  if (identity_) return y;
  return q_ * y;
}

}  // namespace nftrack
