#pragma once

#include <stdexcept>
#include <string>

namespace nftrack {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or shape violation by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Combiner whose smallest singular value is below 1e-8 of its largest.
class RankDeficientCombiner : public Error {
 public:
  using Error::Error;
};

/// Observation Jacobian too small to orient an SVD combiner.
class DegenerateJacobian : public Error {
 public:
  using Error::Error;
};

/// cos(theta) * sin(psi - theta) vanishes, so the QOM resolution is undefined.
class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

/// A covariance or information matrix could not be inverted, even after jitter.
class SingularMatrix : public Error {
 public:
  using Error::Error;
};

/// The EKF prior covariance could not be inverted; the filter has diverged.
class SingularPriorCovariance : public SingularMatrix {
 public:
  using SingularMatrix::SingularMatrix;
};

/// Scaling-law bounds requested inside the Fresnel distance.
class AssumptionViolated : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace nftrack
