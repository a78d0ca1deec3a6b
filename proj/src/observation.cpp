#include "nftrack/observation.hpp"

#include "nftrack/errors.hpp"

namespace nftrack {

namespace {

CVector complex_gaussian(Rng& rng, int n, double variance) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const double sd = std::sqrt(0.5 * variance);
  CVector v(n);
  for (int i = 0; i < n; ++i) {
    const double re = n01(rng);
    const double im = n01(rng);
    v(i) = Complex(sd * re, sd * im);
  }
  return v;
}

}  // namespace

Pilot generate_pilot(Rng& rng, double power_watts, int n_m) {
  if (!(power_watts > 0.0)) throw InvalidArgument("pilot power must be positive");
  if (n_m < 1) throw InvalidArgument("pilot length must be >= 1");
  return {complex_gaussian(rng, n_m, power_watts / n_m), power_watts};
}

CVector sample_array_noise(Rng& rng, int n_b, double noise_power) {
  if (noise_power < 0.0) throw InvalidArgument("noise power must be >= 0");
  return complex_gaussian(rng, n_b, noise_power);
}

Observation observe_with_noise(const ChannelMatrix& h, const Pilot& pilot, const Combiner& q,
                               const CVector& array_noise) {
  if (h.cols() != pilot.symbols.size()) throw ShapeMismatch("channel columns != pilot length");
  if (q.cols() != h.rows()) throw ShapeMismatch("combiner columns != BS antennas");
  if (array_noise.size() != h.rows()) throw ShapeMismatch("noise length != BS antennas");
  CVector y = h * pilot.symbols + array_noise;
  Observation obs;
  obs.z = q.compress(y);
  obs.y_full = std::move(y);
  return obs;
}

Observation observe(const ChannelMatrix& h, const Pilot& pilot, const Combiner& q,
                    double noise_power, Rng& rng) {
  const CVector noise = sample_array_noise(rng, static_cast<int>(h.rows()), noise_power);
  return observe_with_noise(h, pilot, q, noise);
}

Linearization linearize(const Pose& pose, const ArrayConfig& cfg, const Pilot& pilot) {
  if (pilot.symbols.size() != cfg.n_m) throw ShapeMismatch("pilot length != MS antennas");
  if (!(pose.range() > 0.0)) throw InvalidArgument("MS must not sit at the BS array centre");
  const auto bs = cfg.bs_indices();
  const auto ms = cfg.ms_indices();
  const double k = cfg.wavenumber();
  const double amp0 = cfg.wavelength / (4.0 * kPi);
  const double c = std::cos(pose.psi);
  const double s = std::sin(pose.psi);

  Linearization lin;
  lin.predicted = CVector::Zero(cfg.n_b);
  lin.jacobian.b = CMatrix::Zero(cfg.n_b, 5);
  CMatrix& jac = lin.jacobian.b;
  for (int col = 0; col < cfg.n_m; ++col) {
    const Complex xm = pilot.symbols(col);
    const double ox = pose.x + ms[col] * cfg.d_m * c;
    const double oy = pose.y + ms[col] * cfg.d_m * s;
    for (int row = 0; row < cfg.n_b; ++row) {
      const double dy = oy - bs[row] * cfg.d_b;
      const double r = std::hypot(ox, dy);
      const Complex hx = std::polar(amp0 / r, -k * r) * xm;
      const Complex dhdr_x = -Complex(1.0 / r, k) * hx;
      const double drdx = ox / r;
      const double drdy = dy / r;
      lin.predicted(row) += hx;
      jac(row, 0) += dhdr_x * drdx;
      jac(row, 1) += dhdr_x * drdy;
      jac(row, 2) += dhdr_x * (ms[col] * cfg.d_m * (-drdx * s + drdy * c));
    }
  }
  return lin;
}

ObservationJacobian observation_jacobian(const Pose& pose, const ArrayConfig& cfg,
                                         const Pilot& pilot) {
  return linearize(pose, cfg, pilot).jacobian;
}

}  // namespace nftrack
