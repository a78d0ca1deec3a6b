#include "nftrack/dynamics.hpp"

#include "nftrack/errors.hpp"

namespace nftrack {

Vec5 MsState::vec() const { return (Vec5() << x, y, psi, v, omega).finished(); }

MsState MsState::from_vec(const Vec5& s) { return {s(0), s(1), s(2), s(3), s(4)}; }

Mat5 ProcessNoiseSpec::covariance() const {
  Mat5 n = Mat5::Zero();
  n(3, 3) = (tau * sigma_v) * (tau * sigma_v);
  n(4, 4) = (tau * sigma_omega) * (tau * sigma_omega);
  return n;
}

void ProcessNoiseSpec::validate() const {
  if (sigma_v < 0.0 || sigma_omega < 0.0) throw InvalidArgument("noise std must be >= 0");
  if (!(tau > 0.0)) throw InvalidArgument("sampling interval must be positive");
}

namespace {

// Displacement factors of the CTRV flow, x' = x + v*s, y' = y + v*c, with
//   s = (sin(psi + w tau) - sin psi) / w,  c = (cos psi - cos(psi + w tau)) / w
// and their derivatives w.r.t. psi and w.
struct Arc {
  double s, c;
  double ds_dw, dc_dw;
};

double sinc(double u) {
  if (std::abs(u) < 1e-4) return 1.0 - u * u / 6.0 + u * u * u * u / 120.0;
  return std::sin(u) / u;
}

double sinc_prime(double u) {
  if (std::abs(u) < 1e-4) return -u / 3.0 + u * u * u / 30.0;
  return (u * std::cos(u) - std::sin(u)) / (u * u);
}

Arc arc(double psi, double w, double tau) {
  Arc a{};
  if (std::abs(w) < kOmegaEps) {
    const double sp = std::sin(psi), cp = std::cos(psi);
    const double t2 = tau * tau, t3 = t2 * tau;
    a.s = tau * cp - 0.5 * w * t2 * sp - w * w * t3 / 6.0 * cp;
    a.c = tau * sp + 0.5 * w * t2 * cp - w * w * t3 / 6.0 * sp;
    a.ds_dw = -0.5 * t2 * sp - w * t3 / 3.0 * cp;
    a.dc_dw = 0.5 * t2 * cp - w * t3 / 3.0 * sp;
    return a;
  }
  // product forms avoid the cancellation in sin(psi + w tau) - sin(psi)
  const double half = 0.5 * w * tau;
  const double mid = psi + half;
  const double sm = std::sin(mid), cm = std::cos(mid);
  const double sc = sinc(half), scp = sinc_prime(half);
  a.s = tau * cm * sc;
  a.c = tau * sm * sc;
  a.ds_dw = 0.5 * tau * tau * (-sm * sc + cm * scp);
  a.dc_dw = 0.5 * tau * tau * (cm * sc + sm * scp);
  return a;
}

}  // namespace

MsState ctrv_transition(const MsState& state, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  const Arc a = arc(state.psi, state.omega, tau);
  MsState next = state;
  next.x = state.x + state.v * a.s;
  next.y = state.y + state.v * a.c;
  next.psi = state.psi + state.omega * tau;
  return next;
}

Mat5 ctrv_jacobian(const MsState& state, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  const Arc a = arc(state.psi, state.omega, tau);
  Mat5 j = Mat5::Identity();
  // ds/dpsi = -c and dc/dpsi = s
  j(0, 2) = -state.v * a.c;
  j(0, 3) = a.s;
  j(0, 4) = state.v * a.ds_dw;
  j(1, 2) = state.v * a.s;
  j(1, 3) = a.c;
  j(1, 4) = state.v * a.dc_dw;
  j(2, 4) = tau;
  return j;
}

Vec5 sample_process_noise(const ProcessNoiseSpec& spec, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vec5 n = Vec5::Zero();
  n(3) = spec.tau * spec.sigma_v * n01(rng);
  n(4) = spec.tau * spec.sigma_omega * n01(rng);
  return n;
}

}  // namespace nftrack
