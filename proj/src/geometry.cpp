#include "nftrack/geometry.hpp"

#include "nftrack/errors.hpp"

namespace nftrack {

std::vector<int> antenna_indices(int count) {
  if (count < 1) throw InvalidArgument("antenna count must be >= 1");
  const int half = count / 2;
  const int lo = -half;
  const int hi = (count % 2 == 1) ? half : half - 1;
  std::vector<int> idx;
  idx.reserve(count);
  for (int i = lo; i <= hi; ++i) idx.push_back(i);
  return idx;
}

ArrayConfig ArrayConfig::make(int n_b, int n_m, double carrier_freq_hz, std::optional<double> d_b,
                              std::optional<double> d_m) {
  ArrayConfig cfg;
  cfg.n_b = n_b;
  cfg.n_m = n_m;
  cfg.carrier_freq = carrier_freq_hz;
  cfg.wavelength = kSpeedOfLight / carrier_freq_hz;
  cfg.d_b = d_b.value_or(0.5 * cfg.wavelength);
  cfg.d_m = d_m.value_or(0.5 * cfg.wavelength);
  cfg.validate();
  return cfg;
}

void ArrayConfig::validate() const {
  if (n_b < 1 || n_m < 1) throw InvalidArgument("array sizes must be >= 1");
  if (!(carrier_freq > 0.0) || !(wavelength > 0.0))
    throw InvalidArgument("carrier frequency must be positive");
  if (!(d_b > 0.0) || !(d_m > 0.0)) throw InvalidArgument("antenna spacing must be positive");
}

std::vector<int> ArrayConfig::bs_indices() const { return antenna_indices(n_b); }
std::vector<int> ArrayConfig::ms_indices() const { return antenna_indices(n_m); }
int ArrayConfig::ms_min_index() const { return -(n_m / 2); }
int ArrayConfig::ms_max_index() const { return (n_m % 2 == 1) ? n_m / 2 : n_m / 2 - 1; }

const CMatrix& ChannelDerivatives::operator[](PoseParam p) const {
  switch (p) {
    case PoseParam::x:
      return j_x;
    case PoseParam::y:
      return j_y;
    case PoseParam::psi:
      break;
  }
  return j_psi;
}

double pair_distance(const Pose& pose, const ArrayConfig& cfg, int n_b_idx, int n_m_idx) {
  const double dx = pose.x + n_m_idx * cfg.d_m * std::cos(pose.psi);
  const double dy = pose.y + n_m_idx * cfg.d_m * std::sin(pose.psi) - n_b_idx * cfg.d_b;
  return std::hypot(dx, dy);
}

namespace {

// Visits every (BS, MS) antenna pair with the displacement MS - BS and its
// length. Row/column are matrix positions.
template <typename Fn>
void for_each_pair(const Pose& pose, const ArrayConfig& cfg, Fn&& fn) {
  const auto bs = cfg.bs_indices();
  const auto ms = cfg.ms_indices();
  const double c = std::cos(pose.psi);
  const double s = std::sin(pose.psi);
  for (int col = 0; col < cfg.n_m; ++col) {
    const double ox = pose.x + ms[col] * cfg.d_m * c;
    const double oy = pose.y + ms[col] * cfg.d_m * s;
    for (int row = 0; row < cfg.n_b; ++row) {
      const double dx = ox;
      const double dy = oy - bs[row] * cfg.d_b;
      fn(row, col, ms[col], dx, dy, std::hypot(dx, dy));
    }
  }
}

void require_valid_pose(const Pose& pose) {
  if (!(pose.range() > 0.0)) throw InvalidArgument("MS must not sit at the BS array centre");
}

}  // namespace

ChannelMatrix channel_matrix(const Pose& pose, const ArrayConfig& cfg, AmplitudeModel model) {
  require_valid_pose(pose);
  const double k = cfg.wavenumber();
  const double r0 = pose.range();
  const double amp0 = cfg.wavelength / (4.0 * kPi);
  ChannelMatrix h(cfg.n_b, cfg.n_m);
  for_each_pair(pose, cfg, [&](int row, int col, int, double, double, double r) {
    const double amp = amp0 / (model == AmplitudeModel::exact ? r : r0);
    h(row, col) = std::polar(amp, -k * r);
  });
  return h;
}

ChannelDerivatives channel_derivatives(const Pose& pose, const ArrayConfig& cfg,
                                       AmplitudeModel model) {
  require_valid_pose(pose);
  const double k = cfg.wavenumber();
  const double r0 = pose.range();
  const double amp0 = cfg.wavelength / (4.0 * kPi);
  const double c = std::cos(pose.psi);
  const double s = std::sin(pose.psi);
  ChannelDerivatives d{CMatrix(cfg.n_b, cfg.n_m), CMatrix(cfg.n_b, cfg.n_m),
                       CMatrix(cfg.n_b, cfg.n_m)};
  for_each_pair(pose, cfg, [&](int row, int col, int nm, double dx, double dy, double r) {
    const double drdx = dx / r;
    const double drdy = dy / r;
    const double drdpsi = nm * cfg.d_m * (-drdx * s + drdy * c);
    if (model == AmplitudeModel::exact) {
      // dh/dr = -(1/r + jk) h
      const Complex h = std::polar(amp0 / r, -k * r);
      const Complex dhdr = -Complex(1.0 / r, k) * h;
      d.j_x(row, col) = dhdr * drdx;
      d.j_y(row, col) = dhdr * drdy;
      d.j_psi(row, col) = dhdr * drdpsi;
    } else {
      // amplitude follows the centre distance, phase the element distance
      const Complex h = std::polar(amp0 / r0, -k * r);
      const Complex jk(0.0, k);
      d.j_x(row, col) = -(jk * drdx + pose.x / (r0 * r0)) * h;
      d.j_y(row, col) = -(jk * drdy + pose.y / (r0 * r0)) * h;
      d.j_psi(row, col) = -jk * drdpsi * h;
    }
  });
  return d;
}

ChannelDerivatives channel_derivatives_asymptotic(const Pose& pose, const ArrayConfig& cfg) {
  const GeometrySummary g = geometry_summary(pose, cfg);
  const ChannelMatrix h = channel_matrix(pose, cfg);
  const auto ms = cfg.ms_indices();
  Vector col_weights(cfg.n_m);
  for (int i = 0; i < cfg.n_m; ++i) col_weights(i) = ms[i];

  ChannelDerivatives d;
  d.j_x = g.eta * (pose.x / g.r) * h;
  d.j_y = g.eta * (pose.y / g.r) * h;
  const Complex scale = g.eta * cfg.d_m * std::sin(g.theta - pose.psi);
  d.j_psi = scale * (h * col_weights.cast<Complex>().asDiagonal());
  return d;
}

double fresnel_distance(const ArrayConfig& cfg) {
  const double d = cfg.bs_aperture();
  return 0.62 * std::sqrt(d * d * d / cfg.wavelength);
}

GeometrySummary geometry_summary(const Pose& pose, const ArrayConfig& cfg) {
  require_valid_pose(pose);
  GeometrySummary g;
  g.r = pose.range();
  g.theta = pose.polar_angle();
  g.eta = -Complex(1.0 / g.r, cfg.wavenumber());
  g.d_m_eff = cfg.ms_aperture() * std::abs(std::sin(g.theta - pose.psi));
  g.d_fresnel = fresnel_distance(cfg);
  return g;
}

}  // namespace nftrack
