#include "olt/types.hpp"

#include <cmath>

namespace olt {

double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

double watts_to_dbm(double watts) {
  if (!(watts > 0.0))
    throw std::domain_error("watts_to_dbm: power must be > 0 W");
  return 10.0 * std::log10(watts / 1e-3);
}

double beta2_from_dispersion(double d_ps_nm_km, double center_frequency_hz) {
  const double lambda = wavelength_m(center_frequency_hz);
  const double d_si = d_ps_nm_km * 1e-6; // s/m^2
  const double beta2_si = -d_si * lambda * lambda /
                          (2.0 * M_PI * constants::speed_of_light_m_s);
  return beta2_si * 1e27; // s^2/m -> ps^2/km
}

double dispersion_from_beta2(double beta2_ps2_km, double center_frequency_hz) {
  const double lambda = wavelength_m(center_frequency_hz);
  const double beta2_si = beta2_ps2_km * 1e-27;
  const double d_si = -beta2_si * 2.0 * M_PI * constants::speed_of_light_m_s /
                      (lambda * lambda);
  return d_si * 1e6;
}

void Waveform::validate() const {
  if (x.size() != y.size())
    throw std::invalid_argument("Waveform: x/y length mismatch");
  if (x.size() < 2)
    throw std::invalid_argument("Waveform: need at least 2 samples");
  if (!(sample_rate_hz > 0.0))
    throw std::invalid_argument("Waveform: sample_rate must be > 0");
  const double px = mean_power_x_w();
  const double py = mean_power_y_w();
  if (!std::isfinite(px) || !std::isfinite(py) || px < 0.0 || py < 0.0)
    throw std::invalid_argument("Waveform: non-finite power");
}

Waveform make_waveform(CArray x, CArray y, double sample_rate_hz,
                       double center_frequency_hz, double t0_offset_s) {
  Waveform w{std::move(x), std::move(y), sample_rate_hz, center_frequency_hz,
             t0_offset_s};
  w.validate();
  return w;
}

void FiberParams::validate() const {
  if (alpha_db_per_km < 0.0)
    throw std::invalid_argument("FiberParams: alpha must be >= 0");
  if (gamma_per_w_km < 0.0)
    throw std::invalid_argument("FiberParams: gamma must be >= 0");
  if (!(length_km > 0.0))
    throw std::invalid_argument("FiberParams: length must be > 0");
}

void PositionGrid::validate() const {
  if (z_positions_km.size() == 0)
    throw std::invalid_argument("PositionGrid: empty grid");
  if (!(delta_z_km > 0.0))
    throw std::invalid_argument("PositionGrid: delta_z must be > 0");
  for (Eigen::Index i = 1; i < z_positions_km.size(); ++i) {
    const double step = z_positions_km[i] - z_positions_km[i - 1];
    if (step <= 0.0 || std::abs(step - delta_z_km) > 1e-9 * delta_z_km)
      throw std::invalid_argument("PositionGrid: spacing not uniform");
  }
}

PositionGrid make_grid(double length_km, double delta_z_km) {
  if (!(length_km > 0.0) || !(delta_z_km > 0.0))
    throw std::invalid_argument("make_grid: lengths must be > 0");
  const auto n = static_cast<Eigen::Index>(std::llround(length_km / delta_z_km));
  if (n < 1 || std::abs(n * delta_z_km - length_km) > 1e-6 * length_km)
    throw std::invalid_argument("make_grid: delta_z must divide link length");
  PositionGrid g;
  g.delta_z_km = delta_z_km;
  g.z_positions_km = Eigen::VectorXd::LinSpaced(n, 0.5 * delta_z_km,
                                                (n - 0.5) * delta_z_km);
  g.validate();
  return g;
}

} // namespace olt
