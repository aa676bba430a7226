#ifndef OLT_TYPES_HPP
#define OLT_TYPES_HPP

#include <complex>
#include <stdexcept>
#include <Eigen/Core>

namespace olt {

using Complex = std::complex<double>;
using CArray = Eigen::ArrayXcd;

namespace constants {
inline constexpr double speed_of_light_m_s = 299792458.0;
inline constexpr double planck_j_s = 6.62607015e-34;
inline constexpr double default_center_frequency_hz = 193.4e12;
} // namespace constants

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts); // throws std::domain_error for watts <= 0

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

inline double wavelength_m(double frequency_hz) {
  return constants::speed_of_light_m_s / frequency_hz;
}

// beta2 <-> D conversion at a given carrier. beta2 = -D * lambda^2 / (2*pi*c),
// bijective for fixed lambda. Units: D in ps/nm/km, beta2 in ps^2/km.
double beta2_from_dispersion(double d_ps_nm_km, double center_frequency_hz);
double dispersion_from_beta2(double beta2_ps2_km, double center_frequency_hz);

/// Dual-polarization complex baseband capture. Samples are in sqrt(W).
struct Waveform {
  CArray x;
  CArray y;
  double sample_rate_hz = 0.0;
  double center_frequency_hz = constants::default_center_frequency_hz;
  double t0_offset_s = 0.0;

  Eigen::Index size() const { return x.size(); }
  double mean_power_x_w() const { return x.abs2().mean(); }
  double mean_power_y_w() const { return y.abs2().mean(); }
  double mean_power_w() const { return mean_power_x_w() + mean_power_y_w(); }

  void validate() const; // throws std::invalid_argument on broken invariants
};

Waveform make_waveform(CArray x, CArray y, double sample_rate_hz,
                       double center_frequency_hz = constants::default_center_frequency_hz,
                       double t0_offset_s = 0.0);

struct FiberParams {
  double alpha_db_per_km = 0.2;
  double dispersion_ps_nm_km = 17.0;
  double gamma_per_w_km = 1.3;
  double length_km = 50.0;

  double beta2_ps2_km(double center_frequency_hz) const {
    return beta2_from_dispersion(dispersion_ps_nm_km, center_frequency_hz);
  }
  void validate() const;
};

/// Uniform grid of cell-center positions z_m = (m + 1/2) * dz covering [0, L].
struct PositionGrid {
  Eigen::VectorXd z_positions_km;
  double delta_z_km = 1.0;

  Eigen::Index size() const { return z_positions_km.size(); }
  double length_km() const { return delta_z_km * static_cast<double>(size()); }
  void validate() const;
};

PositionGrid make_grid(double length_km, double delta_z_km);

} // namespace olt

#endif // OLT_TYPES_HPP
