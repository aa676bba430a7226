#include "olt/waveform_ops.hpp"

#include <cmath>
#include <numeric>

#include "olt/fft.hpp"

namespace olt {
namespace {

using fft::forward_inplace;
using fft::inverse_inplace;

// Applies fn to the zero-padded spectrum of each polarization, then trims.
template <typename SpectrumFn>
Waveform spectral_apply(const Waveform& w, SpectrumFn&& fn) {
  const Eigen::Index n = w.size();
  const Eigen::Index np = fft::next_pow2(n);
  Waveform out = w;
  for (CArray* pol : {&out.x, &out.y}) {
    CArray buf = CArray::Zero(np);
    buf.head(n) = *pol;
    forward_inplace(buf);
    fn(buf);
    inverse_inplace(buf);
    *pol = buf.head(n);
  }
  return out;
}

std::pair<Eigen::Index, Eigen::Index> rational_ratio(double ratio) {
  // Continued-fraction expansion; reject if no small rational fits.
  constexpr Eigen::Index max_den = 1 << 16;
  double x = ratio;
  Eigen::Index p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  for (int iter = 0; iter < 64; ++iter) {
    const double a = std::floor(x);
    const auto ai = static_cast<Eigen::Index>(a);
    Eigen::Index p2 = ai * p1 + p0;
    Eigen::Index q2 = ai * q1 + q0;
    if (q2 > max_den || p2 > max_den) break;
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    if (std::abs(static_cast<double>(p1) / static_cast<double>(q1) - ratio) <
        1e-9 * ratio)
      return {p1, q1};
    const double frac = x - a;
    if (frac < 1e-12) break;
    x = 1.0 / frac;
  }
  throw std::invalid_argument("resample: rate ratio is not a small rational");
}

} // namespace

Waveform apply_dispersion(const Waveform& w, double beta2_ps2_km,
                          double length_km, DispersionSign sign) {
  w.validate();
  if (length_km < 0.0)
    throw std::invalid_argument("apply_dispersion: negative length");
  if (length_km == 0.0 || beta2_ps2_km == 0.0) return w;

  const double beta2L_s2 = beta2_ps2_km * length_km * 1e-24;
  const double s = (sign == DispersionSign::forward) ? 1.0 : -1.0;
  return spectral_apply(w, [&](CArray& spec) {
    const Eigen::ArrayXd omega =
        fft::angular_frequencies(spec.size(), w.sample_rate_hz);
    spec *= ((Complex(0.0, s * 0.5 * beta2L_s2) * omega.square()).exp());
  });
}

double raised_cosine_response(double f_hz, double symbol_rate_baud,
                              double rolloff) {
  const double af = std::abs(f_hz);
  const double f1 = 0.5 * (1.0 - rolloff) * symbol_rate_baud;
  const double f2 = 0.5 * (1.0 + rolloff) * symbol_rate_baud;
  if (af <= f1) return 1.0;
  if (af >= f2) return (af == f2 && rolloff == 0.0) ? 0.5 : 0.0;
  return 0.5 * (1.0 + std::cos(M_PI * (af - f1) / (rolloff * symbol_rate_baud)));
}

Waveform rrc_filter(const Waveform& w, double symbol_rate_baud,
                    double rolloff) {
  w.validate();
  if (rolloff < 0.0 || rolloff > 1.0)
    throw std::invalid_argument("rrc_filter: rolloff must be in [0, 1]");
  if (!(symbol_rate_baud > 0.0))
    throw std::invalid_argument("rrc_filter: symbol rate must be > 0");
  if (w.sample_rate_hz < (1.0 + rolloff) * symbol_rate_baud)
    throw std::invalid_argument(
        "rrc_filter: sample rate below (1+rolloff)*symbol_rate");

  // sqrt(Fs/Rs) scaling makes the equivalent impulse response unit-energy.
  const double scale = std::sqrt(w.sample_rate_hz / symbol_rate_baud);
  return spectral_apply(w, [&](CArray& spec) {
    const Eigen::ArrayXd f = fft::bin_frequencies(spec.size(), w.sample_rate_hz);
    for (Eigen::Index k = 0; k < spec.size(); ++k)
      spec[k] *= scale * std::sqrt(raised_cosine_response(
                             f[k], symbol_rate_baud, rolloff));
  });
}

Waveform resample(const Waveform& w, double new_rate_hz) {
  w.validate();
  if (!(new_rate_hz > 0.0))
    throw std::invalid_argument("resample: rate must be > 0");
  if (new_rate_hz == w.sample_rate_hz) return w;

  const auto [p, q] = rational_ratio(new_rate_hz / w.sample_rate_hz);
  const Eigen::Index n = w.size();
  if ((n * p) % q != 0)
    throw std::invalid_argument(
        "resample: capture length incompatible with rate ratio");
  const Eigen::Index m = n * p / q;
  if (m < 2) throw std::invalid_argument("resample: output too short");

  Waveform out = w;
  out.sample_rate_hz = new_rate_hz;
  const double amp = static_cast<double>(m) / static_cast<double>(n);
  const Eigen::Index half = std::min(n, m) / 2; // bins with |f| < min Nyquist
  for (auto [src, dst] : {std::pair{&w.x, &out.x}, std::pair{&w.y, &out.y}}) {
    CArray spec = fft::forward(*src);
    CArray ospec = CArray::Zero(m);
    ospec.head(half) = spec.head(half);
    ospec.tail(half - 1) = spec.tail(half - 1);
    ospec *= amp;
    inverse_inplace(ospec);
    *dst = ospec;
  }
  return out;
}

Eigen::Matrix2cd jones_matrix(double theta_rad, double phi_rad) {
  const double c = std::cos(theta_rad), s = std::sin(theta_rad);
  const Complex e = std::exp(Complex(0.0, phi_rad));
  Eigen::Matrix2cd u;
  u << c, -s * e, s * std::conj(e), c;
  return u;
}

Waveform jones_rotate(const Waveform& w, double theta_rad, double phi_rad) {
  const Eigen::Matrix2cd u = jones_matrix(theta_rad, phi_rad);
  Waveform out = w;
  out.x = u(0, 0) * w.x + u(0, 1) * w.y;
  out.y = u(1, 0) * w.x + u(1, 1) * w.y;
  return out;
}

Waveform circular_shift(const Waveform& w, Eigen::Index lag) {
  const Eigen::Index n = w.size();
  Eigen::Index k = ((lag % n) + n) % n;
  if (k == 0) return w;
  Waveform out = w;
  for (auto [src, dst] : {std::pair{&w.x, &out.x}, std::pair{&w.y, &out.y}}) {
    dst->tail(n - k) = src->head(n - k);
    dst->head(k) = src->tail(k);
  }
  return out;
}

} // namespace olt
