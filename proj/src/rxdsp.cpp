#include "olt/rxdsp.hpp"

#include <cmath>

#include "olt/fft.hpp"
#include "olt/waveform_ops.hpp"

namespace olt {
namespace {

Eigen::Matrix2cd coherency(const Waveform& w) {
  Eigen::Matrix2cd c;
  const auto n = static_cast<double>(w.size());
  c(0, 0) = (w.x.conjugate() * w.x).sum() / n;
  c(0, 1) = (w.x.conjugate() * w.y).sum() / n;
  c(1, 0) = std::conj(c(0, 1));
  c(1, 1) = (w.y.conjugate() * w.y).sum() / n;
  return c;
}

} // namespace

Waveform demodulate(const Waveform& rx_raw, double link_total_cd_ps_nm,
                    const TxConfig& cfg) {
  rx_raw.validate();
  Waveform w = resample(rx_raw, 2.0 * cfg.symbol_rate_baud);
  // Total accumulated CD expressed as beta2*L; undo it in one pass.
  const double beta2_total =
      beta2_from_dispersion(link_total_cd_ps_nm, w.center_frequency_hz);
  w = apply_dispersion(w, beta2_total, 1.0, DispersionSign::inverse);
  return rrc_filter(w, cfg.symbol_rate_baud, cfg.rolloff);
}

ReferenceBundle make_reference(const Waveform& tx, const TxConfig& cfg) {
  Waveform ref = resample(tx, 2.0 * cfg.symbol_rate_baud);
  ReferenceBundle bundle;
  bundle.launch_coherency = coherency(ref); // pre-filter launch calibration
  bundle.ref_raw = ref;
  bundle.ref = rrc_filter(ref, cfg.symbol_rate_baud, cfg.rolloff);
  const Eigen::ArrayXd f =
      fft::bin_frequencies(ref.size(), ref.sample_rate_hz);
  const double scale = std::sqrt(ref.sample_rate_hz / cfg.symbol_rate_baud);
  bundle.mf_response.resize(ref.size());
  for (Eigen::Index k = 0; k < ref.size(); ++k)
    bundle.mf_response[k] =
        scale * std::sqrt(raised_cosine_response(f[k], cfg.symbol_rate_baud,
                                                 cfg.rolloff));
  return bundle;
}

AlignedPair align(const Waveform& rx, const ReferenceBundle& bundle) {
  const Waveform& ref = bundle.ref;
  rx.validate();
  ref.validate();
  if (rx.size() != ref.size() || rx.sample_rate_hz != ref.sample_rate_hz)
    throw std::invalid_argument("align: rx/ref size or rate mismatch");

  // Circular cross-correlation summed over polarizations.
  const Eigen::Index n = rx.size();
  CArray xc = fft::forward(rx.x) * fft::forward(ref.x).conjugate() +
              fft::forward(rx.y) * fft::forward(ref.y).conjugate();
  fft::inverse_inplace(xc);
  Eigen::Index lag = 0;
  double best = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = std::abs(xc[i]);
    if (m > best) {
      best = m;
      lag = i;
    }
  }
  const double rx_energy = rx.x.abs2().sum() + rx.y.abs2().sum();
  const double ref_energy = ref.x.abs2().sum() + ref.y.abs2().sum();
  const double peak = best / std::sqrt(rx_energy * ref_energy);
  if (lag > n / 2) lag -= n; // prefer the small signed lag
  if (peak < 0.5)
    throw std::runtime_error(
        "align: correlation peak " + std::to_string(peak) +
        " below 0.5; signals appear unrelated");

  AlignedPair pair;
  pair.ref = ref;
  pair.ref_raw = bundle.ref_raw;
  pair.mf_response = bundle.mf_response;
  pair.lag = lag;
  pair.correlation_peak = peak;
  pair.launch_coherency = bundle.launch_coherency;
  Waveform rxs = circular_shift(rx, -lag);

  // Least-squares 2x2 response: rxs ~= M ref, then normalize rx by M.
  Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
  r(0, 0) = (ref.x.conjugate() * ref.x).sum();
  r(0, 1) = (ref.x.conjugate() * ref.y).sum();
  r(1, 0) = std::conj(r(0, 1));
  r(1, 1) = (ref.y.conjugate() * ref.y).sum();
  Eigen::Matrix2cd c; // c(k, i) = <ref_k, rx_i>
  c(0, 0) = (ref.x.conjugate() * rxs.x).sum();
  c(1, 0) = (ref.y.conjugate() * rxs.x).sum();
  c(0, 1) = (ref.x.conjugate() * rxs.y).sum();
  c(1, 1) = (ref.y.conjugate() * rxs.y).sum();
  const Eigen::Matrix2cd m = (r.ldlt().solve(c)).transpose();
  if (std::abs(m(0, 0)) <= std::abs(m(0, 1)) ||
      std::abs(m(1, 1)) <= std::abs(m(1, 0)))
    throw std::runtime_error(
        "align: fitted response is not diagonal-dominant; polarization "
        "assignment is not the identity");

  const Eigen::Matrix2cd minv = m.inverse();
  pair.rx = rxs;
  pair.rx.x = minv(0, 0) * rxs.x + minv(0, 1) * rxs.y;
  pair.rx.y = minv(1, 0) * rxs.x + minv(1, 1) * rxs.y;
  pair.response = m;
  // mean per-polarization power gain of the fitted linear response
  pair.scale = 0.5 * m.squaredNorm();
  return pair;
}

AlignedPair align(const Waveform& rx, const Waveform& ref) {
  ReferenceBundle bundle;
  bundle.ref = ref;
  bundle.launch_coherency = coherency(ref);
  return align(rx, bundle);
}

AlignedPair rotate_pair(const AlignedPair& pair, double theta_rad,
                        double phi_rad) {
  AlignedPair out = pair;
  out.rx = jones_rotate(pair.rx, theta_rad, phi_rad);
  out.ref = jones_rotate(pair.ref, theta_rad, phi_rad);
  if (pair.ref_raw.size() > 0)
    out.ref_raw = jones_rotate(pair.ref_raw, theta_rad, phi_rad);
  const Eigen::Matrix2cd u = jones_matrix(theta_rad, phi_rad);
  out.launch_coherency = u * pair.launch_coherency * u.adjoint();
  return out;
}

} // namespace olt
