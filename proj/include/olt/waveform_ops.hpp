#ifndef OLT_WAVEFORM_OPS_HPP
#define OLT_WAVEFORM_OPS_HPP

#include "olt/types.hpp"

// Signal convention used throughout:
//   dA/dz = -(alpha/2) A - j (beta2/2) d^2A/dt^2 - j (8/9) gamma (|Ax|^2+|Ay|^2) A
// so forward dispersion over length L multiplies the spectrum by
// exp(+j (beta2/2) w^2 L). The estimator and the simulator must share this
// convention or the recovered profile flips sign.

namespace olt {

enum class DispersionSign { forward, inverse };

/// All-pass chromatic dispersion operator, applied over the whole capture in
/// one FFT (zero-padded to the next power of two, pad trimmed afterwards).
Waveform apply_dispersion(const Waveform& w, double beta2_ps2_km,
                          double length_km,
                          DispersionSign sign = DispersionSign::forward);

/// Root-raised-cosine filter applied in the frequency domain. The equivalent
/// impulse response has unit energy; applying the filter twice gives a
/// raised-cosine (Nyquist) response.
Waveform rrc_filter(const Waveform& w, double symbol_rate_baud, double rolloff);

/// Raised-cosine magnitude response at frequency f (peak 1).
double raised_cosine_response(double f_hz, double symbol_rate_baud,
                              double rolloff);

/// Spectrum-preserving rational-ratio resampler (brick-wall anti-alias on
/// decimation).
Waveform resample(const Waveform& w, double new_rate_hz);

/// Unitary Jones-basis rotation
///   [x']   [ cos(theta)            -sin(theta) e^{+j phi} ] [x]
///   [y'] = [ sin(theta) e^{-j phi}  cos(theta)            ] [y]
Waveform jones_rotate(const Waveform& w, double theta_rad, double phi_rad);

Eigen::Matrix2cd jones_matrix(double theta_rad, double phi_rad);

/// Circular shift by an integer number of samples (positive delays the signal).
Waveform circular_shift(const Waveform& w, Eigen::Index lag);

} // namespace olt

#endif // OLT_WAVEFORM_OPS_HPP
