#ifndef OLT_RXDSP_HPP
#define OLT_RXDSP_HPP

#include <Eigen/Dense>

#include "olt/txgen.hpp"
#include "olt/types.hpp"

namespace olt {

/// Synchronized (received, reference) pair, both CD-compensated (rx),
/// matched-filtered and at 2 samples/symbol. rx is normalized by the fitted
/// 2x2 linear response so its linear part matches ref; the tomography core
/// consumes the pair as-is.
struct AlignedPair {
  Waveform rx;
  Waveform ref;
  // Pre-matched-filter reference and the filter's frequency response per DFT
  // bin. The tomography kernels form their cubic products on ref_raw (the
  // waveform that physically generated the nonlinearity) and apply
  // mf_response afterwards, mirroring the receive chain. When absent (both
  // empty, e.g. hand-built test pairs), products are formed on ref directly.
  Waveform ref_raw;
  CArray mf_response;
  double scale = 1.0;            // raw-rx -> ref linear power ratio removed
  Eigen::Index lag = 0;          // integer lag removed from rx (samples)
  double correlation_peak = 0.0; // normalized, in [0, 1]
  Eigen::Matrix2cd response = Eigen::Matrix2cd::Identity(); // fitted raw = M ref
  // Per-polarization launch calibration of the (pre-matched-filter) reference,
  // watts: diagonal holds launch powers, off-diagonal the x/y cross term.
  Eigen::Matrix2cd launch_coherency = Eigen::Matrix2cd::Zero();
};

struct ReferenceBundle {
  Waveform ref;                   // matched-filtered, 2 samples/symbol
  Waveform ref_raw;               // resampled only
  CArray mf_response;
  Eigen::Matrix2cd launch_coherency;
};

/// Receiver conditioning: resample to 2 samples/symbol, undo the accumulated
/// chromatic dispersion, apply the RRC matched filter.
Waveform demodulate(const Waveform& rx_raw, double link_total_cd_ps_nm,
                    const TxConfig& cfg);

/// Reference path: the known transmit waveform, resampled to 2
/// samples/symbol and matched-filtered (data-aided reference).
ReferenceBundle make_reference(const Waveform& tx, const TxConfig& cfg);

/// Integer-lag alignment by cross-correlation, then a least-squares 2x2
/// complex response fit; rx is normalized by the fitted response. Throws if
/// the normalized correlation peak is below 0.5 (signals unrelated) or if the
/// fitted response is not diagonal-dominant (polarization assignment must be
/// the identity for simulator-produced captures).
AlignedPair align(const Waveform& rx, const ReferenceBundle& ref);
AlignedPair align(const Waveform& rx, const Waveform& ref);

/// Rotates both members (and the launch calibration) into a new analysis
/// basis; used by the SOP sweep.
AlignedPair rotate_pair(const AlignedPair& pair, double theta_rad,
                        double phi_rad);

} // namespace olt

#endif // OLT_RXDSP_HPP
