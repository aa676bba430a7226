#ifndef OLT_TXGEN_HPP
#define OLT_TXGEN_HPP

#include <cstdint>
#include <vector>

#include "olt/types.hpp"

namespace olt {

enum class ConstellationKind { qpsk, qam16, pcs_qam64, gaussian };

struct ConstellationSpec {
  ConstellationKind kind = ConstellationKind::pcs_qam64;
  // Maxwell-Boltzmann exponent for pcs_qam64; the default targets an entropy
  // of about 5.5 bit/symbol.
  double shaping_nu = 0.0387223044;
  bool unit_energy = true;
};

struct TxConfig {
  ConstellationSpec constellation{};
  double symbol_rate_baud = 128e9;
  int oversampling = 8;
  double rolloff = 0.1;
  Eigen::Index n_symbols = 65536;
  double launch_power_dbm = 3.0; // total over both polarizations
  double center_frequency_hz = constants::default_center_frequency_hz;
  uint64_t seed = 1;

  void validate() const;
};

struct SymbolStreams {
  CArray x;
  CArray y;
};

/// Points and Maxwell-Boltzmann probabilities of the shaped 64-QAM grid
/// (unit mean energy under the given distribution). Exposed so tests can
/// check empirical frequencies against the closed form.
struct ShapedQam64 {
  std::vector<Complex> points;       // 64 entries
  std::vector<double> probabilities; // sums to 1
};
ShapedQam64 shaped_qam64(double nu, bool unit_energy = true);

/// Two independent symbol streams drawn with a Mersenne-twister PRNG; the
/// y stream uses a decorrelated substream of the same seed. Identical
/// configs give bit-identical output.
SymbolStreams generate_symbols(const TxConfig& cfg);

/// Symbols upsampled, RRC-shaped and scaled so that the total mean power
/// equals dbm_to_watts(launch_power_dbm).
Waveform build_tx_waveform(const TxConfig& cfg);

} // namespace olt

#endif // OLT_TXGEN_HPP
