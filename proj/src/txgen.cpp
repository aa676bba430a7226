#include "olt/txgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "olt/log.hpp"
#include "olt/rng.hpp"
#include "olt/waveform_ops.hpp"

namespace olt {
namespace {

using rng::uniform01;

CArray draw_stream(const ConstellationSpec& spec, Eigen::Index n,
                   uint64_t seed) {
  std::mt19937_64 engine(seed);
  CArray out(n);
  switch (spec.kind) {
    case ConstellationKind::qpsk: {
      const double a = spec.unit_energy ? M_SQRT1_2 : 1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const uint64_t b = engine() & 3u;
        out[i] = Complex(b & 1u ? a : -a, b & 2u ? a : -a);
      }
      break;
    }
    case ConstellationKind::qam16: {
      const double a = spec.unit_energy ? 1.0 / std::sqrt(10.0) : 1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const uint64_t b = engine() & 15u;
        const double re = (b & 1u ? 1.0 : -1.0) * (b & 2u ? 3.0 : 1.0);
        const double im = (b & 4u ? 1.0 : -1.0) * (b & 8u ? 3.0 : 1.0);
        out[i] = a * Complex(re, im);
      }
      break;
    }
    case ConstellationKind::pcs_qam64: {
      const ShapedQam64 c = shaped_qam64(spec.shaping_nu, spec.unit_energy);
      std::vector<double> cdf(c.probabilities.size());
      std::partial_sum(c.probabilities.begin(), c.probabilities.end(),
                       cdf.begin());
      for (Eigen::Index i = 0; i < n; ++i) {
        const double u = uniform01(engine);
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        const auto idx = std::min<size_t>(it - cdf.begin(), cdf.size() - 1);
        out[i] = c.points[idx];
      }
      break;
    }
    case ConstellationKind::gaussian: {
      // |s|^2 ~ Exp(1), so E|s|^2 = 1 exactly in expectation.
      for (Eigen::Index i = 0; i < n; ++i) out[i] = rng::complex_normal(engine);
      break;
    }
    default:
      throw std::invalid_argument("generate_symbols: unknown constellation");
  }
  return out;
}

} // namespace

ShapedQam64 shaped_qam64(double nu, bool unit_energy) {
  if (nu < 0.0) throw std::invalid_argument("shaped_qam64: nu must be >= 0");
  static const double levels[8] = {-7, -5, -3, -1, 1, 3, 5, 7};
  ShapedQam64 c;
  c.points.reserve(64);
  c.probabilities.reserve(64);
  double z = 0.0;
  for (double i : levels)
    for (double q : levels) {
      c.points.emplace_back(i, q);
      const double w = std::exp(-nu * (i * i + q * q));
      c.probabilities.push_back(w);
      z += w;
    }
  double energy = 0.0;
  for (size_t k = 0; k < 64; ++k) {
    c.probabilities[k] /= z;
    energy += c.probabilities[k] * std::norm(c.points[k]);
  }
  if (unit_energy) {
    const double s = 1.0 / std::sqrt(energy);
    for (auto& p : c.points) p *= s;
  }
  return c;
}

void TxConfig::validate() const {
  if (!(symbol_rate_baud > 0.0))
    throw std::invalid_argument("TxConfig: symbol rate must be > 0");
  if (oversampling < 2)
    throw std::invalid_argument("TxConfig: oversampling must be >= 2");
  if (rolloff < 0.0 || rolloff > 1.0)
    throw std::invalid_argument("TxConfig: rolloff must be in [0, 1]");
  if (n_symbols <= 0)
    throw std::invalid_argument("TxConfig: n_symbols must be > 0");
  if (!(center_frequency_hz > 0.0))
    throw std::invalid_argument("TxConfig: center frequency must be > 0");
  if (n_symbols < 4096)
    OLT_LOG_INFO("TxConfig: n_symbols < 4096 is below estimation grade");
}

SymbolStreams generate_symbols(const TxConfig& cfg) {
  cfg.validate();
  constexpr uint64_t kPolSplit = 0xA5A5A5A55A5A5A5Aull;
  return {draw_stream(cfg.constellation, cfg.n_symbols, cfg.seed),
          draw_stream(cfg.constellation, cfg.n_symbols, cfg.seed ^ kPolSplit)};
}

Waveform build_tx_waveform(const TxConfig& cfg) {
  const SymbolStreams syms = generate_symbols(cfg);
  const Eigen::Index n = cfg.n_symbols * cfg.oversampling;
  Waveform w;
  w.sample_rate_hz = cfg.symbol_rate_baud * cfg.oversampling;
  w.center_frequency_hz = cfg.center_frequency_hz;
  w.x = CArray::Zero(n);
  w.y = CArray::Zero(n);
  for (Eigen::Index i = 0; i < cfg.n_symbols; ++i) {
    w.x[i * cfg.oversampling] = syms.x[i];
    w.y[i * cfg.oversampling] = syms.y[i];
  }
  w = rrc_filter(w, cfg.symbol_rate_baud, cfg.rolloff);
  const double target_w = dbm_to_watts(cfg.launch_power_dbm);
  const double scale = std::sqrt(target_w / w.mean_power_w());
  w.x *= scale;
  w.y *= scale;
  return w;
}

} // namespace olt
