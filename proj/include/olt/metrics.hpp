#ifndef OLT_METRICS_HPP
#define OLT_METRICS_HPP

#include <vector>

#include "olt/dimensions.hpp"
#include "olt/linksim.hpp"
#include "olt/tomography.hpp"

namespace olt {

enum class SnrChannel { x, y, pol_mean };

struct SnrReport {
  Eigen::VectorXd per_position_snr_db;
  double mean_snr_db = 0.0;
  int n_ensembles = 0;
};

/// Power-profile SNR per position: true gamma'^2 over the mean squared
/// deviation of the estimates from the truth. The spread is taken about the
/// true value (bias included), which is what makes repeated-pattern averaging
/// saturate while pattern-diverse averaging keeps the theoretical slope.
SnrReport snr_pp(const GroundTruthProfile& truth,
                 const std::vector<ProfileEstimate>& estimates,
                 SnrChannel channel = SnrChannel::pol_mean);

/// Spatial correlation function rho(dz) = |<g(z), g(z+dz)>| / (|g(z)||g(z+dz)|)
/// of the self-polarization kernels.
Eigen::VectorXd spatial_correlation(const AlignedPair& pair, double z_km,
                                    const std::vector<double>& dz_values_km,
                                    const EstimatorConfig& cfg);

/// Half width of a correlation curve relative to its floor: first dz where
/// rho crosses (1 + floor)/2, linearly interpolated.
double correlation_half_width_km(const std::vector<double>& dz_values_km,
                                 const Eigen::VectorXd& rho);

enum class AnomalyKind { lumped_loss, gain_step, pdl_flag };

struct AnomalyEvent {
  double z_km = 0.0;
  double magnitude_db = 0.0;
  AnomalyKind kind = AnomalyKind::lumped_loss;
};

struct AnomalyReport {
  std::vector<AnomalyEvent> events; // sorted by position
  PositionGrid grid;
  Eigen::VectorXd residual_profile_db; // profile minus per-span loss slopes
};

/// Loss-slope subtraction: straight-line dB fits per span (2 km edge guards),
/// in-span residual steps above threshold become lumped_loss/gain_step
/// events; span-boundary levels are checked against the declared amplifier
/// gains; a persistent polarization split is flagged as PDL.
AnomalyReport detect_anomalies(const ProfileEstimate& profile,
                               const LinkSpec& link, double threshold_db);

const char* anomaly_kind_name(AnomalyKind kind);

} // namespace olt

#endif // OLT_METRICS_HPP
