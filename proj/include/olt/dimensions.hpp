#ifndef OLT_DIMENSIONS_HPP
#define OLT_DIMENSIONS_HPP

#include <vector>

#include "olt/linksim.hpp"
#include "olt/tomography.hpp"

namespace olt {

struct SopSweepResult {
  struct Candidate {
    double theta_rad = 0.0;
    double phi_rad = 0.0;
    ProfileEstimate profile;
    double max_split_db = 0.0;      // max over grid of |10 log10(Px/Py)|
    // Sustained split: median over the cells at or above half the peak.
    // Resolution blur rings 1-2 dB high right at the element's own cell, so
    // this is the polarization-dependent loss value readout.
    double plateau_split_db = 0.0;
    double split_position_km = 0.0; // onset: first cell above half the max
  };
  std::vector<Candidate> candidates;
  std::size_t best = 0; // maximizes the sustained split
};

/// Per-polarization power split of a dual estimate (dB); NaN where either
/// power estimate is non-positive.
Eigen::VectorXd polarization_split_db(const ProfileEstimate& est);

/// Analysis-basis sweep for PDL localization: estimates the profile in each
/// rotated basis (no re-simulation; rotation happens on the aligned pair) and
/// reports the basis maximizing the polarization power split. With several
/// pairs, per-basis profiles are averaged over the pairs first.
SopSweepResult sop_sweep(const std::vector<AlignedPair>& pairs,
                         const EstimatorConfig& cfg, int grid_theta = 13,
                         int grid_phi = 4);
SopSweepResult sop_sweep(const AlignedPair& pair, const EstimatorConfig& cfg,
                         int grid_theta = 13, int grid_phi = 4);

enum class MapAxis { frequency, time };

struct TomographyMap {
  MapAxis axis_kind = MapAxis::time;
  Eigen::VectorXd axis_values; // Hz or seconds, strictly increasing
  PositionGrid grid;
  Eigen::MatrixXd power_dbm;   // (position, axis)
  Eigen::MatrixXd power_x_dbm;
  Eigen::MatrixXd power_y_dbm;

  Eigen::VectorXd slice_at_km(double z_km) const; // row nearest to z_km
  void validate() const;
};

struct SpectralScenario {
  TxConfig tx{};
  LinkSpec link{};
  PropagateOptions sim{};
  EstimatorConfig estimator{};
  // Emulation switch used by tests: freeze beta2 (and the estimator's view of
  // it) at the tx center frequency so all channels see identical physics.
  bool force_constant_beta2 = false;
  std::vector<double> per_channel_power_dbm; // optional, one per channel
};

/// One simulate -> demodulate -> estimate run per channel frequency; columns
/// stacked over frequency. Channels run in parallel with independent noise
/// substreams.
TomographyMap spectral_map(const SpectralScenario& scenario,
                           const std::vector<double>& frequencies_hz);

/// Per-capture estimates followed by a centered moving average (odd window)
/// along time. Window 1 reproduces the raw per-capture estimates.
TomographyMap temporal_map(const std::vector<double>& capture_times_s,
                           const std::vector<ProfileEstimate>& per_capture,
                           int window);

struct AverageDims {
  bool polarization = false;
  bool time = false;
  bool frequency = false;
};

/// Arithmetic mean of profiles over the listed ensemble (time/frequency) and
/// optionally over polarization, in which case the scalar (x+y)/2 profile is
/// returned in the x slots.
ProfileEstimate average_profiles(const std::vector<ProfileEstimate>& profiles,
                                 const AverageDims& dims);

} // namespace olt

#endif // OLT_DIMENSIONS_HPP
