#include "olt/dimensions.hpp"

#include <cmath>
#include <memory>

#include "olt/parallel.hpp"
#include "olt/rng.hpp"
#include "olt/rxdsp.hpp"

namespace olt {
namespace {

bool same_grid(const PositionGrid& a, const PositionGrid& b) {
  return a.size() == b.size() &&
         std::abs(a.delta_z_km - b.delta_z_km) < 1e-9 &&
         (a.z_positions_km - b.z_positions_km).cwiseAbs().maxCoeff() < 1e-9;
}

double power_dbm_or_nan(double watts) {
  return watts > 0.0 ? watts_to_dbm(watts) : std::nan("");
}

} // namespace

namespace {

double positive_median(const Eigen::VectorXd& v) {
  std::vector<double> pos;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] > 0.0) pos.push_back(v[i]);
  if (pos.empty()) return 0.0;
  std::nth_element(pos.begin(), pos.begin() + pos.size() / 2, pos.end());
  return pos[pos.size() / 2];
}

} // namespace

Eigen::VectorXd polarization_split_db(const ProfileEstimate& est) {
  if (!est.dual())
    throw std::invalid_argument("polarization_split_db: dual estimate needed");
  // Collapsed cells (tiny positive estimates at low-power span tails) would
  // dominate a log ratio; positions below 5% of the per-polarization median
  // are treated like non-positive ones.
  const double floor_x = 0.05 * positive_median(est.power_x_w);
  const double floor_y = 0.05 * positive_median(est.power_y_w);
  Eigen::VectorXd split(est.grid.size());
  for (Eigen::Index m = 0; m < est.grid.size(); ++m) {
    const double px = est.power_x_w[m];
    const double py = est.power_y_w[m];
    split[m] = (px > floor_x && py > floor_y)
                   ? std::abs(10.0 * std::log10(px / py))
                   : std::nan("");
  }
  return split;
}

SopSweepResult sop_sweep(const std::vector<AlignedPair>& pairs,
                         const EstimatorConfig& cfg, int grid_theta,
                         int grid_phi) {
  if (pairs.empty())
    throw std::invalid_argument("sop_sweep: need at least one pair");
  if (cfg.mode != EstimatorMode::dual_pol)
    throw std::invalid_argument("sop_sweep: dual_pol mode required");
  if (grid_theta < 1 || grid_phi < 1)
    throw std::invalid_argument("sop_sweep: empty basis grid");

  std::vector<std::unique_ptr<BasisSweepEngine>> engines(pairs.size());
  parallel_for(pairs.size(), [&](size_t p) {
    engines[p] = std::make_unique<BasisSweepEngine>(pairs[p], cfg);
  });

  const Eigen::Index n_bases =
      static_cast<Eigen::Index>(grid_theta) * grid_phi;
  SopSweepResult result;
  result.candidates.resize(static_cast<size_t>(n_bases));
  parallel_for(static_cast<size_t>(n_bases), [&](size_t b) {
    const int it = static_cast<int>(b) / grid_phi;
    const int ip = static_cast<int>(b) % grid_phi;
    const double theta =
        grid_theta > 1
            ? (M_PI / 2.0) * static_cast<double>(it) / (grid_theta - 1)
            : 0.0;
    const double phi = M_PI * static_cast<double>(ip) / grid_phi;

    std::vector<ProfileEstimate> per_pair;
    per_pair.reserve(pairs.size());
    for (const auto& engine : engines)
      per_pair.push_back(engine->estimate_in_basis(theta, phi));
    AverageDims dims;
    dims.time = per_pair.size() > 1;
    ProfileEstimate prof =
        per_pair.size() > 1 ? average_profiles(per_pair, dims) : per_pair[0];

    SopSweepResult::Candidate cand;
    cand.theta_rad = theta;
    cand.phi_rad = phi;
    // Readout on the 3-cell-smoothed powers: single-cell flutter at weak
    // positions would otherwise set the peak.
    ProfileEstimate smooth = prof;
    const Eigen::Index m_cells = prof.grid.size();
    for (Eigen::Index m = 1; m + 1 < m_cells; ++m) {
      smooth.power_x_w[m] =
          (prof.power_x_w[m - 1] + prof.power_x_w[m] + prof.power_x_w[m + 1]) /
          3.0;
      smooth.power_y_w[m] =
          (prof.power_y_w[m - 1] + prof.power_y_w[m] + prof.power_y_w[m + 1]) /
          3.0;
    }
    Eigen::VectorXd split = polarization_split_db(smooth);
    if (per_pair.size() >= 4) {
      // Ensemble reliability mask: cells whose mean has a large standard
      // error carry no usable split information in any basis.
      constexpr double kMaxRelativeSe = 0.06;
      const auto np = static_cast<double>(per_pair.size());
      for (Eigen::Index m = 0; m < m_cells; ++m) {
        for (const bool is_x : {true, false}) {
          const double mean =
              is_x ? prof.power_x_w[m] : prof.power_y_w[m];
          double var = 0.0;
          for (const auto& p : per_pair) {
            const double v = is_x ? p.power_x_w[m] : p.power_y_w[m];
            var += (v - mean) * (v - mean);
          }
          const double se = std::sqrt(var / (np - 1.0) / np);
          if (!(mean > 0.0) || se > kMaxRelativeSe * mean)
            split[m] = std::nan("");
        }
      }
    }
    double max_split = 0.0;
    for (Eigen::Index m = 0; m < split.size(); ++m)
      if (std::isfinite(split[m])) max_split = std::max(max_split, split[m]);
    cand.max_split_db = max_split;
    cand.split_position_km = std::nan("");
    std::vector<double> plateau;
    for (Eigen::Index m = 0; m < split.size(); ++m) {
      if (std::isfinite(split[m]) && split[m] >= 0.5 * max_split &&
          max_split > 0.0) {
        if (plateau.empty())
          cand.split_position_km = prof.grid.z_positions_km[m];
        plateau.push_back(split[m]);
      }
    }
    if (!plateau.empty()) {
      std::nth_element(plateau.begin(), plateau.begin() + plateau.size() / 2,
                       plateau.end());
      cand.plateau_split_db = plateau[plateau.size() / 2];
    }
    cand.profile = std::move(prof);
    result.candidates[b] = std::move(cand);
  });

  result.best = 0;
  for (size_t b = 1; b < result.candidates.size(); ++b)
    if (result.candidates[b].plateau_split_db >
        result.candidates[result.best].plateau_split_db)
      result.best = b;
  return result;
}

SopSweepResult sop_sweep(const AlignedPair& pair, const EstimatorConfig& cfg,
                         int grid_theta, int grid_phi) {
  return sop_sweep(std::vector<AlignedPair>{pair}, cfg, grid_theta, grid_phi);
}

void TomographyMap::validate() const {
  grid.validate();
  for (Eigen::Index i = 1; i < axis_values.size(); ++i)
    if (!(axis_values[i] > axis_values[i - 1]))
      throw std::invalid_argument("TomographyMap: axis not increasing");
  if (power_dbm.rows() != grid.size() || power_dbm.cols() != axis_values.size())
    throw std::invalid_argument("TomographyMap: shape mismatch");
}

Eigen::VectorXd TomographyMap::slice_at_km(double z_km) const {
  Eigen::Index best = 0;
  (grid.z_positions_km.array() - z_km).abs().minCoeff(&best);
  return power_dbm.row(best);
}

TomographyMap spectral_map(const SpectralScenario& scenario,
                           const std::vector<double>& frequencies_hz) {
  if (frequencies_hz.empty())
    throw std::invalid_argument("spectral_map: need >= 1 frequency");
  if (!scenario.per_channel_power_dbm.empty() &&
      scenario.per_channel_power_dbm.size() != frequencies_hz.size())
    throw std::invalid_argument(
        "spectral_map: per-channel power list does not match frequencies");
  for (size_t i = 1; i < frequencies_hz.size(); ++i)
    if (!(frequencies_hz[i] > frequencies_hz[i - 1]))
      throw std::invalid_argument("spectral_map: frequencies must increase");

  const double beta2_ref =
      beta2_from_dispersion(scenario.estimator.cd_coefficient_ps_nm_km,
                            scenario.tx.center_frequency_hz);

  std::vector<ProfileEstimate> estimates(frequencies_hz.size());
  parallel_for(frequencies_hz.size(), [&](size_t i) {
    TxConfig tx = scenario.tx;
    tx.center_frequency_hz = frequencies_hz[i];
    if (!scenario.per_channel_power_dbm.empty())
      tx.launch_power_dbm = scenario.per_channel_power_dbm[i];

    LinkSpec link = scenario.link;
    if (scenario.force_constant_beta2) {
      // Identical physics across channels: pin each span's D so that the
      // channel sees the reference beta2.
      for (auto& span : link.spans)
        span.fiber.dispersion_ps_nm_km =
            dispersion_from_beta2(beta2_ref, frequencies_hz[i]);
    }

    PropagateOptions sim = scenario.sim;
    sim.noise_seed = rng::substream(scenario.sim.noise_seed, i);
    sim.truth_delta_z_km = scenario.estimator.grid.delta_z_km;

    const Waveform tx_wave = build_tx_waveform(tx);
    auto propagated = propagate(tx_wave, link, sim);
    const Waveform rx =
        demodulate(propagated.rx, link.total_cd_ps_nm(), tx);
    const AlignedPair pair = align(rx, make_reference(tx_wave, tx));

    EstimatorConfig cfg = scenario.estimator;
    if (scenario.force_constant_beta2) cfg.beta2_override_ps2_km = beta2_ref;
    estimates[i] = estimate(pair, cfg);
  });

  TomographyMap map;
  map.axis_kind = MapAxis::frequency;
  map.axis_values = Eigen::Map<const Eigen::VectorXd>(
      frequencies_hz.data(), static_cast<Eigen::Index>(frequencies_hz.size()));
  map.grid = scenario.estimator.grid;
  const Eigen::Index m = map.grid.size();
  const Eigen::Index k = map.axis_values.size();
  map.power_dbm.resize(m, k);
  map.power_x_dbm.resize(m, k);
  map.power_y_dbm.resize(m, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto& est = estimates[static_cast<size_t>(c)];
    for (Eigen::Index r = 0; r < m; ++r) {
      const double px = est.power_x_w[r];
      const double py = est.dual() ? est.power_y_w[r] : 0.0;
      map.power_dbm(r, c) = power_dbm_or_nan(px + py);
      map.power_x_dbm(r, c) = power_dbm_or_nan(px);
      map.power_y_dbm(r, c) = est.dual() ? power_dbm_or_nan(py) : std::nan("");
    }
  }
  map.validate();
  return map;
}

TomographyMap temporal_map(const std::vector<double>& capture_times_s,
                           const std::vector<ProfileEstimate>& per_capture,
                           int window) {
  if (per_capture.empty() || capture_times_s.size() != per_capture.size())
    throw std::invalid_argument("temporal_map: empty or mismatched series");
  if (window < 1 || window % 2 == 0)
    throw std::invalid_argument("temporal_map: window must be odd and >= 1");
  if (static_cast<size_t>(window) > per_capture.size())
    throw std::invalid_argument("temporal_map: window exceeds series length");
  for (const auto& p : per_capture)
    if (!same_grid(p.grid, per_capture.front().grid))
      throw std::invalid_argument("temporal_map: mixed grids");

  const Eigen::Index m = per_capture.front().grid.size();
  const auto n = static_cast<Eigen::Index>(per_capture.size());
  const int half = window / 2;

  TomographyMap map;
  map.axis_kind = MapAxis::time;
  map.axis_values = Eigen::Map<const Eigen::VectorXd>(
      capture_times_s.data(), static_cast<Eigen::Index>(capture_times_s.size()));
  map.grid = per_capture.front().grid;
  map.power_dbm.resize(m, n);
  map.power_x_dbm.resize(m, n);
  map.power_y_dbm.resize(m, n);

  const bool dual = per_capture.front().dual();
  for (Eigen::Index t = 0; t < n; ++t) {
    // centered window, truncated at the series edges
    const Eigen::Index lo = std::max<Eigen::Index>(0, t - half);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, t + half);
    Eigen::VectorXd px = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd py = Eigen::VectorXd::Zero(m);
    for (Eigen::Index s = lo; s <= hi; ++s) {
      px += per_capture[static_cast<size_t>(s)].power_x_w;
      if (dual) py += per_capture[static_cast<size_t>(s)].power_y_w;
    }
    const double count = static_cast<double>(hi - lo + 1);
    px /= count;
    py /= count;
    for (Eigen::Index r = 0; r < m; ++r) {
      map.power_dbm(r, t) = power_dbm_or_nan(px[r] + (dual ? py[r] : 0.0));
      map.power_x_dbm(r, t) = power_dbm_or_nan(px[r]);
      map.power_y_dbm(r, t) = dual ? power_dbm_or_nan(py[r]) : std::nan("");
    }
  }
  map.validate();
  return map;
}

ProfileEstimate average_profiles(const std::vector<ProfileEstimate>& profiles,
                                 const AverageDims& dims) {
  if (profiles.empty())
    throw std::invalid_argument("average_profiles: empty list");
  const auto& first = profiles.front();
  for (const auto& p : profiles) {
    if (!same_grid(p.grid, first.grid))
      throw std::invalid_argument("average_profiles: mixed grids");
    if (p.dual() != first.dual())
      throw std::invalid_argument("average_profiles: mixed modes");
  }

  ProfileEstimate out = first;
  const double n = static_cast<double>(profiles.size());
  if (profiles.size() > 1) {
    if (!dims.time && !dims.frequency)
      throw std::invalid_argument(
          "average_profiles: ensemble given but no ensemble dimension selected");
    for (size_t i = 1; i < profiles.size(); ++i) {
      out.gamma_prime_x += profiles[i].gamma_prime_x;
      out.power_x_w += profiles[i].power_x_w;
      if (first.dual()) {
        out.gamma_prime_y += profiles[i].gamma_prime_y;
        out.power_y_w += profiles[i].power_y_w;
      }
      out.diagnostics.residual_norm += profiles[i].diagnostics.residual_norm;
    }
    out.gamma_prime_x /= n;
    out.power_x_w /= n;
    if (first.dual()) {
      out.gamma_prime_y /= n;
      out.power_y_w /= n;
    }
    out.diagnostics.residual_norm /= n;
  }

  if (dims.polarization) {
    if (!out.dual())
      throw std::invalid_argument(
          "average_profiles: polarization averaging needs dual estimates");
    out.gamma_prime_x = 0.5 * (out.gamma_prime_x + out.gamma_prime_y);
    out.power_x_w = 0.5 * (out.power_x_w + out.power_y_w);
    out.gamma_prime_y.resize(0);
    out.power_y_w.resize(0);
  }
  return out;
}

} // namespace olt
