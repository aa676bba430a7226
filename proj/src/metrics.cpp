#include "olt/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "olt/log.hpp"

namespace olt {
namespace {

constexpr double kSpanGuardKm = 2.0;

Eigen::VectorXd truth_channel(const GroundTruthProfile& truth,
                              SnrChannel channel) {
  switch (channel) {
    case SnrChannel::x: return truth.gamma_prime_x;
    case SnrChannel::y: return truth.gamma_prime_y;
    default: return 0.5 * (truth.gamma_prime_x + truth.gamma_prime_y);
  }
}

Eigen::VectorXd estimate_channel(const ProfileEstimate& est,
                                 SnrChannel channel) {
  switch (channel) {
    case SnrChannel::x: return est.gamma_prime_x;
    case SnrChannel::y:
      if (!est.dual())
        throw std::invalid_argument("snr_pp: estimate has no y channel");
      return est.gamma_prime_y;
    default: return est.scalar_profile();
  }
}

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double at(double z) const { return intercept + slope * z; }
};

LineFit fit_line(const Eigen::VectorXd& z, const Eigen::VectorXd& v) {
  const double mz = z.mean();
  const double mv = v.mean();
  const double szz = (z.array() - mz).square().sum();
  const double szv = ((z.array() - mz) * (v.array() - mv)).sum();
  LineFit f;
  f.slope = szz > 0.0 ? szv / szz : 0.0;
  f.intercept = mv - f.slope * mz;
  return f;
}

// Least squares on regressors [1, z, step_1. .., step_k]; returns step heights.
Eigen::VectorXd fit_line_with_steps(const Eigen::VectorXd& z,
                                    const Eigen::VectorXd& v,
                                    const std::vector<double>& step_positions,
                                    LineFit& line) {
  const Eigen::Index n = z.size();
  const auto k = static_cast<Eigen::Index>(step_positions.size());
  Eigen::MatrixXd a(n, 2 + k);
  a.col(0).setOnes();
  a.col(1) = z;
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      a(i, 2 + j) = z[i] > step_positions[static_cast<size_t>(j)] ? 1.0 : 0.0;
  const Eigen::VectorXd coef =
      a.colPivHouseholderQr().solve(v);
  line.intercept = coef[0];
  line.slope = coef[1];
  return coef.tail(k);
}

} // namespace

SnrReport snr_pp(const GroundTruthProfile& truth,
                 const std::vector<ProfileEstimate>& estimates,
                 SnrChannel channel) {
  if (estimates.size() < 2)
    throw std::invalid_argument("snr_pp: need at least 2 estimates");
  const Eigen::Index m = truth.grid.size();
  for (const auto& e : estimates)
    if (e.grid.size() != m ||
        (e.grid.z_positions_km - truth.grid.z_positions_km)
                .cwiseAbs()
                .maxCoeff() > 1e-9)
      throw std::invalid_argument("snr_pp: estimate grid differs from truth");
  if (estimates.size() < 8)
    OLT_LOG_INFO("snr_pp: fewer than 8 ensembles; statistics will be rough");

  const Eigen::VectorXd g_true = truth_channel(truth, channel);
  const auto n = static_cast<double>(estimates.size());

  Eigen::VectorXd mse = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
  for (const auto& e : estimates) mean += estimate_channel(e, channel);
  mean /= n;
  double spread = 0.0;
  for (const auto& e : estimates) {
    const Eigen::VectorXd g = estimate_channel(e, channel);
    mse += (g - g_true).array().square().matrix();
    spread += (g - mean).squaredNorm();
  }
  mse /= n;
  if (spread == 0.0)
    throw std::runtime_error("snr_pp: degenerate ensemble (zero variance)");

  SnrReport report;
  report.n_ensembles = static_cast<int>(estimates.size());
  report.per_position_snr_db.resize(m);
  double acc = 0.0;
  int used = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (g_true[i] > 0.0 && mse[i] > 0.0) {
      report.per_position_snr_db[i] =
          10.0 * std::log10(g_true[i] * g_true[i] / mse[i]);
      acc += report.per_position_snr_db[i];
      ++used;
    } else {
      report.per_position_snr_db[i] = std::nan("");
    }
  }
  report.mean_snr_db = used > 0 ? acc / used : std::nan("");
  return report;
}

Eigen::VectorXd spatial_correlation(const AlignedPair& pair, double z_km,
                                    const std::vector<double>& dz_values_km,
                                    const EstimatorConfig& cfg) {
  const double max_dz =
      dz_values_km.empty()
          ? 0.0
          : *std::max_element(dz_values_km.begin(), dz_values_km.end());
  if (z_km < 0.0 || z_km + max_dz > cfg.grid.length_km() + 1e-9)
    throw std::invalid_argument(
        "spatial_correlation: z + dz exceeds the link length");

  const CArray g0 = nli_kernel(pair, z_km, cfg).xx;
  const double n0 = std::sqrt(g0.abs2().sum());
  Eigen::VectorXd rho(static_cast<Eigen::Index>(dz_values_km.size()));
  for (size_t i = 0; i < dz_values_km.size(); ++i) {
    const CArray gi = nli_kernel(pair, z_km + dz_values_km[i], cfg).xx;
    const double ni = std::sqrt(gi.abs2().sum());
    rho[static_cast<Eigen::Index>(i)] =
        std::abs((g0.conjugate() * gi).sum()) / (n0 * ni);
  }
  return rho;
}

double correlation_half_width_km(const std::vector<double>& dz_values_km,
                                 const Eigen::VectorXd& rho) {
  if (rho.size() < 2 ||
      static_cast<Eigen::Index>(dz_values_km.size()) != rho.size())
    throw std::invalid_argument("correlation_half_width_km: bad inputs");
  const double floor = rho.minCoeff();
  const double level = 0.5 * (1.0 + floor);
  for (Eigen::Index i = 1; i < rho.size(); ++i) {
    if (rho[i] <= level) {
      const double f = (rho[i - 1] - level) / (rho[i - 1] - rho[i]);
      return dz_values_km[static_cast<size_t>(i - 1)] +
             f * (dz_values_km[static_cast<size_t>(i)] -
                  dz_values_km[static_cast<size_t>(i - 1)]);
    }
  }
  return dz_values_km.back();
}

const char* anomaly_kind_name(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::lumped_loss: return "lumped_loss";
    case AnomalyKind::gain_step: return "gain_step";
    default: return "pdl_flag";
  }
}

AnomalyReport detect_anomalies(const ProfileEstimate& profile,
                               const LinkSpec& link, double threshold_db) {
  link.validate();
  if (!(threshold_db > 0.0))
    throw std::invalid_argument("detect_anomalies: threshold must be > 0");

  const Eigen::Index m = profile.grid.size();
  const Eigen::VectorXd& z = profile.grid.z_positions_km;
  Eigen::VectorXd p_dbm(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double w =
        profile.power_x_w[i] + (profile.dual() ? profile.power_y_w[i] : 0.0);
    p_dbm[i] = w > 0.0 ? watts_to_dbm(w) : std::nan("");
  }

  AnomalyReport report;
  report.grid = profile.grid;
  report.residual_profile_db =
      Eigen::VectorXd::Constant(m, std::nan(""));

  // Span extents.
  std::vector<std::pair<double, double>> spans;
  double z0 = 0.0;
  for (const auto& s : link.spans) {
    spans.emplace_back(z0, z0 + s.fiber.length_km);
    z0 += s.fiber.length_km;
  }

  std::vector<LineFit> fits(spans.size());
  std::vector<double> step_sum(spans.size(), 0.0); // detected in-span heights
  for (size_t si = 0; si < spans.size(); ++si) {
    const auto [a, b] = spans[si];
    if (b - a <= 2.0 * kSpanGuardKm + 3.0 * profile.grid.delta_z_km)
      throw std::invalid_argument("detect_anomalies: span shorter than guard");
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < m; ++i)
      if (z[i] > a + kSpanGuardKm && z[i] < b - kSpanGuardKm &&
          std::isfinite(p_dbm[i]))
        idx.push_back(i);
    if (idx.size() < 6)
      throw std::invalid_argument("detect_anomalies: too few cells in span");

    Eigen::VectorXd zs(static_cast<Eigen::Index>(idx.size()));
    Eigen::VectorXd vs(static_cast<Eigen::Index>(idx.size()));
    for (size_t k = 0; k < idx.size(); ++k) {
      zs[static_cast<Eigen::Index>(k)] = z[idx[k]];
      vs[static_cast<Eigen::Index>(k)] = p_dbm[idx[k]];
    }
    LineFit line = fit_line(zs, vs);

    // First pass: candidate steps on the plain-line residual.
    Eigen::VectorXd resid = vs - (line.intercept + line.slope * zs.array()).matrix();
    std::vector<double> step_positions;
    {
      const Eigen::Index n = resid.size();
      std::vector<std::pair<Eigen::Index, double>> cands;
      for (Eigen::Index i = 3; i + 3 < n; ++i) {
        const double ahead = resid.segment(i + 1, 3).mean();
        const double behind = resid.segment(i - 3, 3).mean();
        const double step = ahead - behind;
        if (std::abs(step) >= 0.6 * threshold_db) cands.emplace_back(i, step);
      }
      // cluster consecutive candidates; keep the max-gradient cell of each
      for (size_t k = 0; k < cands.size();) {
        size_t e = k;
        while (e + 1 < cands.size() &&
               cands[e + 1].first - cands[e].first <= 2)
          ++e;
        Eigen::Index best_i = cands[k].first;
        double best_grad = 0.0;
        for (size_t q = k; q <= e; ++q) {
          const Eigen::Index i = cands[q].first;
          const double grad = std::abs(resid[i + 1] - resid[i]);
          if (grad > best_grad) {
            best_grad = grad;
            best_i = i;
          }
        }
        step_positions.push_back(0.5 * (zs[best_i] + zs[best_i + 1]));
        k = e + 1;
      }
    }

    // Second pass: joint line+step fit for unbiased heights (a plain line
    // fit tilts across a step and biases the 3-cell height readout). The
    // reported magnitude comes from a local refit around each step so that
    // far span-tail cells, where the estimate is weakest, cannot drag it.
    if (!step_positions.empty()) {
      const Eigen::VectorXd heights =
          fit_line_with_steps(zs, vs, step_positions, line);
      for (size_t k = 0; k < step_positions.size(); ++k) {
        step_sum[si] += heights[static_cast<Eigen::Index>(k)];
        std::vector<Eigen::Index> local;
        for (Eigen::Index i = 0; i < zs.size(); ++i)
          if (std::abs(zs[i] - step_positions[k]) <= 10.0) local.push_back(i);
        Eigen::VectorXd zl(static_cast<Eigen::Index>(local.size()));
        Eigen::VectorXd vl(static_cast<Eigen::Index>(local.size()));
        for (size_t q = 0; q < local.size(); ++q) {
          zl[static_cast<Eigen::Index>(q)] = zs[local[q]];
          vl[static_cast<Eigen::Index>(q)] = vs[local[q]];
        }
        std::vector<double> local_steps;
        for (double sp : step_positions)
          if (sp > zl.minCoeff() && sp < zl.maxCoeff()) local_steps.push_back(sp);
        size_t own = 0;
        for (size_t q = 0; q < local_steps.size(); ++q)
          if (local_steps[q] == step_positions[k]) own = q;
        LineFit local_line;
        const Eigen::VectorXd local_heights =
            fit_line_with_steps(zl, vl, local_steps, local_line);
        const double h = local_heights[static_cast<Eigen::Index>(own)];
        if (std::abs(h) >= threshold_db)
          report.events.push_back(
              {step_positions[k], h,
               h < 0.0 ? AnomalyKind::lumped_loss : AnomalyKind::gain_step});
      }
    }
    fits[si] = line;
    for (Eigen::Index i : idx)
      report.residual_profile_db[i] = p_dbm[i] - line.at(z[i]);
  }

  // Boundary checks against the declared amplifier gains. The left-span
  // level includes any steps detected inside it.
  for (size_t si = 0; si + 1 < spans.size(); ++si) {
    const double zb = spans[si].second;
    const double left_level = fits[si].at(zb) + step_sum[si];
    const double measured = fits[si + 1].at(zb) - left_level;
    double expected = 0.0;
    bool fixed_output = false;
    for (const auto& e : link.spans[si + 1].elements_at_input) {
      if (const auto* amp = std::get_if<Amplifier>(&e)) {
        if (amp->mode == AmplifierMode::fixed_gain)
          expected += amp->gain_db;
        else
          fixed_output = true;
      }
    }
    double deviation;
    if (fixed_output) {
      // Output level is pinned by the amplifier; compare against it directly.
      double target_dbm = 0.0;
      for (const auto& e : link.spans[si + 1].elements_at_input)
        if (const auto* amp = std::get_if<Amplifier>(&e))
          if (amp->mode == AmplifierMode::fixed_output_power)
            target_dbm = amp->output_power_dbm;
      deviation = fits[si + 1].at(zb) - target_dbm;
      (void)measured;
    } else {
      deviation = measured - expected;
    }
    if (std::abs(deviation) >= threshold_db)
      report.events.push_back({zb, deviation, AnomalyKind::gain_step});
  }

  // Persistent polarization split -> PDL flag.
  if (profile.dual()) {
    const Eigen::VectorXd split = polarization_split_db(profile);
    // 3-cell NaN-aware smoothing, then peak and onset.
    Eigen::VectorXd smooth = Eigen::VectorXd::Constant(m, std::nan(""));
    for (Eigen::Index i = 1; i + 1 < m; ++i) {
      double acc = 0.0;
      int cnt = 0;
      for (Eigen::Index k = i - 1; k <= i + 1; ++k)
        if (std::isfinite(split[k])) {
          acc += split[k];
          ++cnt;
        }
      if (cnt == 3) smooth[i] = acc / cnt;
    }
    double peak = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
      if (std::isfinite(smooth[i]) && smooth[i] > peak) peak = smooth[i];
    if (peak >= threshold_db) {
      double onset = z[0];
      for (Eigen::Index i = 0; i < m; ++i)
        if (std::isfinite(smooth[i]) && smooth[i] >= 0.5 * peak) {
          onset = z[i];
          break;
        }
      report.events.push_back({onset, peak, AnomalyKind::pdl_flag});
    }
  }

  std::sort(report.events.begin(), report.events.end(),
            [](const AnomalyEvent& a, const AnomalyEvent& b) {
              return a.z_km < b.z_km;
            });
  return report;
}

} // namespace olt
