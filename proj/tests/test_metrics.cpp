#include <doctest.h>

#include <random>

#include "olt/metrics.hpp"
#include "test_pipeline.hpp"
#include "test_util.hpp"

using namespace olt;
using namespace olt::test;

namespace {

GroundTruthProfile synthetic_truth(const PositionGrid& grid, double power_w) {
  GroundTruthProfile t;
  t.grid = grid;
  t.power_x_w = Eigen::VectorXd::Constant(grid.size(), power_w);
  t.power_y_w = t.power_x_w;
  t.gamma_prime_x = (8.0 / 9.0) * 1.3 * t.power_x_w;
  t.gamma_prime_y = t.gamma_prime_x;
  return t;
}

std::vector<ProfileEstimate> noisy_ensemble(const GroundTruthProfile& truth,
                                            double sigma, int count,
                                            uint64_t seed) {
  std::mt19937_64 engine(seed);
  auto gauss = [&] {
    const double u1 = (static_cast<double>(engine() >> 11) + 1.0) * 0x1p-53;
    const double u2 = (static_cast<double>(engine() >> 11) + 1.0) * 0x1p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  };
  std::vector<ProfileEstimate> out;
  for (int k = 0; k < count; ++k) {
    ProfileEstimate e;
    e.grid = truth.grid;
    e.gamma_prime_x = truth.gamma_prime_x;
    e.gamma_prime_y = truth.gamma_prime_y;
    for (Eigen::Index i = 0; i < truth.grid.size(); ++i) {
      e.gamma_prime_x[i] += sigma * gauss();
      e.gamma_prime_y[i] += sigma * gauss();
    }
    e.power_x_w = 9.0 / (8.0 * 1.3) * e.gamma_prime_x;
    e.power_y_w = 9.0 / (8.0 * 1.3) * e.gamma_prime_y;
    out.push_back(std::move(e));
  }
  return out;
}

ProfileEstimate profile_from_dbm(const PositionGrid& grid,
                                 const Eigen::VectorXd& dbm_total) {
  ProfileEstimate est;
  est.grid = grid;
  est.power_x_w.resize(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    est.power_x_w[i] = 0.5 * dbm_to_watts(dbm_total[i]);
  est.power_y_w = est.power_x_w;
  est.gamma_prime_x = (8.0 / 9.0) * 1.3 * est.power_x_w;
  est.gamma_prime_y = est.gamma_prime_x;
  return est;
}

LinkSpec two_span_link(double l1, double l2, double gain2_db) {
  LinkSpec link;
  Span s1;
  s1.fiber = FiberParams{0.2, 17.0, 1.3, l1};
  Span s2;
  s2.fiber = FiberParams{0.2, 17.0, 1.3, l2};
  s2.elements_at_input.push_back(
      Amplifier{gain2_db, 5.0, AmplifierMode::fixed_gain, 0.0});
  link.spans = {s1, s2};
  return link;
}

} // namespace

TEST_CASE("snr_pp matches a known synthetic noise level") {
  const PositionGrid grid = make_grid(50.0, 1.0);
  const GroundTruthProfile truth = synthetic_truth(grid, 1e-3);
  const double sigma = 2e-5;
  const auto ensemble = noisy_ensemble(truth, sigma, 64, 5);

  const SnrReport report = snr_pp(truth, ensemble, SnrChannel::x);
  CHECK(report.n_ensembles == 64);
  const double expected_db =
      10.0 * std::log10(std::pow(truth.gamma_prime_x[0] / sigma, 2));
  // 3-sigma confidence on a chi-square mean over 50 cells x 64 draws
  CHECK(report.mean_snr_db == doctest::Approx(expected_db).epsilon(0.02));

  SUBCASE("doubling the ensemble leaves the SNR in place") {
    const auto more = noisy_ensemble(truth, sigma, 128, 6);
    const SnrReport r2 = snr_pp(truth, more, SnrChannel::x);
    CHECK(std::abs(r2.mean_snr_db - report.mean_snr_db) < 0.5);
  }
  SUBCASE("pol averaging gains about 3 dB for independent noise") {
    const SnrReport pol = snr_pp(truth, ensemble, SnrChannel::pol_mean);
    CHECK(pol.mean_snr_db - report.mean_snr_db ==
          doctest::Approx(3.0).epsilon(0.2));
  }
  SUBCASE("common rescaling cancels in the ratio") {
    GroundTruthProfile truth2 = truth;
    truth2.gamma_prime_x *= 7.0;
    truth2.gamma_prime_y *= 7.0;
    auto scaled = ensemble;
    for (auto& e : scaled) {
      e.gamma_prime_x *= 7.0;
      e.gamma_prime_y *= 7.0;
    }
    const SnrReport r3 = snr_pp(truth2, scaled, SnrChannel::x);
    CHECK(r3.mean_snr_db == doctest::Approx(report.mean_snr_db).epsilon(1e-9));
  }
  SUBCASE("degenerate ensemble is rejected") {
    std::vector<ProfileEstimate> same(2);
    same[0] = ensemble[0];
    same[1] = ensemble[0];
    CHECK_THROWS_WITH_AS(snr_pp(truth, same, SnrChannel::x),
                         doctest::Contains("degenerate"), std::runtime_error);
  }
  SUBCASE("fewer than two estimates is an error") {
    std::vector<ProfileEstimate> one = {ensemble[0]};
    CHECK_THROWS_AS(snr_pp(truth, one, SnrChannel::x), std::invalid_argument);
  }
}

TEST_CASE("spatial correlation: normalization, stationarity, monotone narrowing") {
  TxConfig cfg;
  cfg.constellation.kind = ConstellationKind::gaussian;
  cfg.symbol_rate_baud = 64e9;
  cfg.oversampling = 4;
  cfg.rolloff = 0.0;
  cfg.n_symbols = 2048;
  cfg.seed = 51;
  const Waveform tx = build_tx_waveform(cfg);
  const ReferenceBundle ref = make_reference(tx, cfg);
  AlignedPair pair;
  pair.rx = ref.ref;
  pair.ref = ref.ref;
  pair.launch_coherency = ref.launch_coherency;

  EstimatorConfig est;
  est.grid = make_grid(60.0, 1.0);
  est.beta2_override_ps2_km = -20.6;
  est.mode = EstimatorMode::single_pol;
  est.edge_exclusion_samples = 0;

  std::vector<double> dzs;
  for (int i = 0; i <= 30; ++i) dzs.push_back(0.2 * i);

  const Eigen::VectorXd rho = spatial_correlation(pair, 10.0, dzs, est);
  CHECK(rho[0] == doctest::Approx(1.0).epsilon(1e-12));

  SUBCASE("stationarity: the anchor position matters only through finite-sample wiggle") {
    const Eigen::VectorXd rho2 = spatial_correlation(pair, 25.0, dzs, est);
    CHECK((rho2 - rho).cwiseAbs().maxCoeff() < 0.05);
  }
  SUBCASE("half width narrows when the bandwidth doubles") {
    TxConfig wide = cfg;
    wide.symbol_rate_baud = 128e9;
    const Waveform tx2 = build_tx_waveform(wide);
    const ReferenceBundle ref2 = make_reference(tx2, wide);
    AlignedPair pair2;
    pair2.rx = ref2.ref;
    pair2.ref = ref2.ref;
    pair2.launch_coherency = ref2.launch_coherency;
    const Eigen::VectorXd rho_wide =
        spatial_correlation(pair2, 10.0, dzs, est);
    CHECK(correlation_half_width_km(dzs, rho_wide) <
          correlation_half_width_km(dzs, rho) / 1.5);
  }
  SUBCASE("out-of-range query is rejected") {
    CHECK_THROWS_AS(spatial_correlation(pair, 59.0, {2.0}, est),
                    std::invalid_argument);
  }
}

TEST_CASE("detect_anomalies on synthetic profiles") {
  const LinkSpec link = two_span_link(50.0, 50.0, 10.0);
  const PositionGrid grid = make_grid(100.0, 1.0);
  // clean piecewise profile: 0 dBm launch, -0.2 dB/km, +10 dB at 50 km
  Eigen::VectorXd clean(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double z = grid.z_positions_km[i];
    clean[i] = (z < 50.0) ? -0.2 * z : -0.2 * z + 10.0;
  }

  SUBCASE("clean profile yields no events") {
    const AnomalyReport r =
        detect_anomalies(profile_from_dbm(grid, clean), link, 0.5);
    CHECK(r.events.empty());
  }
  SUBCASE("mid-span loss is found with the right magnitude and position") {
    Eigen::VectorXd with_loss = clean;
    for (Eigen::Index i = 0; i < grid.size(); ++i)
      if (grid.z_positions_km[i] > 25.0) with_loss[i] -= 1.5;
    const AnomalyReport r =
        detect_anomalies(profile_from_dbm(grid, with_loss), link, 0.8);
    REQUIRE(r.events.size() == 1);
    CHECK(r.events[0].kind == AnomalyKind::lumped_loss);
    CHECK(r.events[0].magnitude_db == doctest::Approx(-1.5).epsilon(0.05));
    CHECK(r.events[0].z_km == doctest::Approx(25.0).epsilon(0.08));
  }
  SUBCASE("two losses in different spans are attributed correctly") {
    Eigen::VectorXd two = clean;
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      if (grid.z_positions_km[i] > 20.0) two[i] -= 1.0;
      if (grid.z_positions_km[i] > 80.0) two[i] -= 2.0;
    }
    const AnomalyReport r =
        detect_anomalies(profile_from_dbm(grid, two), link, 0.6);
    REQUIRE(r.events.size() == 2);
    CHECK(r.events[0].z_km == doctest::Approx(20.0).epsilon(0.1));
    CHECK(r.events[1].z_km == doctest::Approx(80.0).epsilon(0.05));
    CHECK(r.events[0].magnitude_db == doctest::Approx(-1.0).epsilon(0.1));
    CHECK(r.events[1].magnitude_db == doctest::Approx(-2.0).epsilon(0.1));
  }
  SUBCASE("constant offsets do not change the events") {
    Eigen::VectorXd with_loss = clean;
    for (Eigen::Index i = 0; i < grid.size(); ++i)
      if (grid.z_positions_km[i] > 33.0) with_loss[i] -= 1.2;
    const AnomalyReport a =
        detect_anomalies(profile_from_dbm(grid, with_loss), link, 0.8);
    const AnomalyReport b = detect_anomalies(
        profile_from_dbm(grid, with_loss.array() + 4.0), link, 0.8);
    REQUIRE(a.events.size() == b.events.size());
    for (size_t i = 0; i < a.events.size(); ++i) {
      CHECK(a.events[i].z_km == b.events[i].z_km);
      CHECK(a.events[i].magnitude_db ==
            doctest::Approx(b.events[i].magnitude_db).epsilon(1e-9));
    }
  }
  SUBCASE("a boundary attenuation shows up as a gain_step deviation") {
    Eigen::VectorXd voa = clean;
    for (Eigen::Index i = 0; i < grid.size(); ++i)
      if (grid.z_positions_km[i] > 50.0) voa[i] -= 2.0; // VOA after the amp
    const AnomalyReport r =
        detect_anomalies(profile_from_dbm(grid, voa), link, 0.8);
    REQUIRE(r.events.size() == 1);
    CHECK(r.events[0].kind == AnomalyKind::gain_step);
    CHECK(r.events[0].z_km == doctest::Approx(50.0));
    CHECK(r.events[0].magnitude_db == doctest::Approx(-2.0).epsilon(0.05));
  }
  SUBCASE("a persistent polarization split raises a pdl flag") {
    ProfileEstimate est = profile_from_dbm(grid, clean);
    for (Eigen::Index i = 0; i < grid.size(); ++i)
      if (grid.z_positions_km[i] > 50.0) {
        est.power_x_w[i] *= db_to_linear(+1.5);
        est.power_y_w[i] *= db_to_linear(-1.5);
      }
    const AnomalyReport r = detect_anomalies(est, link, 0.8);
    bool found = false;
    for (const auto& e : r.events)
      if (e.kind == AnomalyKind::pdl_flag) {
        found = true;
        CHECK(e.magnitude_db == doctest::Approx(3.0).epsilon(0.05));
        CHECK(e.z_km == doctest::Approx(51.0).epsilon(0.05));
      }
    CHECK(found);
  }
  SUBCASE("span shorter than the guard is rejected") {
    const LinkSpec tiny = two_span_link(3.0, 50.0, 10.0);
    CHECK_THROWS_AS(
        detect_anomalies(profile_from_dbm(grid, clean), tiny,
                         0.5),
        std::invalid_argument);
  }
}

TEST_CASE("snr_pp grows with capture count for fresh patterns") {
  // With independent symbol patterns per capture, averaging N profiles
  // improves the SNR close to 10 log10 N; the shared-pattern counterpart
  // saturates at the pattern floor. Run hot (9 dBm) so the pattern effect is
  // resolvable against the ASE noise at this capture size; the acceptance
  // suite runs the full-scale version.
  PipelineSetup base = baseline_setup(4096, 9.0, 61);
  EstimatorConfig cfg = estimator_for(base);

  const int n_real = 6;
  const int n_avg = 6;
  std::vector<ProfileEstimate> singles, fresh_avg, repeat_avg;
  GroundTruthProfile truth;
  for (int r = 0; r < n_real; ++r) {
    std::vector<ProfileEstimate> fresh, repeat;
    for (int k = 0; k < n_avg; ++k) {
      PipelineSetup s_fresh = base;
      s_fresh.tx.seed = 1000 + 10 * r + k; // fresh pattern each capture
      s_fresh.sim.noise_seed = 500 + 10 * r + k;
      const PipelineRun run = run_pipeline(s_fresh);
      fresh.push_back(estimate(run.pair, cfg));

      PipelineSetup s_rep = base; // shared pattern, fresh noise
      s_rep.sim.noise_seed = 700 + 10 * r + k;
      const PipelineRun run2 = run_pipeline(s_rep);
      repeat.push_back(estimate(run2.pair, cfg));
      if (r == 0 && k == 0) truth = run2.truth;
      if (k == 0) singles.push_back(repeat.back());
    }
    AverageDims dims;
    dims.time = true;
    fresh_avg.push_back(average_profiles(fresh, dims));
    repeat_avg.push_back(average_profiles(repeat, dims));
  }
  const double snr1 = snr_pp(truth, singles, SnrChannel::x).mean_snr_db;
  const double snr_fresh =
      snr_pp(truth, fresh_avg, SnrChannel::x).mean_snr_db;
  const double snr_repeat =
      snr_pp(truth, repeat_avg, SnrChannel::x).mean_snr_db;
  CAPTURE(snr1);
  CAPTURE(snr_fresh);
  CAPTURE(snr_repeat);
  // fresh patterns track the theoretical 10 log10(6) = 7.8 dB gain
  CHECK(snr_fresh - snr1 == doctest::Approx(10.0 * std::log10(6.0)).epsilon(0.3));
  // repeated patterns fall short of it
  CHECK(snr_repeat < snr_fresh - 0.5);
}
