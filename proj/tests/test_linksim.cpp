#include <doctest.h>

#include "olt/linksim.hpp"
#include "olt/waveform_ops.hpp"
#include "test_util.hpp"

using namespace olt;
using namespace olt::test;

namespace {

LinkSpec simple_link(double length_km, double alpha = 0.0, double d = 17.0,
                     double gamma = 0.0) {
  LinkSpec link;
  Span span;
  span.fiber = FiberParams{alpha, d, gamma, length_km};
  link.spans.push_back(span);
  return link;
}

LinkSpec baseline_2x50() {
  LinkSpec link;
  Span s1;
  s1.fiber = FiberParams{0.2, 17.0, 1.3, 50.0};
  Span s2 = s1;
  s2.elements_at_input.push_back(Amplifier{10.0, 5.0, AmplifierMode::fixed_gain, 0.0});
  link.spans = {s1, s2};
  link.post_link_elements.push_back(
      Amplifier{10.0, 5.0, AmplifierMode::fixed_gain, 0.0});
  return link;
}

Waveform tx_small(double power_dbm = 3.0, Eigen::Index n_symbols = 2048,
                  uint64_t seed = 21) {
  TxConfig cfg;
  cfg.symbol_rate_baud = 64e9;
  cfg.oversampling = 8;
  cfg.n_symbols = n_symbols;
  cfg.launch_power_dbm = power_dbm;
  cfg.seed = seed;
  return build_tx_waveform(cfg);
}

} // namespace

TEST_CASE("linear limit: gamma = 0, alpha = 0 reduces to pure dispersion") {
  const Waveform w = tx_small();
  PropagateOptions opts;
  opts.step_km = 0.5;
  opts.truth_delta_z_km = 1.0;
  const auto res = propagate(w, simple_link(40.0), opts);
  const double b2 = beta2_from_dispersion(17.0, w.center_frequency_hz);
  const Waveform expect = apply_dispersion(w, b2, 40.0);
  CHECK(rms_diff(res.rx, expect) / rms(expect.x) < 1e-9);
}

TEST_CASE("SPM limit: D = 0 gives the closed-form Manakov phase rotation") {
  const Waveform w = tx_small(6.0);
  PropagateOptions opts;
  opts.step_km = 0.5;
  const double gamma = 1.3, L = 20.0;
  const auto res = propagate(w, simple_link(L, 0.0, 0.0, gamma), opts);
  Waveform expect = w;
  const CArray rot =
      (Complex(0.0, -(8.0 / 9.0) * gamma * L) * (w.x.abs2() + w.y.abs2()))
          .exp();
  expect.x *= rot;
  expect.y *= rot;
  CHECK(rms_diff(res.rx, expect) / rms(expect.x) < 1e-7);
}

TEST_CASE("baseline truth profile decays at the span slope and steps at the amp") {
  const Waveform w = tx_small(3.0, 1024);
  PropagateOptions opts;
  opts.step_km = 0.2;
  opts.noise_seed = 5;
  const auto res = propagate(w, baseline_2x50(), opts);
  const auto& t = res.truth;
  REQUIRE(t.grid.size() == 100);

  // per-span slope ~ -0.2 dB/km
  auto slope_db_per_km = [&](Eigen::Index i0, Eigen::Index i1) {
    const double p0 = watts_to_dbm(t.power_x_w[i0] + t.power_y_w[i0]);
    const double p1 = watts_to_dbm(t.power_x_w[i1] + t.power_y_w[i1]);
    return (p1 - p0) / (t.grid.z_positions_km[i1] - t.grid.z_positions_km[i0]);
  };
  CHECK(slope_db_per_km(2, 47) == doctest::Approx(-0.2).epsilon(1e-3));
  CHECK(slope_db_per_km(52, 97) == doctest::Approx(-0.2).epsilon(1e-3));

  // +10 dB step across the span boundary (cell 49 -> 50), minus one cell decay
  const double step =
      watts_to_dbm(t.power_x_w[50] + t.power_y_w[50]) -
      watts_to_dbm(t.power_x_w[49] + t.power_y_w[49]);
  CHECK(step == doctest::Approx(10.0 - 0.2).epsilon(0.02));

  // launch cell holds the launch power less the in-cell decay
  const double p0_dbm = watts_to_dbm(t.power_x_w[0] + t.power_y_w[0]);
  CHECK(p0_dbm == doctest::Approx(3.0 - 0.1).epsilon(0.05));

  // gamma-prime bookkeeping
  for (Eigen::Index m : {0, 25, 60, 99})
    CHECK(t.gamma_prime_x[m] ==
          doctest::Approx((8.0 / 9.0) * 1.3 * t.power_x_w[m]).epsilon(1e-12));
}

TEST_CASE("energy bookkeeping without noise") {
  const Waveform w = tx_small(3.0, 1024);
  LinkSpec link = baseline_2x50();
  // zero the noise so gains/losses are exact
  for (auto& s : link.spans)
    for (auto& e : s.elements_at_input)
      if (auto* amp = std::get_if<Amplifier>(&e)) amp->noise_figure_db = -300.0;
  for (auto& e : link.post_link_elements)
    if (auto* amp = std::get_if<Amplifier>(&e)) amp->noise_figure_db = -300.0;

  PropagateOptions opts;
  opts.step_km = 0.2;
  const auto res = propagate(w, link, opts);
  // two spans of -10 dB, two amps of +10 dB: net unity
  CHECK(res.rx.mean_power_w() ==
        doctest::Approx(w.mean_power_w()).epsilon(0.002));
}

TEST_CASE("step-halving convergence") {
  const Waveform w = tx_small(6.0, 1024);
  LinkSpec link = simple_link(40.0, 0.2, 17.0, 1.3);
  PropagateOptions coarse, mid, fine;
  coarse.step_km = 2.0;
  mid.step_km = 1.0;
  fine.step_km = 0.125;
  const Waveform ref = propagate(w, link, fine).rx;
  const double e_coarse = rms_diff(propagate(w, link, coarse).rx, ref);
  const double e_mid = rms_diff(propagate(w, link, mid).rx, ref);
  CHECK(e_coarse / e_mid >= 2.0);
}

TEST_CASE("PDL element splits power per its convention") {
  const Waveform w = tx_small(0.0, 1024);
  LinkSpec link = simple_link(1.0, 0.0, 0.0, 0.0);
  link.spans[0].elements_at_input.push_back(
      PdlElement{3.0, 0.0, 0.0, 0.0});
  PropagateOptions opts;
  opts.step_km = 0.5;
  const auto res = propagate(w, link, opts);
  // aligned with the low-loss axis: +pdl/2 dB in power, orthogonal: -pdl/2
  const double gx =
      watts_to_dbm(res.rx.mean_power_x_w()) - watts_to_dbm(w.mean_power_x_w());
  const double gy =
      watts_to_dbm(res.rx.mean_power_y_w()) - watts_to_dbm(w.mean_power_y_w());
  CHECK(gx == doctest::Approx(+1.5).epsilon(1e-9));
  CHECK(gy == doctest::Approx(-1.5).epsilon(1e-9));

  // truth tracks the split on top of the sampled input imbalance
  const double input_imbalance_db =
      linear_to_db(w.mean_power_x_w() / w.mean_power_y_w());
  CHECK(linear_to_db(res.truth.power_x_w[0] / res.truth.power_y_w[0]) ==
        doctest::Approx(3.0 + input_imbalance_db).epsilon(1e-9));
}

TEST_CASE("PDL with a rotated axis mixes polarizations but stays loss-neutral") {
  const Waveform w = tx_small(0.0, 1024);
  LinkSpec link = simple_link(1.0, 0.0, 0.0, 0.0);
  link.spans[0].elements_at_input.push_back(
      PdlElement{3.0, M_PI / 4, 0.0, 0.0});
  PropagateOptions opts;
  opts.step_km = 0.5;
  const auto res = propagate(w, link, opts);
  // equal input powers at 45 degrees to the axis: total power preserved
  CHECK(res.rx.mean_power_w() ==
        doctest::Approx(w.mean_power_w()).epsilon(2e-2));
}

TEST_CASE("propagate rejects a non-dividing step") {
  const Waveform w = tx_small(0.0, 256);
  PropagateOptions opts;
  opts.step_km = 0.3;
  CHECK_THROWS_AS(propagate(w, simple_link(1.0), opts), std::invalid_argument);
}

TEST_CASE("fixed-output amplifier restores the configured power") {
  const Waveform w = tx_small(3.0, 1024);
  LinkSpec link = simple_link(50.0, 0.2, 17.0, 0.0);
  link.post_link_elements.push_back(
      Amplifier{0.0, -300.0, AmplifierMode::fixed_output_power, 3.0});
  PropagateOptions opts;
  opts.step_km = 0.5;
  const auto res = propagate(w, link, opts);
  CHECK(watts_to_dbm(res.rx.mean_power_w()) == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("propagation is deterministic given the seed") {
  const Waveform w = tx_small(3.0, 512);
  PropagateOptions opts;
  opts.step_km = 0.5;
  opts.noise_seed = 77;
  const auto a = propagate(w, baseline_2x50(), opts);
  const auto b = propagate(w, baseline_2x50(), opts);
  CHECK((a.rx.x == b.rx.x).all());
  CHECK((a.rx.y == b.rx.y).all());
  opts.noise_seed = 78;
  const auto c = propagate(w, baseline_2x50(), opts);
  CHECK(!(a.rx.x == c.rx.x).all());
}

TEST_CASE("VOA schedule lookup") {
  Voa voa;
  voa.schedule = {{0.0, 0.0}, {5.0, 2.0}};
  CHECK(voa_attenuation_db(voa, -1.0) == 0.0);
  CHECK(voa_attenuation_db(voa, 0.0) == 0.0);
  CHECK(voa_attenuation_db(voa, 4.999) == 0.0);
  CHECK(voa_attenuation_db(voa, 5.0) == 2.0);
  CHECK(voa_attenuation_db(voa, 50.0) == 2.0);
}

TEST_CASE("capture_series applies the VOA schedule per capture time") {
  const Waveform w = tx_small(0.0, 512);
  LinkSpec link = simple_link(2.0, 0.0, 0.0, 0.0);
  Voa voa;
  voa.position_km = 0.0;
  voa.schedule = {{0.0, 0.0}, {5.0, 2.0}};
  link.spans[0].elements_at_input.push_back(voa);

  PropagateOptions opts;
  opts.step_km = 0.5;
  opts.truth_delta_z_km = 1.0;
  const auto series = capture_series(w, link, opts, 0.55, 12);
  REQUIRE(series.size() == 12);
  for (int k = 0; k < 12; ++k) {
    const double expected_db = (0.55 * k >= 5.0) ? -2.0 : 0.0;
    const double got =
        watts_to_dbm(series[k].truth.power_x_w[0] + series[k].truth.power_y_w[0]);
    CHECK(got == doctest::Approx(0.0 + expected_db).epsilon(1e-6));
    CHECK(series[k].time_s == doctest::Approx(0.55 * k));
  }

  SUBCASE("constant schedule gives identical truth profiles") {
    LinkSpec flat = simple_link(2.0, 0.2, 17.0, 0.0);
    const auto s2 = capture_series(w, flat, opts, 0.55, 3);
    for (int k = 1; k < 3; ++k)
      CHECK((s2[k].truth.power_x_w - s2[0].truth.power_x_w).norm() == 0.0);
  }
  SUBCASE("n_captures = 1 equals a single propagate") {
    const auto one = capture_series(w, link, opts, 0.55, 1);
    const auto single = propagate(w, link, opts);
    CHECK((one[0].rx.x == single.rx.x).all());
  }
}
