#include <doctest.h>

#include <filesystem>

#include "olt/fft.hpp"
#include "olt/types.hpp"
#include "olt/waveform_io.hpp"
#include "olt/waveform_ops.hpp"
#include "test_util.hpp"

using namespace olt;
using namespace olt::test;

TEST_CASE("dbm/watts conversions") {
  CHECK(dbm_to_watts(0.0) == doctest::Approx(1.0e-3).epsilon(1e-12));
  CHECK(dbm_to_watts(3.0) == doctest::Approx(1.9953e-3).epsilon(1e-4));
  CHECK(dbm_to_watts(19.3) == doctest::Approx(85.11e-3).epsilon(1e-4));
  for (double p : {-31.7, 0.0, 3.0, 19.3, 27.2})
    CHECK(watts_to_dbm(dbm_to_watts(p)) == doctest::Approx(p).epsilon(1e-12));
  CHECK_THROWS_AS(watts_to_dbm(0.0), std::domain_error);
  CHECK_THROWS_AS(watts_to_dbm(-1.0), std::domain_error);
}

TEST_CASE("beta2 <-> D conversion is bijective and matches the analytic value") {
  const double f = 193.4e12;
  const double b2 = beta2_from_dispersion(17.0, f);
  // -D lambda^2 / (2 pi c) at 1550.1 nm
  CHECK(b2 == doctest::Approx(-21.68).epsilon(0.005));
  CHECK(dispersion_from_beta2(b2, f) == doctest::Approx(17.0).epsilon(1e-12));
}

TEST_CASE("apply_dispersion: round trip, zero length, linearity, additivity") {
  const Waveform w = random_waveform(4096, 64e9);
  const double b2 = -21.0;

  SUBCASE("forward then inverse restores the input") {
    const Waveform fwd = apply_dispersion(w, b2, 80.0);
    const Waveform back =
        apply_dispersion(fwd, b2, 80.0, DispersionSign::inverse);
    CHECK(rms_diff(back, w) / rms(w.x) < 1e-9);
  }
  SUBCASE("zero length is the identity") {
    const Waveform out = apply_dispersion(w, b2, 0.0);
    CHECK(rms_diff(out, w) == 0.0);
  }
  SUBCASE("energy is preserved") {
    const Waveform out = apply_dispersion(w, b2, 120.0);
    const double e_in = w.x.abs2().sum() + w.y.abs2().sum();
    const double e_out = out.x.abs2().sum() + out.y.abs2().sum();
    CHECK(std::abs(e_out - e_in) / e_in < 1e-10);
  }
  SUBCASE("linearity") {
    const Waveform v = random_waveform(4096, 64e9, 11);
    Waveform sum = w;
    sum.x = 0.7 * w.x + Complex(0.0, 1.3) * v.x;
    sum.y = 0.7 * w.y + Complex(0.0, 1.3) * v.y;
    const Waveform lhs = apply_dispersion(sum, b2, 50.0);
    const Waveform dw = apply_dispersion(w, b2, 50.0);
    const Waveform dv = apply_dispersion(v, b2, 50.0);
    Waveform rhs = dw;
    rhs.x = 0.7 * dw.x + Complex(0.0, 1.3) * dv.x;
    rhs.y = 0.7 * dw.y + Complex(0.0, 1.3) * dv.y;
    CHECK(rms_diff(lhs, rhs) / rms(lhs.x) < 1e-10);
  }
  SUBCASE("composition adds lengths") {
    const Waveform two = apply_dispersion(apply_dispersion(w, b2, 30.0), b2, 45.0);
    const Waveform one = apply_dispersion(w, b2, 75.0);
    CHECK(rms_diff(two, one) / rms(one.x) < 1e-10);
  }
  SUBCASE("zero-length waveform rejected") {
    Waveform empty;
    empty.sample_rate_hz = 1.0;
    CHECK_THROWS_AS(apply_dispersion(empty, b2, 1.0), std::invalid_argument);
  }
}

TEST_CASE("apply_dispersion walk-off matches the analytic group delay") {
  // Narrowband carriers at +/- f0 walk apart by -beta2 * L * 2pi * 2 f0;
  // the oracle is the cross-correlation peak lag against the undispersed
  // envelope, compared with the group-delay formula.
  const Eigen::Index n = 16384;
  const double rate = 64e9;
  const double f0 = 8e9;
  const double b2 = -21.0, L = 100.0;

  TxConfig narrow;
  narrow.constellation.kind = ConstellationKind::gaussian;
  narrow.symbol_rate_baud = 1e9;
  narrow.oversampling = 64;
  narrow.rolloff = 0.1;
  narrow.n_symbols = n / 64;
  narrow.launch_power_dbm = 0.0;
  Waveform w = build_tx_waveform(narrow);
  REQUIRE(w.size() == n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Complex up =
        std::polar(1.0, 2.0 * M_PI * f0 * static_cast<double>(i) / rate);
    w.x[i] *= up;
    w.y[i] *= std::conj(up);
  }

  const Waveform d = apply_dispersion(w, b2, L);
  auto peak_lag = [&](const CArray& a, const CArray& b) {
    CArray xc = fft::forward(a) * fft::forward(b).conjugate();
    fft::inverse_inplace(xc);
    Eigen::Index best = 0;
    double top = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::abs(xc[i]) > top) {
        top = std::abs(xc[i]);
        best = i;
      }
    return best > n / 2 ? best - n : best;
  };
  const auto lag_x = peak_lag(d.x, w.x);
  const auto lag_y = peak_lag(d.y, w.y);
  const double tau_samples = -b2 * 1e-24 * L * (2.0 * M_PI * 2.0 * f0) * rate;
  CHECK(std::abs(static_cast<double>(lag_x - lag_y) - tau_samples) <= 1.0);
}

TEST_CASE("rrc_filter: impulse energy, cascade, brick wall limit") {
  const Eigen::Index n = 4096;
  const double rs = 32e9;
  const double rate = 4 * rs;

  SUBCASE("impulse response is symmetric with unit energy") {
    Waveform w;
    w.x = CArray::Zero(n);
    w.y = CArray::Zero(n);
    w.x[0] = 1.0;
    w.sample_rate_hz = rate;
    const Waveform h = rrc_filter(w, rs, 0.1);
    CHECK(std::abs(h.x.abs2().sum() - 1.0) < 1e-9);
    for (Eigen::Index k = 1; k < 8; ++k)
      CHECK(std::abs(h.x[k] - h.x[n - k]) < 1e-12);
  }
  SUBCASE("two cascaded RRC recover symbols at symbol instants") {
    std::mt19937_64 engine(3);
    const Eigen::Index n_sym = n / 4;
    Waveform w;
    w.x = CArray::Zero(n);
    w.y = CArray::Zero(n);
    CArray sym(n_sym);
    for (Eigen::Index i = 0; i < n_sym; ++i) {
      sym[i] = Complex(engine() & 1 ? 1.0 : -1.0, engine() & 2 ? 1.0 : -1.0);
      w.x[4 * i] = sym[i];
    }
    w.sample_rate_hz = rate;
    const Waveform rc = rrc_filter(rrc_filter(w, rs, 0.1), rs, 0.1);
    // peak tap of the cascaded response
    const double peak = 4.0 / rate * rs; // RC response integrates to Rs/Fs * N
    CArray recovered(n_sym);
    for (Eigen::Index i = 0; i < n_sym; ++i) recovered[i] = rc.x[4 * i];
    const double scale = (recovered * sym.conjugate()).sum().real() /
                         sym.abs2().sum();
    CHECK(std::sqrt((recovered - scale * sym).abs2().mean()) < 1e-4 * scale);
    (void)peak;
  }
  SUBCASE("rolloff 0 is a brick wall") {
    Waveform w;
    w.x = CArray::Zero(n);
    w.y = CArray::Zero(n);
    w.x[0] = 1.0;
    w.sample_rate_hz = rate;
    const Waveform h = rrc_filter(w, rs, 0.0);
    const CArray spec = fft::forward(h.x);
    const Eigen::ArrayXd f = fft::bin_frequencies(n, rate);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double mag = std::abs(spec[k]);
      if (std::abs(f[k]) < 0.49 * rs) CHECK(mag == doctest::Approx(2.0).epsilon(1e-9));
      if (std::abs(f[k]) > 0.51 * rs) CHECK(mag < 1e-12);
    }
  }
  SUBCASE("insufficient sample rate rejected") {
    Waveform w = random_waveform(256, 1.05 * rs);
    CHECK_THROWS_AS(rrc_filter(w, rs, 0.1), std::invalid_argument);
  }
}

TEST_CASE("resample: round trip, tone preservation, PSD preservation") {
  SUBCASE("up then down restores a band-limited signal") {
    Waveform w = random_waveform(4096, 64e9);
    w = rrc_filter(w, 16e9, 0.1); // confine the spectrum
    const Waveform up = resample(w, 128e9);
    const Waveform back = resample(up, 64e9);
    CHECK(rms_diff(back, w) / rms(w.x) < 1e-6);
  }
  SUBCASE("pure tone survives with frequency and amplitude intact") {
    const Waveform w = tone(4096, 64e9, 5e9, 0.7);
    const Waveform r = resample(w, 32e9);
    const Waveform expect = tone(2048, 32e9, 5e9, 0.7);
    CHECK(rms_diff(r, expect) < 1e-6);
  }
  SUBCASE("8 -> 2 samples/symbol preserves the in-band PSD") {
    TxConfig cfg;
    cfg.symbol_rate_baud = 32e9;
    cfg.oversampling = 8;
    cfg.n_symbols = 4096;
    cfg.seed = 5;
    const Waveform w = build_tx_waveform(cfg);
    const Waveform r = resample(w, 2.0 * cfg.symbol_rate_baud);
    // compare mean PSD over the occupied band via total in-band power
    const CArray sw = fft::forward(w.x);
    const CArray sr = fft::forward(r.x);
    const Eigen::ArrayXd fw = fft::bin_frequencies(w.size(), w.sample_rate_hz);
    const Eigen::ArrayXd fr = fft::bin_frequencies(r.size(), r.sample_rate_hz);
    double pw = 0.0, pr = 0.0;
    for (Eigen::Index k = 0; k < sw.size(); ++k)
      if (std::abs(fw[k]) < 0.55 * cfg.symbol_rate_baud)
        pw += std::norm(sw[k]) / static_cast<double>(w.size() * w.size());
    for (Eigen::Index k = 0; k < sr.size(); ++k)
      if (std::abs(fr[k]) < 0.55 * cfg.symbol_rate_baud)
        pr += std::norm(sr[k]) / static_cast<double>(r.size() * r.size());
    // per-sample power scales with rate; PSD ratio = power ratio here
    CHECK(10.0 * std::log10(pr / pw) == doctest::Approx(0.0).epsilon(0.01));
  }
  SUBCASE("irrational ratio rejected") {
    const Waveform w = random_waveform(1024, 64e9);
    CHECK_THROWS_AS(resample(w, 64e9 * M_PI), std::invalid_argument);
  }
}

TEST_CASE("jones_rotate: identity, power split, unitarity") {
  const Waveform w = random_waveform(512, 1e9);
  SUBCASE("zero angles are the identity") {
    CHECK(rms_diff(jones_rotate(w, 0.0, 0.0), w) == 0.0);
  }
  SUBCASE("45 degrees splits an x-only signal evenly") {
    Waveform xonly = w;
    xonly.y.setZero();
    const Waveform r = jones_rotate(xonly, M_PI / 4, 0.0);
    CHECK(r.mean_power_x_w() ==
          doctest::Approx(r.mean_power_y_w()).epsilon(1e-12));
  }
  SUBCASE("power is invariant sample by sample") {
    const Waveform r = jones_rotate(w, 0.6, 1.1);
    const Eigen::ArrayXd before = w.x.abs2() + w.y.abs2();
    const Eigen::ArrayXd after = r.x.abs2() + r.y.abs2();
    CHECK(((after - before).abs() / before.maxCoeff()).maxCoeff() < 1e-12);
  }
  SUBCASE("rotation followed by its adjoint is the identity") {
    const Eigen::Matrix2cd u = jones_matrix(0.6, 1.1);
    const Eigen::Matrix2cd should_be_i = u.adjoint() * u;
    CHECK((should_be_i - Eigen::Matrix2cd::Identity()).norm() < 1e-14);
    const Waveform r = jones_rotate(jones_rotate(w, 0.6, 1.1), -0.6, 0.0);
    // inverse of U(theta, phi) is not U(-theta, phi) in general; use matrices
    (void)r;
  }
  SUBCASE("commutes with dispersion") {
    const Waveform a =
        jones_rotate(apply_dispersion(w, -21.0, 40.0), 0.5, 0.3);
    const Waveform b =
        apply_dispersion(jones_rotate(w, 0.5, 0.3), -21.0, 40.0);
    CHECK(rms_diff(a, b) / rms(a.x) < 1e-10);
  }
}

TEST_CASE("waveform file round trip is bit exact") {
  const Waveform w = random_waveform(777, 3.2e9, 99);
  const auto path = std::filesystem::temp_directory_path() / "olt_test.oltw";
  write_waveform(path, w);
  const Waveform r = read_waveform(path);
  CHECK(r.sample_rate_hz == w.sample_rate_hz);
  CHECK(r.center_frequency_hz == w.center_frequency_hz);
  CHECK(r.t0_offset_s == w.t0_offset_s);
  REQUIRE(r.size() == w.size());
  bool identical = true;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    identical = identical && r.x[i] == w.x[i] && r.y[i] == w.y[i];
  CHECK(identical);
  std::filesystem::remove(path);
}

TEST_CASE("position grid invariants") {
  const PositionGrid g = make_grid(100.0, 1.0);
  CHECK(g.size() == 100);
  CHECK(g.z_positions_km[0] == doctest::Approx(0.5));
  CHECK(g.z_positions_km[99] == doctest::Approx(99.5));
  CHECK_THROWS_AS(make_grid(100.0, 0.3), std::invalid_argument);
  PositionGrid bad = g;
  bad.z_positions_km[50] += 1e-3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
