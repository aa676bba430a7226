#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "olt/csv.hpp"
#include "olt/scenario.hpp"
#include "olt/sha256.hpp"

using namespace olt;
namespace fs = std::filesystem;

namespace {

const char* kSmokeConfig = R"json({
  "name": "smoke",
  "seed": 11,
  "tx": {"constellation": "pcs_qam64", "symbol_rate_baud": 64e9,
         "oversampling": 4, "rolloff": 0.1, "n_symbols": 4096,
         "launch_power_dbm": 5.0},
  "link": {"spans": [
    {"fiber": {"alpha_db_per_km": 0.2, "dispersion_ps_nm_km": 17.0,
               "gamma_per_w_km": 1.3, "length_km": 20.0}},
    {"fiber": {"alpha_db_per_km": 0.2, "dispersion_ps_nm_km": 17.0,
               "gamma_per_w_km": 1.3, "length_km": 20.0},
     "elements_at_input": [
       {"type": "amplifier", "gain_db": 4.0, "noise_figure_db": 5.0}]}
  ], "post_link_elements": [
       {"type": "amplifier", "gain_db": 4.0, "noise_figure_db": 5.0}]},
  "sim": {"step_km": 0.5},
  "estimator": {"delta_z_km": 2.0, "mode": "dual_pol"},
  "dimensions": {"n_captures": 2, "capture_interval_s": 0.55,
                 "average": ["time"]},
  "outputs": {"artifacts": ["truth", "profile", "profiles_all", "snr"]}
})json";

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("olt_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string manifest_digest(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return sha256_hex(ss.str().data(), ss.str().size());
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OLT_CLI_PATH) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("scenario parsing and validation") {
  SUBCASE("the smoke config parses") {
    const ScenarioConfig cfg = parse_scenario_json(kSmokeConfig, "inline");
    CHECK(cfg.name == "smoke");
    CHECK(cfg.seed == 11);
    CHECK(cfg.link.spans.size() == 2);
    CHECK(cfg.tx.n_symbols == 4096);
    CHECK(cfg.dimensions.average.time);
  }
  SUBCASE("malformed json names the parse location") {
    CHECK_THROWS_AS(parse_scenario_json("{ nope", "inline"), ConfigError);
  }
  SUBCASE("missing tx section") {
    CHECK_THROWS_WITH_AS(parse_scenario_json(R"({"link": {"spans": []}})",
                                             "inline"),
                         doctest::Contains("tx"), ConfigError);
  }
  SUBCASE("unknown artifact is rejected with its field path") {
    nlohmann::json j = nlohmann::json::parse(kSmokeConfig);
    j["outputs"]["artifacts"] = {"nonsense"};
    CHECK_THROWS_WITH_AS(parse_scenario_json(j.dump(), "inline"),
                         doctest::Contains("outputs.artifacts"), ConfigError);
  }
  SUBCASE("frequencies outside the sanity range are rejected") {
    nlohmann::json j = nlohmann::json::parse(kSmokeConfig);
    j["dimensions"]["frequencies_hz"] = {150e12};
    CHECK_THROWS_WITH_AS(parse_scenario_json(j.dump(), "inline"),
                         doctest::Contains("frequencies_hz"), ConfigError);
  }
  SUBCASE("non-dividing step is rejected") {
    nlohmann::json j = nlohmann::json::parse(kSmokeConfig);
    j["sim"]["step_km"] = 0.3;
    CHECK_THROWS_WITH_AS(parse_scenario_json(j.dump(), "inline"),
                         doctest::Contains("step_km"), ConfigError);
  }
}

TEST_CASE("run_scenario writes the requested artifacts and a manifest") {
  const ScenarioConfig cfg = parse_scenario_json(kSmokeConfig, "inline");
  const fs::path out = temp_dir("run");
  const RunResult res = run_scenario(cfg, out);

  for (const char* f : {"truth.csv", "profile.csv", "profile_000.csv",
                        "profile_001.csv", "snr_single_pol.csv",
                        "snr_pol_avg.csv", "snr.txt", "manifest.json"})
    CHECK(fs::exists(out / f));

  // every emitted file appears in the manifest with a valid hash
  std::ifstream is(out / "manifest.json");
  nlohmann::json manifest;
  is >> manifest;
  CHECK(manifest["files"].size() == res.files.size());
  for (const auto& entry : manifest["files"]) {
    const fs::path p = out / entry["path"].get<std::string>();
    CHECK(fs::exists(p));
    CHECK(sha256_file_hex(p) == entry["sha256"].get<std::string>());
  }

  // the profile csv has the documented columns
  const csv::Table t = csv::read(out / "profile.csv");
  CHECK(t.columns == std::vector<std::string>{
                         "z_km", "gamma_prime_x", "gamma_prime_y",
                         "power_x_dbm", "power_y_dbm", "basis_theta",
                         "basis_phi"});
  CHECK(t.rows() == 20);
  fs::remove_all(out);
}

TEST_CASE("identical seeds reproduce identical manifests") {
  const ScenarioConfig cfg = parse_scenario_json(kSmokeConfig, "inline");
  const fs::path out1 = temp_dir("det1");
  const fs::path out2 = temp_dir("det2");
  run_scenario(cfg, out1);
  run_scenario(cfg, out2);
  CHECK(manifest_digest(out1) == manifest_digest(out2));

  RunOverrides other;
  other.seed = 12;
  const fs::path out3 = temp_dir("det3");
  run_scenario(cfg, out3, other);
  CHECK(manifest_digest(out1) != manifest_digest(out3));
  fs::remove_all(out1);
  fs::remove_all(out2);
  fs::remove_all(out3);
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("", 0) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const std::string abc = "abc";
  CHECK(sha256_hex(abc.data(), abc.size()) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("cli: exit codes and composition") {
  const fs::path base = temp_dir("cli");
  const fs::path cfg_path = base / "smoke.json";
  {
    std::ofstream os(cfg_path);
    os << kSmokeConfig;
  }

  SUBCASE("missing config file exits 2") {
    CHECK(run_cli("run --config /nonexistent.json --out " +
                  (base / "o").string()) == 2);
  }
  SUBCASE("malformed config exits 2 and leaves no outputs") {
    const fs::path bad = base / "bad.json";
    {
      std::ofstream os(bad);
      os << "{ definitely not json";
    }
    const fs::path out = base / "bad_out";
    CHECK(run_cli("run --config " + bad.string() + " --out " + out.string()) ==
          2);
    CHECK(!fs::exists(out));
  }
  SUBCASE("snr with one estimate exits 2") {
    CHECK(run_cli("snr --truth t.csv --estimates a.csv --out " +
                  (base / "s").string()) == 2);
  }
  SUBCASE("simulate then estimate equals run bit for bit") {
    const fs::path run_out = base / "run_out";
    const fs::path sim_out = base / "sim_out";
    const fs::path est_out = base / "est_out";
    REQUIRE(run_cli("run --config " + cfg_path.string() + " --out " +
                    run_out.string()) == 0);
    REQUIRE(run_cli("simulate --config " + cfg_path.string() + " --out " +
                    sim_out.string()) == 0);
    REQUIRE(run_cli("estimate --config " + cfg_path.string() + " --out " +
                    est_out.string() + " --ref " +
                    (sim_out / "tx.oltw").string() + " --rx " +
                    (sim_out / "rx_000.oltw").string() + " --rx " +
                    (sim_out / "rx_001.oltw").string()) == 0);
    CHECK(sha256_file_hex(run_out / "profile.csv") ==
          sha256_file_hex(est_out / "profile.csv"));
    CHECK(sha256_file_hex(run_out / "profile_000.csv") ==
          sha256_file_hex(est_out / "profile_000.csv"));
  }
  fs::remove_all(base);
}

TEST_CASE("bundled scenarios parse") {
  for (const char* name :
       {"ci_smoke.json", "baseline_2x50km.json", "field_analogue_3span.json",
        "voa_temporal.json", "correlation_gaussian_256ghz.json"}) {
    CAPTURE(name);
    CHECK_NOTHROW(parse_scenario(fs::path(OLT_SCENARIO_DIR) / name));
  }
}

TEST_CASE("cli: correlation subcommand emits a monotone-decaying curve") {
  const fs::path base = temp_dir("corr");
  const fs::path cfg =
      fs::path(OLT_SCENARIO_DIR) / "correlation_gaussian_256ghz.json";
  REQUIRE(run_cli("correlation --config " + cfg.string() + " --out " +
                  base.string() + " --z 10 --dz-max 1.0 --dz-count 21") == 0);
  const csv::Table t = csv::read(base / "correlation.csv");
  const Eigen::VectorXd rho = t.column("rho");
  REQUIRE(rho.size() == 21);
  CHECK(rho[0] == doctest::Approx(1.0).epsilon(1e-9));
  // monotone decay over the first lobe (until the first local minimum)
  Eigen::Index first_min = rho.size() - 1;
  for (Eigen::Index i = 1; i < rho.size(); ++i)
    if (rho[i] > rho[i - 1] + 1e-6) {
      first_min = i - 1;
      break;
    }
  CHECK(first_min >= 3);
  for (Eigen::Index i = 1; i <= first_min; ++i) CHECK(rho[i] <= rho[i - 1] + 1e-6);
  CHECK(rho[first_min] < 0.5);
  fs::remove_all(base);
}
