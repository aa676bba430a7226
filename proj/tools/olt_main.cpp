#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "olt/csv.hpp"
#include "olt/dimensions.hpp"
#include "olt/log.hpp"
#include "olt/metrics.hpp"
#include "olt/parallel.hpp"
#include "olt/rxdsp.hpp"
#include "olt/scenario.hpp"
#include "olt/waveform_io.hpp"

namespace fs = std::filesystem;
using namespace olt;

namespace {

struct GlobalArgs {
  std::string config;
  std::string out = "olt_out";
  std::optional<uint64_t> seed;
  int threads = 0;
  std::string format = "csv";
};

ScenarioConfig load_config(const GlobalArgs& g) {
  if (g.config.empty()) throw ConfigError("--config is required");
  ScenarioConfig cfg = parse_scenario(g.config);
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.tx.seed = *g.seed;
  }
  return cfg;
}

RunOverrides overrides_for(const GlobalArgs& g) {
  RunOverrides o;
  o.seed = g.seed;
  o.plots = g.format == "csv+plots";
  return o;
}

void cmd_run(const GlobalArgs& g) {
  const ScenarioConfig cfg = load_config(g);
  const RunResult res = run_scenario(cfg, g.out, overrides_for(g));
  std::cout << "wrote " << res.files.size() + 1 << " files to "
            << res.out_dir.string() << "\n";
}

void cmd_with_artifacts(const GlobalArgs& g,
                        std::vector<std::string> artifacts,
                        bool force_sweep = false) {
  ScenarioConfig cfg = load_config(g);
  cfg.outputs.artifacts = std::move(artifacts);
  if (force_sweep) cfg.dimensions.sweep_enabled = true;
  const RunResult res = run_scenario(cfg, g.out, overrides_for(g));
  std::cout << "wrote " << res.files.size() + 1 << " files to "
            << res.out_dir.string() << "\n";
}

void cmd_estimate(const GlobalArgs& g, const std::vector<std::string>& rx_paths,
                  const std::string& ref_path) {
  const ScenarioConfig cfg = load_config(g);
  if (rx_paths.empty()) throw ConfigError("estimate: need at least one --rx");
  if (ref_path.empty()) throw ConfigError("estimate: --ref is required");
  fs::create_directories(g.out);

  const Waveform tx = read_waveform(ref_path);
  const ReferenceBundle ref = make_reference(tx, cfg.tx);
  const EstimatorConfig est_cfg = cfg.estimator_config();
  const double total_cd = cfg.link.total_cd_ps_nm();

  std::vector<ProfileEstimate> profiles(rx_paths.size());
  std::vector<std::string> files;
  parallel_for(rx_paths.size(), [&](size_t i) {
    const Waveform rx_raw = read_waveform(rx_paths[i]);
    const Waveform rx = demodulate(rx_raw, total_cd, cfg.tx);
    profiles[i] = estimate(align(rx, ref), est_cfg);
  });
  for (size_t i = 0; i < profiles.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "profile_%03zu.csv", i);
    write_profile_csv(fs::path(g.out) / name, profiles[i]);
    files.emplace_back(name);
  }
  AverageDims dims = cfg.dimensions.average;
  if (profiles.size() > 1 && !dims.time && !dims.frequency) dims.time = true;
  write_profile_csv(fs::path(g.out) / "profile.csv",
                    average_profiles(profiles, dims));
  files.emplace_back("profile.csv");
  write_manifest(g.out, files);
  std::cout << "wrote " << files.size() + 1 << " files to " << g.out << "\n";
}

void cmd_simulate(const GlobalArgs& g) {
  ScenarioConfig cfg = load_config(g);
  if (!cfg.dimensions.cd_values_ps_nm_km.empty())
    throw ConfigError(
        "simulate: cd_values ensembles are run-internal; use a capture series");
  fs::create_directories(g.out);
  const Waveform tx = build_tx_waveform(cfg.tx);
  PropagateOptions sim;
  sim.step_km = cfg.step_km;
  sim.noise_seed = cfg.seed;
  sim.truth_delta_z_km = cfg.estimator_delta_z_km;
  const auto captures =
      capture_series(tx, cfg.link, sim, cfg.dimensions.capture_interval_s,
                     cfg.dimensions.n_captures);
  std::vector<std::string> files;
  write_waveform(fs::path(g.out) / "tx.oltw", tx);
  files.emplace_back("tx.oltw");
  for (size_t i = 0; i < captures.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "rx_%03zu.oltw", i);
    write_waveform(fs::path(g.out) / name, captures[i].rx);
    files.emplace_back(name);
  }
  write_truth_csv(fs::path(g.out) / "truth.csv", captures.front().truth);
  files.emplace_back("truth.csv");
  write_manifest(g.out, files);
  std::cout << "wrote " << files.size() + 1 << " files to " << g.out << "\n";
}

void cmd_correlation(const GlobalArgs& g, double z_km, double dz_max_km,
                     int dz_count) {
  const ScenarioConfig cfg = load_config(g);
  if (dz_count < 2 || !(dz_max_km > 0.0))
    throw ConfigError("correlation: need dz_max > 0 and dz_count >= 2");
  fs::create_directories(g.out);
  const Waveform tx = build_tx_waveform(cfg.tx);
  const ReferenceBundle ref = make_reference(tx, cfg.tx);
  const AlignedPair pair = align(ref.ref, ref);
  std::vector<double> dzs(static_cast<size_t>(dz_count));
  for (int i = 0; i < dz_count; ++i)
    dzs[static_cast<size_t>(i)] = dz_max_km * i / (dz_count - 1);
  const Eigen::VectorXd rho =
      spatial_correlation(pair, z_km, dzs, cfg.estimator_config());
  Eigen::VectorXd dzv = Eigen::Map<const Eigen::VectorXd>(
      dzs.data(), static_cast<Eigen::Index>(dzs.size()));
  csv::write(fs::path(g.out) / "correlation.csv", {"dz_km", "rho"},
             {dzv, rho});
  write_manifest(g.out, {"correlation.csv"});
  std::cout << "wrote 2 files to " << g.out << "\n";
}

void cmd_snr(const GlobalArgs& g, const std::string& truth_path,
             const std::vector<std::string>& estimate_paths,
             const std::string& channel_name) {
  if (estimate_paths.size() < 2)
    throw ConfigError("snr: need at least 2 estimate files");
  SnrChannel channel = SnrChannel::pol_mean;
  if (channel_name == "x") channel = SnrChannel::x;
  else if (channel_name == "y") channel = SnrChannel::y;
  else if (channel_name != "pol_mean")
    throw ConfigError("snr: unknown channel '" + channel_name + "'");
  fs::create_directories(g.out);

  const csv::Table t = csv::read(truth_path);
  GroundTruthProfile truth;
  truth.grid.z_positions_km = t.column("z_km");
  truth.grid.delta_z_km =
      truth.grid.z_positions_km[1] - truth.grid.z_positions_km[0];
  truth.grid.validate();
  truth.gamma_prime_x = t.column("gamma_prime_x");
  truth.gamma_prime_y = t.column("gamma_prime_y");

  std::vector<ProfileEstimate> estimates;
  for (const auto& p : estimate_paths)
    estimates.push_back(read_profile_csv(p));
  const SnrReport report = snr_pp(truth, estimates, channel);
  write_snr_csv(fs::path(g.out) / "snr.csv", report, truth.grid);
  write_manifest(g.out, {"snr.csv"});
  std::cout << "mean SNR_pp (" << channel_name << "): " << report.mean_snr_db
            << " dB over " << report.n_ensembles << " ensembles\n";
}

void cmd_detect(const GlobalArgs& g, const std::string& profile_path,
                double threshold_db) {
  const ScenarioConfig cfg = load_config(g);
  fs::create_directories(g.out);
  const ProfileEstimate profile = read_profile_csv(profile_path);
  const AnomalyReport report =
      detect_anomalies(profile, cfg.link, threshold_db);
  write_anomaly_report(fs::path(g.out) / "anomalies.csv",
                       fs::path(g.out) / "anomalies.txt", report);
  write_manifest(g.out, {"anomalies.csv", "anomalies.txt"});
  for (const auto& e : report.events)
    std::cout << anomaly_kind_name(e.kind) << " at " << e.z_km
              << " km, magnitude " << e.magnitude_db << " dB\n";
  if (report.events.empty()) std::cout << "no anomalies detected\n";
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"fiber-longitudinal power-profile tomography toolkit"};
  app.require_subcommand(1);
  app.fallthrough(); // global flags may follow the subcommand name

  GlobalArgs g;
  app.add_option("--config", g.config, "scenario config (JSON)");
  app.add_option("--out", g.out, "output directory");
  uint64_t seed_value = 0;
  auto* seed_opt =
      app.add_option("--seed", seed_value, "override the scenario seed");
  app.add_option("--threads", g.threads, "worker threads (0 = hardware)");
  app.add_option("--format", g.format, "csv | csv+plots")
      ->check(CLI::IsMember({"csv", "csv+plots"}));

  auto* run = app.add_subcommand("run", "full scenario pipeline");
  auto* simulate = app.add_subcommand("simulate", "emit waveforms and truth");
  auto* estimate_cmd =
      app.add_subcommand("estimate", "profile from waveform pair files");
  std::vector<std::string> rx_paths;
  std::string ref_path;
  estimate_cmd->add_option("--rx", rx_paths, "received waveform file(s)");
  estimate_cmd->add_option("--ref", ref_path, "transmit reference file");
  auto* sweep = app.add_subcommand("sop-sweep", "PDL localization sweep");
  auto* spectral = app.add_subcommand("spectral", "distance x frequency map");
  auto* temporal = app.add_subcommand("temporal", "distance x time map");
  auto* correlation =
      app.add_subcommand("correlation", "spatial correlation function");
  double corr_z = 10.0, corr_dz_max = 2.0;
  int corr_dz_count = 41;
  correlation->add_option("--z", corr_z, "anchor position (km)");
  correlation->add_option("--dz-max", corr_dz_max, "largest offset (km)");
  correlation->add_option("--dz-count", corr_dz_count, "points in [0, dz-max]");
  auto* snr = app.add_subcommand("snr", "power-profile SNR report");
  std::string truth_path, channel_name = "pol_mean";
  std::vector<std::string> estimate_paths;
  snr->add_option("--truth", truth_path, "truth csv")->required();
  snr->add_option("--estimates", estimate_paths, "estimate csv files");
  snr->add_option("--channel", channel_name, "x | y | pol_mean");
  auto* detect = app.add_subcommand("detect", "loss-slope anomaly detection");
  std::string profile_path;
  double threshold_db = 0.8;
  detect->add_option("--profile", profile_path, "profile csv")->required();
  detect->add_option("--threshold", threshold_db, "event threshold (dB)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  if (seed_opt->count() > 0) g.seed = seed_value;
  if (g.threads > 0) set_worker_threads(g.threads);

  try {
    if (*run) cmd_run(g);
    else if (*simulate) cmd_simulate(g);
    else if (*estimate_cmd) cmd_estimate(g, rx_paths, ref_path);
    else if (*sweep) cmd_with_artifacts(g, {"sop_sweep"}, true);
    else if (*spectral) cmd_with_artifacts(g, {"spectral_map"});
    else if (*temporal) cmd_with_artifacts(g, {"temporal_map"});
    else if (*correlation) cmd_correlation(g, corr_z, corr_dz_max, corr_dz_count);
    else if (*snr) cmd_snr(g, truth_path, estimate_paths, channel_name);
    else if (*detect) cmd_detect(g, profile_path, threshold_db);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
