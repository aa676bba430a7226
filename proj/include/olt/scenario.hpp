#ifndef OLT_SCENARIO_HPP
#define OLT_SCENARIO_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "olt/dimensions.hpp"
#include "olt/linksim.hpp"
#include "olt/metrics.hpp"
#include "olt/tomography.hpp"
#include "olt/txgen.hpp"

namespace olt {

/// Configuration or schema problem; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct DimensionsConfig {
  int n_captures = 1;
  double capture_interval_s = 0.55;
  // Fresh transmit pattern per capture (live-traffic-like); the default
  // reuses one pattern, like a repetitive test sequence.
  bool fresh_pattern_per_capture = false;
  std::vector<double> frequencies_hz;        // spectral map channels
  std::vector<double> per_channel_power_dbm; // optional, one per channel
  std::vector<double> cd_values_ps_nm_km;    // CD-diversity (frequency emulation)
  int temporal_window = 3;
  bool sweep_enabled = false;
  int sweep_grid_theta = 13;
  int sweep_grid_phi = 4;
  AverageDims average{};
};

struct OutputsConfig {
  std::vector<std::string> artifacts; // subset of the known artifact names
  double anomaly_threshold_db = 0.8;

  bool wants(const std::string& name) const;
};

struct ScenarioConfig {
  std::string name = "scenario";
  uint64_t seed = 1;
  TxConfig tx{};
  LinkSpec link{};
  double step_km = 0.2;
  // estimator settings; grid derived from the link length at run time
  double estimator_delta_z_km = 1.0;
  double lambda_reg = 0.0;
  RegMatrix reg_matrix = RegMatrix::identity;
  EstimatorMode mode = EstimatorMode::dual_pol;
  std::optional<double> cd_coefficient_ps_nm_km; // default: span-mean D
  std::optional<double> beta2_override_ps2_km;
  std::optional<double> gamma_nominal_per_w_km;  // default: first-span gamma
  Eigen::Index edge_exclusion_samples = -1;
  DimensionsConfig dimensions{};
  OutputsConfig outputs{};

  EstimatorConfig estimator_config() const;
  void validate() const; // throws ConfigError with a field path
};

ScenarioConfig parse_scenario(const std::filesystem::path& json_path);
ScenarioConfig parse_scenario_json(const std::string& json_text,
                                   const std::string& origin);

struct RunOverrides {
  std::optional<uint64_t> seed;
  bool plots = false;
};

struct RunResult {
  std::filesystem::path out_dir;
  std::vector<std::string> files; // manifest order
};

/// Full simulate -> estimate -> report pipeline. Writes every requested
/// artifact plus manifest.json (SHA-256 per file). Deterministic for a fixed
/// seed.
RunResult run_scenario(const ScenarioConfig& cfg,
                       const std::filesystem::path& out_dir,
                       const RunOverrides& overrides = {});

// Artifact writers shared by run_scenario and the single-purpose subcommands.
void write_truth_csv(const std::filesystem::path& path,
                     const GroundTruthProfile& truth);
void write_profile_csv(const std::filesystem::path& path,
                       const ProfileEstimate& est);
ProfileEstimate read_profile_csv(const std::filesystem::path& path);
void write_map_csv(const std::filesystem::path& path, const TomographyMap& map);
void write_snr_csv(const std::filesystem::path& path, const SnrReport& report,
                   const PositionGrid& grid);
void write_anomaly_report(const std::filesystem::path& csv_path,
                          const std::filesystem::path& text_path,
                          const AnomalyReport& report);
void write_sweep_csv(const std::filesystem::path& path,
                     const SopSweepResult& sweep);
void write_manifest(const std::filesystem::path& out_dir,
                    const std::vector<std::string>& files);

} // namespace olt

#endif // OLT_SCENARIO_HPP
