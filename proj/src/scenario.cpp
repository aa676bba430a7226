#include "olt/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "olt/csv.hpp"
#include "olt/log.hpp"
#include "olt/parallel.hpp"
#include "olt/rng.hpp"
#include "olt/rxdsp.hpp"
#include "olt/sha256.hpp"
#include "olt/svgplot.hpp"
#include "olt/waveform_io.hpp"

namespace olt {
namespace {

using nlohmann::json;

const std::set<std::string> kKnownArtifacts = {
    "truth",       "waveforms",   "profile",     "profiles_all", "snr",
    "anomalies",   "sop_sweep",   "spectral_map", "temporal_map"};

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config field '" + path + "': " + what);
}

double need_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

double get_number(const json& j, const std::string& key,
                  const std::string& path, double fallback) {
  if (!j.contains(key)) return fallback;
  return need_number(j.at(key), path + "." + key);
}

int get_int(const json& j, const std::string& key, const std::string& path,
            int fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  return v.get<int>();
}

std::string get_string(const json& j, const std::string& key,
                       const std::string& path, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> get_number_list(const json& j, const std::string& key,
                                    const std::string& path) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  const json& v = j.at(key);
  if (!v.is_array()) fail(path + "." + key, "expected an array of numbers");
  for (size_t i = 0; i < v.size(); ++i)
    out.push_back(need_number(v[i], path + "." + key + "[" +
                                        std::to_string(i) + "]"));
  return out;
}

ConstellationKind parse_constellation(const std::string& s,
                                      const std::string& path) {
  if (s == "qpsk") return ConstellationKind::qpsk;
  if (s == "qam16") return ConstellationKind::qam16;
  if (s == "pcs_qam64") return ConstellationKind::pcs_qam64;
  if (s == "gaussian") return ConstellationKind::gaussian;
  fail(path, "unknown constellation '" + s + "'");
}

Element parse_element(const json& j, const std::string& path) {
  const std::string type = get_string(j, "type", path, "");
  if (type == "amplifier") {
    Amplifier a;
    a.gain_db = get_number(j, "gain_db", path, 0.0);
    a.noise_figure_db = get_number(j, "noise_figure_db", path, 5.0);
    const std::string mode = get_string(j, "mode", path, "fixed_gain");
    if (mode == "fixed_gain") {
      a.mode = AmplifierMode::fixed_gain;
    } else if (mode == "fixed_output_power") {
      a.mode = AmplifierMode::fixed_output_power;
      if (!j.contains("output_power_dbm"))
        fail(path + ".output_power_dbm", "required in fixed_output_power mode");
      a.output_power_dbm = need_number(j.at("output_power_dbm"),
                                       path + ".output_power_dbm");
    } else {
      fail(path + ".mode", "unknown amplifier mode '" + mode + "'");
    }
    return a;
  }
  if (type == "lumped_loss") {
    LumpedLoss l;
    l.loss_db = get_number(j, "loss_db", path, 0.0);
    l.position_km = get_number(j, "position_km", path, 0.0);
    return l;
  }
  if (type == "pdl") {
    PdlElement p;
    p.pdl_db = get_number(j, "pdl_db", path, 0.0);
    p.axis_theta_rad =
        get_number(j, "axis_theta_deg", path, 0.0) * M_PI / 180.0;
    p.axis_phi_rad = get_number(j, "axis_phi_deg", path, 0.0) * M_PI / 180.0;
    p.position_km = get_number(j, "position_km", path, 0.0);
    return p;
  }
  if (type == "voa") {
    Voa v;
    v.position_km = get_number(j, "position_km", path, 0.0);
    if (j.contains("schedule")) {
      const json& s = j.at("schedule");
      if (!s.is_array()) fail(path + ".schedule", "expected an array");
      for (size_t i = 0; i < s.size(); ++i) {
        const json& e = s[i];
        if (!e.is_array() || e.size() != 2)
          fail(path + ".schedule[" + std::to_string(i) + "]",
               "expected [time_s, attenuation_db]");
        v.schedule.emplace_back(
            need_number(e[0], path + ".schedule.time"),
            need_number(e[1], path + ".schedule.attenuation"));
      }
    }
    return v;
  }
  fail(path + ".type", "unknown element type '" + type + "'");
}

} // namespace

bool OutputsConfig::wants(const std::string& name) const {
  return std::find(artifacts.begin(), artifacts.end(), name) !=
         artifacts.end();
}

EstimatorConfig ScenarioConfig::estimator_config() const {
  EstimatorConfig cfg;
  cfg.grid = make_grid(link.total_length_km(), estimator_delta_z_km);
  cfg.lambda_reg = lambda_reg;
  cfg.reg_matrix = reg_matrix;
  cfg.mode = mode;
  if (cd_coefficient_ps_nm_km) {
    cfg.cd_coefficient_ps_nm_km = *cd_coefficient_ps_nm_km;
  } else {
    cfg.cd_coefficient_ps_nm_km =
        link.total_cd_ps_nm() / link.total_length_km();
  }
  cfg.beta2_override_ps2_km = beta2_override_ps2_km;
  cfg.gamma_nominal_per_w_km = gamma_nominal_per_w_km
                                   ? *gamma_nominal_per_w_km
                                   : link.spans.front().fiber.gamma_per_w_km;
  cfg.edge_exclusion_samples = edge_exclusion_samples;
  return cfg;
}

void ScenarioConfig::validate() const {
  try {
    tx.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config field 'tx': ") + e.what());
  }
  try {
    link.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config field 'link': ") + e.what());
  }
  if (!(step_km > 0.0)) throw ConfigError("config field 'sim.step_km': must be > 0");
  for (const auto& s : link.spans) {
    const double steps = s.fiber.length_km / step_km;
    if (std::abs(steps - std::round(steps)) > 1e-6)
      throw ConfigError(
          "config field 'sim.step_km': must divide every span length");
  }
  if (!(estimator_delta_z_km > 0.0))
    throw ConfigError("config field 'estimator.delta_z_km': must be > 0");
  const double cells = link.total_length_km() / estimator_delta_z_km;
  if (std::abs(cells - std::round(cells)) > 1e-6)
    throw ConfigError(
        "config field 'estimator.delta_z_km': must divide the link length");
  if (dimensions.n_captures < 1)
    throw ConfigError("config field 'dimensions.n_captures': must be >= 1");
  if (dimensions.temporal_window < 1 || dimensions.temporal_window % 2 == 0)
    throw ConfigError(
        "config field 'dimensions.temporal_window': must be odd and >= 1");
  for (double f : dimensions.frequencies_hz)
    if (f < 184e12 || f > 200e12)
      throw ConfigError(
          "config field 'dimensions.frequencies_hz': outside the C-band "
          "sanity range [184, 200] THz");
  if (!dimensions.per_channel_power_dbm.empty() &&
      dimensions.per_channel_power_dbm.size() !=
          dimensions.frequencies_hz.size())
    throw ConfigError(
        "config field 'dimensions.per_channel_power_dbm': length must match "
        "frequencies_hz");
  for (const auto& a : outputs.artifacts)
    if (!kKnownArtifacts.count(a))
      throw ConfigError("config field 'outputs.artifacts': unknown artifact '" +
                        a + "'");
  if (outputs.wants("temporal_map") &&
      dimensions.temporal_window > dimensions.n_captures)
    throw ConfigError(
        "config field 'dimensions.temporal_window': exceeds n_captures");
  if (outputs.wants("temporal_map") && !dimensions.cd_values_ps_nm_km.empty())
    throw ConfigError(
        "config field 'outputs': temporal_map needs a capture series, not a "
        "cd_values ensemble");
  if (outputs.wants("waveforms") && dimensions.fresh_pattern_per_capture)
    throw ConfigError(
        "config field 'outputs': waveform emission needs the shared-pattern "
        "capture series");
  if (outputs.wants("sop_sweep") && mode != EstimatorMode::dual_pol)
    throw ConfigError("config field 'outputs': sop_sweep needs dual_pol mode");
}

ScenarioConfig parse_scenario_json(const std::string& text,
                                   const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  ScenarioConfig cfg;
  cfg.name = get_string(j, "name", "", "scenario");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
      fail("seed", "expected an unsigned integer");
    cfg.seed = j.at("seed").get<uint64_t>();
  }

  if (!j.contains("tx")) fail("tx", "missing section");
  {
    const json& t = j.at("tx");
    cfg.tx.constellation.kind = parse_constellation(
        get_string(t, "constellation", "tx", "pcs_qam64"), "tx.constellation");
    cfg.tx.constellation.shaping_nu =
        get_number(t, "shaping_nu", "tx", cfg.tx.constellation.shaping_nu);
    cfg.tx.symbol_rate_baud = get_number(t, "symbol_rate_baud", "tx", 128e9);
    cfg.tx.oversampling = get_int(t, "oversampling", "tx", 8);
    cfg.tx.rolloff = get_number(t, "rolloff", "tx", 0.1);
    cfg.tx.n_symbols = get_int(t, "n_symbols", "tx", 65536);
    cfg.tx.launch_power_dbm = get_number(t, "launch_power_dbm", "tx", 3.0);
    cfg.tx.center_frequency_hz = get_number(
        t, "center_frequency_hz", "tx", constants::default_center_frequency_hz);
    cfg.tx.seed = cfg.seed;
  }

  if (!j.contains("link") || !j.at("link").contains("spans"))
    fail("link.spans", "missing section");
  {
    const json& spans = j.at("link").at("spans");
    if (!spans.is_array() || spans.empty())
      fail("link.spans", "expected a non-empty array");
    for (size_t i = 0; i < spans.size(); ++i) {
      const std::string path = "link.spans[" + std::to_string(i) + "]";
      const json& s = spans[i];
      Span span;
      if (!s.contains("fiber")) fail(path + ".fiber", "missing");
      const json& f = s.at("fiber");
      span.fiber.alpha_db_per_km =
          get_number(f, "alpha_db_per_km", path + ".fiber", 0.2);
      span.fiber.dispersion_ps_nm_km =
          get_number(f, "dispersion_ps_nm_km", path + ".fiber", 17.0);
      span.fiber.gamma_per_w_km =
          get_number(f, "gamma_per_w_km", path + ".fiber", 1.3);
      span.fiber.length_km = get_number(f, "length_km", path + ".fiber", 50.0);
      if (s.contains("elements_at_input")) {
        const json& els = s.at("elements_at_input");
        if (!els.is_array()) fail(path + ".elements_at_input", "expected array");
        for (size_t k = 0; k < els.size(); ++k)
          span.elements_at_input.push_back(parse_element(
              els[k], path + ".elements_at_input[" + std::to_string(k) + "]"));
      }
      cfg.link.spans.push_back(std::move(span));
    }
    if (j.at("link").contains("post_link_elements")) {
      const json& els = j.at("link").at("post_link_elements");
      if (!els.is_array()) fail("link.post_link_elements", "expected array");
      for (size_t k = 0; k < els.size(); ++k)
        cfg.link.post_link_elements.push_back(parse_element(
            els[k], "link.post_link_elements[" + std::to_string(k) + "]"));
    }
  }

  if (j.contains("sim"))
    cfg.step_km = get_number(j.at("sim"), "step_km", "sim", 0.2);

  if (j.contains("estimator")) {
    const json& e = j.at("estimator");
    cfg.estimator_delta_z_km = get_number(e, "delta_z_km", "estimator", 1.0);
    cfg.lambda_reg = get_number(e, "lambda_reg", "estimator", 0.0);
    const std::string reg =
        get_string(e, "reg_matrix", "estimator", "identity");
    if (reg == "identity")
      cfg.reg_matrix = RegMatrix::identity;
    else if (reg == "second_difference")
      cfg.reg_matrix = RegMatrix::second_difference;
    else
      fail("estimator.reg_matrix", "unknown kind '" + reg + "'");
    const std::string mode = get_string(e, "mode", "estimator", "dual_pol");
    if (mode == "dual_pol")
      cfg.mode = EstimatorMode::dual_pol;
    else if (mode == "single_pol")
      cfg.mode = EstimatorMode::single_pol;
    else
      fail("estimator.mode", "unknown mode '" + mode + "'");
    if (e.contains("cd_coefficient_ps_nm_km"))
      cfg.cd_coefficient_ps_nm_km =
          need_number(e.at("cd_coefficient_ps_nm_km"),
                      "estimator.cd_coefficient_ps_nm_km");
    if (e.contains("beta2_override_ps2_km"))
      cfg.beta2_override_ps2_km = need_number(
          e.at("beta2_override_ps2_km"), "estimator.beta2_override_ps2_km");
    if (e.contains("gamma_nominal_per_w_km"))
      cfg.gamma_nominal_per_w_km = need_number(
          e.at("gamma_nominal_per_w_km"), "estimator.gamma_nominal_per_w_km");
    cfg.edge_exclusion_samples =
        get_int(e, "edge_exclusion_samples", "estimator", -1);
  }

  if (j.contains("dimensions")) {
    const json& d = j.at("dimensions");
    cfg.dimensions.n_captures = get_int(d, "n_captures", "dimensions", 1);
    cfg.dimensions.capture_interval_s =
        get_number(d, "capture_interval_s", "dimensions", 0.55);
    if (d.contains("fresh_pattern_per_capture")) {
      if (!d.at("fresh_pattern_per_capture").is_boolean())
        fail("dimensions.fresh_pattern_per_capture", "expected a boolean");
      cfg.dimensions.fresh_pattern_per_capture =
          d.at("fresh_pattern_per_capture").get<bool>();
    }
    cfg.dimensions.frequencies_hz =
        get_number_list(d, "frequencies_hz", "dimensions");
    cfg.dimensions.per_channel_power_dbm =
        get_number_list(d, "per_channel_power_dbm", "dimensions");
    cfg.dimensions.cd_values_ps_nm_km =
        get_number_list(d, "cd_values_ps_nm_km", "dimensions");
    cfg.dimensions.temporal_window =
        get_int(d, "temporal_window", "dimensions", 3);
    if (d.contains("sop_sweep")) {
      cfg.dimensions.sweep_enabled = true;
      cfg.dimensions.sweep_grid_theta =
          get_int(d.at("sop_sweep"), "grid_theta", "dimensions.sop_sweep", 13);
      cfg.dimensions.sweep_grid_phi =
          get_int(d.at("sop_sweep"), "grid_phi", "dimensions.sop_sweep", 4);
    }
    if (d.contains("average")) {
      const json& a = d.at("average");
      if (!a.is_array()) fail("dimensions.average", "expected array");
      for (const auto& v : a) {
        const std::string s = v.get<std::string>();
        if (s == "polarization")
          cfg.dimensions.average.polarization = true;
        else if (s == "time")
          cfg.dimensions.average.time = true;
        else if (s == "frequency")
          cfg.dimensions.average.frequency = true;
        else
          fail("dimensions.average", "unknown dimension '" + s + "'");
      }
    }
  }

  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    if (o.contains("artifacts")) {
      const json& a = o.at("artifacts");
      if (!a.is_array()) fail("outputs.artifacts", "expected array");
      for (const auto& v : a)
        cfg.outputs.artifacts.push_back(v.get<std::string>());
    }
    cfg.outputs.anomaly_threshold_db =
        get_number(o, "anomaly_threshold_db", "outputs", 0.8);
  }
  if (cfg.outputs.artifacts.empty())
    cfg.outputs.artifacts = {"truth", "profile"};

  cfg.validate();
  return cfg;
}

ScenarioConfig parse_scenario(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config: " + path.string());
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return parse_scenario_json(text, path.string());
}

// --- artifact writers --------------------------------------------------------

namespace {

double dbm_or_nan(double watts) {
  return watts > 0.0 ? watts_to_dbm(watts) : std::nan("");
}

Eigen::VectorXd to_dbm(const Eigen::VectorXd& watts) {
  Eigen::VectorXd out(watts.size());
  for (Eigen::Index i = 0; i < watts.size(); ++i) out[i] = dbm_or_nan(watts[i]);
  return out;
}

} // namespace

void write_truth_csv(const std::filesystem::path& path,
                     const GroundTruthProfile& truth) {
  csv::write(path,
             {"z_km", "power_x_dbm", "power_y_dbm", "gamma_prime_x",
              "gamma_prime_y"},
             {truth.grid.z_positions_km, to_dbm(truth.power_x_w),
              to_dbm(truth.power_y_w), truth.gamma_prime_x,
              truth.gamma_prime_y});
}

void write_profile_csv(const std::filesystem::path& path,
                       const ProfileEstimate& est) {
  const Eigen::Index m = est.grid.size();
  const Eigen::VectorXd nan_col = Eigen::VectorXd::Constant(m, std::nan(""));
  csv::write(
      path,
      {"z_km", "gamma_prime_x", "gamma_prime_y", "power_x_dbm", "power_y_dbm",
       "basis_theta", "basis_phi"},
      {est.grid.z_positions_km, est.gamma_prime_x,
       est.dual() ? est.gamma_prime_y : nan_col, to_dbm(est.power_x_w),
       est.dual() ? to_dbm(est.power_y_w) : nan_col,
       Eigen::VectorXd::Constant(m, est.basis_theta_rad),
       Eigen::VectorXd::Constant(m, est.basis_phi_rad)});
}

ProfileEstimate read_profile_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  ProfileEstimate est;
  const Eigen::VectorXd z = t.column("z_km");
  if (z.size() < 2) throw std::runtime_error("profile csv too short");
  PositionGrid grid;
  grid.delta_z_km = z[1] - z[0];
  grid.z_positions_km = z;
  grid.validate();
  est.grid = grid;
  est.gamma_prime_x = t.column("gamma_prime_x");
  const Eigen::VectorXd gy = t.column("gamma_prime_y");
  const bool dual = gy.array().isFinite().all();
  if (dual) est.gamma_prime_y = gy;
  est.basis_theta_rad = t.column("basis_theta")[0];
  est.basis_phi_rad = t.column("basis_phi")[0];
  // Powers are reconstructed from the dB columns where present.
  const Eigen::VectorXd px = t.column("power_x_dbm");
  est.power_x_w.resize(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    est.power_x_w[i] = std::isfinite(px[i]) ? dbm_to_watts(px[i]) : 0.0;
  if (dual) {
    const Eigen::VectorXd py = t.column("power_y_dbm");
    est.power_y_w.resize(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      est.power_y_w[i] = std::isfinite(py[i]) ? dbm_to_watts(py[i]) : 0.0;
  }
  return est;
}

void write_map_csv(const std::filesystem::path& path,
                   const TomographyMap& map) {
  const Eigen::Index m = map.grid.size();
  const Eigen::Index k = map.axis_values.size();
  Eigen::VectorXd axis(m * k), z(m * k), p(m * k), px(m * k), py(m * k);
  Eigen::Index row = 0;
  for (Eigen::Index c = 0; c < k; ++c)
    for (Eigen::Index r = 0; r < m; ++r, ++row) {
      axis[row] = map.axis_values[c];
      z[row] = map.grid.z_positions_km[r];
      p[row] = map.power_dbm(r, c);
      px[row] = map.power_x_dbm(r, c);
      py[row] = map.power_y_dbm(r, c);
    }
  csv::write(path, {"axis_value", "z_km", "power_dbm", "power_x_dbm",
                    "power_y_dbm"},
             {axis, z, p, px, py});
}

void write_snr_csv(const std::filesystem::path& path, const SnrReport& report,
                   const PositionGrid& grid) {
  csv::write(path, {"z_km", "snr_db"},
             {grid.z_positions_km, report.per_position_snr_db});
}

void write_anomaly_report(const std::filesystem::path& csv_path,
                          const std::filesystem::path& text_path,
                          const AnomalyReport& report) {
  const auto n = static_cast<Eigen::Index>(report.events.size());
  Eigen::VectorXd z(n), mag(n), kind(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    z[i] = report.events[static_cast<size_t>(i)].z_km;
    mag[i] = report.events[static_cast<size_t>(i)].magnitude_db;
    kind[i] =
        static_cast<double>(report.events[static_cast<size_t>(i)].kind);
  }
  csv::write(csv_path, {"z_km", "magnitude_db", "kind"}, {z, mag, kind});

  std::ofstream os(text_path);
  if (!os)
    throw std::runtime_error("cannot open for writing: " + text_path.string());
  os << "anomaly report: " << report.events.size() << " event(s)\n";
  for (const auto& e : report.events)
    os << "  " << anomaly_kind_name(e.kind) << " at " << e.z_km
       << " km, magnitude " << e.magnitude_db << " dB\n";
}

void write_sweep_csv(const std::filesystem::path& path,
                     const SopSweepResult& sweep) {
  const auto n = static_cast<Eigen::Index>(sweep.candidates.size());
  Eigen::VectorXd theta(n), phi(n), split(n), plateau(n), pos(n), best(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = sweep.candidates[static_cast<size_t>(i)];
    theta[i] = c.theta_rad * 180.0 / M_PI;
    phi[i] = c.phi_rad * 180.0 / M_PI;
    split[i] = c.max_split_db;
    plateau[i] = c.plateau_split_db;
    pos[i] = c.split_position_km;
    best[i] = (static_cast<size_t>(i) == sweep.best) ? 1.0 : 0.0;
  }
  csv::write(path,
             {"theta_deg", "phi_deg", "max_split_db", "plateau_split_db",
              "split_position_km", "is_best"},
             {theta, phi, split, plateau, pos, best});
}

void write_manifest(const std::filesystem::path& out_dir,
                    const std::vector<std::string>& files) {
  json j;
  j["files"] = json::array();
  std::vector<std::string> sorted = files;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& f : sorted) {
    const auto p = out_dir / f;
    json entry;
    entry["path"] = f;
    entry["bytes"] = std::filesystem::file_size(p);
    entry["sha256"] = sha256_file_hex(p);
    j["files"].push_back(entry);
  }
  std::ofstream os(out_dir / "manifest.json");
  os << j.dump(2) << "\n";
}

// --- run_scenario ------------------------------------------------------------

namespace {

struct EnsembleMember {
  double time_s = 0.0;
  ProfileEstimate profile;
  GroundTruthProfile truth;
};

} // namespace

RunResult run_scenario(const ScenarioConfig& cfg_in,
                       const std::filesystem::path& out_dir,
                       const RunOverrides& overrides) {
  ScenarioConfig cfg = cfg_in;
  if (overrides.seed) {
    cfg.seed = *overrides.seed;
    cfg.tx.seed = *overrides.seed;
  }
  cfg.validate();

  std::filesystem::create_directories(out_dir);
  std::vector<std::string> files;
  auto emit = [&](const std::string& name) { files.push_back(name); };

  const EstimatorConfig est_cfg = cfg.estimator_config();
  const Waveform tx_wave = build_tx_waveform(cfg.tx);
  const ReferenceBundle ref = make_reference(tx_wave, cfg.tx);
  const double total_cd = cfg.link.total_cd_ps_nm();

  PropagateOptions sim;
  sim.step_km = cfg.step_km;
  sim.noise_seed = cfg.seed;
  sim.truth_delta_z_km = cfg.estimator_delta_z_km;

  const bool cd_diversity = !cfg.dimensions.cd_values_ps_nm_km.empty();
  OLT_LOG_INFO("run_scenario '" << cfg.name << "': "
               << (cd_diversity ? cfg.dimensions.cd_values_ps_nm_km.size()
                                : static_cast<size_t>(cfg.dimensions.n_captures))
               << " ensemble member(s)");

  // Ensemble: either CD-diversity (frequency emulation) or a capture series.
  std::vector<EnsembleMember> members;
  std::vector<AlignedPair> pairs; // kept for the SOP sweep
  const bool want_sweep =
      cfg.outputs.wants("sop_sweep") && cfg.dimensions.sweep_enabled;
  if (cd_diversity) {
    const auto& cds = cfg.dimensions.cd_values_ps_nm_km;
    members.resize(cds.size());
    if (want_sweep) pairs.resize(cds.size());
    parallel_for(cds.size(), [&](size_t i) {
      LinkSpec link = cfg.link;
      for (auto& span : link.spans) span.fiber.dispersion_ps_nm_km = cds[i];
      PropagateOptions o = sim;
      o.noise_seed = rng::substream(cfg.seed, i);
      auto res = propagate(tx_wave, link, o);
      const Waveform rx = demodulate(res.rx, link.total_cd_ps_nm(), cfg.tx);
      AlignedPair pair = align(rx, ref);
      EstimatorConfig ec = est_cfg;
      ec.cd_coefficient_ps_nm_km = cds[i];
      ec.beta2_override_ps2_km.reset();
      members[i] =
          EnsembleMember{0.0, estimate(pair, ec), std::move(res.truth)};
      if (want_sweep) pairs[i] = std::move(pair);
    });
  } else if (cfg.dimensions.fresh_pattern_per_capture) {
    // live-traffic-like series: a new symbol pattern every capture
    const auto n = static_cast<size_t>(cfg.dimensions.n_captures);
    members.resize(n);
    if (want_sweep) pairs.resize(n);
    parallel_for(n, [&](size_t i) {
      TxConfig txc = cfg.tx;
      txc.seed = rng::substream(cfg.seed, 9000 + i);
      const Waveform tx_i = build_tx_waveform(txc);
      PropagateOptions o = sim;
      o.capture_time_s = cfg.dimensions.capture_interval_s * static_cast<double>(i);
      o.noise_seed = rng::substream(cfg.seed, i);
      auto res = propagate(tx_i, cfg.link, o);
      const Waveform rx = demodulate(res.rx, total_cd, cfg.tx);
      AlignedPair pair = align(rx, make_reference(tx_i, txc));
      members[i] = EnsembleMember{o.capture_time_s, estimate(pair, est_cfg),
                                  std::move(res.truth)};
      if (want_sweep) pairs[i] = std::move(pair);
    });
  } else {
    auto captures = capture_series(tx_wave, cfg.link, sim,
                                   cfg.dimensions.capture_interval_s,
                                   cfg.dimensions.n_captures);
    members.resize(captures.size());
    if (want_sweep) pairs.resize(captures.size());
    if (cfg.outputs.wants("waveforms")) {
      write_waveform(out_dir / "tx.oltw", tx_wave);
      emit("tx.oltw");
    }
    parallel_for(captures.size(), [&](size_t i) {
      auto& cap = captures[i];
      if (cfg.outputs.wants("waveforms")) {
        char name[32];
        std::snprintf(name, sizeof(name), "rx_%03zu.oltw", i);
        write_waveform(out_dir / name, cap.rx);
      }
      const Waveform rx = demodulate(cap.rx, total_cd, cfg.tx);
      AlignedPair pair = align(rx, ref);
      members[i] = EnsembleMember{cap.time_s, estimate(pair, est_cfg),
                                  std::move(cap.truth)};
      if (want_sweep) pairs[i] = std::move(pair);
    });
    if (cfg.outputs.wants("waveforms"))
      for (size_t i = 0; i < captures.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "rx_%03zu.oltw", i);
        emit(name);
      }
  }

  if (cfg.outputs.wants("truth")) {
    write_truth_csv(out_dir / "truth.csv", members.front().truth);
    emit("truth.csv");
  }

  std::vector<ProfileEstimate> ensemble;
  ensemble.reserve(members.size());
  for (auto& m : members) ensemble.push_back(m.profile);

  // Averaged headline profile (and a dual-channel variant for PDL flags).
  AverageDims dims = cfg.dimensions.average;
  if (ensemble.size() > 1 && !dims.time && !dims.frequency)
    dims.frequency = cd_diversity, dims.time = !cd_diversity;
  AverageDims dims_dual = dims;
  dims_dual.polarization = false;
  const ProfileEstimate headline_dual = average_profiles(ensemble, dims_dual);
  const ProfileEstimate headline =
      dims.polarization ? average_profiles(ensemble, dims) : headline_dual;
  if (cfg.outputs.wants("profile")) {
    write_profile_csv(out_dir / "profile.csv", headline);
    emit("profile.csv");
    if (overrides.plots) {
      std::vector<svg::Series> series;
      const Eigen::VectorXd total_w =
          headline.dual() ? (headline.power_x_w + headline.power_y_w).eval()
                          : (2.0 * headline.power_x_w).eval();
      series.push_back(
          {"estimate", headline.grid.z_positions_km, to_dbm(total_w)});
      const auto& truth = members.front().truth;
      series.push_back({"truth", truth.grid.z_positions_km,
                        to_dbm(truth.power_x_w + truth.power_y_w)});
      svg::write_line_plot(out_dir / "profile.svg", series, "distance (km)",
                           "power (dBm)", cfg.name);
      emit("profile.svg");
    }
  }
  if (cfg.outputs.wants("profiles_all")) {
    for (size_t i = 0; i < ensemble.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "profile_%03zu.csv", i);
      write_profile_csv(out_dir / name, ensemble[i]);
      emit(name);
    }
  }

  if (cfg.outputs.wants("snr") && ensemble.size() >= 2) {
    const auto& truth = members.front().truth;
    const SnrReport single = snr_pp(truth, ensemble, SnrChannel::x);
    const SnrReport pol_avg = snr_pp(truth, ensemble, SnrChannel::pol_mean);
    write_snr_csv(out_dir / "snr_single_pol.csv", single, est_cfg.grid);
    write_snr_csv(out_dir / "snr_pol_avg.csv", pol_avg, est_cfg.grid);
    emit("snr_single_pol.csv");
    emit("snr_pol_avg.csv");
    std::ofstream os(out_dir / "snr.txt");
    os << "power-profile SNR over " << single.n_ensembles << " ensembles\n"
       << "  single-pol mean: " << single.mean_snr_db << " dB\n"
       << "  pol-averaged mean: " << pol_avg.mean_snr_db << " dB\n"
       << "  polarization-averaging gain: "
       << pol_avg.mean_snr_db - single.mean_snr_db << " dB\n";
    os.close();
    emit("snr.txt");
  }

  if (cfg.outputs.wants("anomalies")) {
    const AnomalyReport report = detect_anomalies(
        headline_dual, cfg.link, cfg.outputs.anomaly_threshold_db);
    write_anomaly_report(out_dir / "anomalies.csv", out_dir / "anomalies.txt",
                         report);
    emit("anomalies.csv");
    emit("anomalies.txt");
  }

  if (want_sweep) {
    const SopSweepResult sweep =
        sop_sweep(pairs, est_cfg, cfg.dimensions.sweep_grid_theta,
                  cfg.dimensions.sweep_grid_phi);
    write_sweep_csv(out_dir / "sop_sweep.csv", sweep);
    emit("sop_sweep.csv");
    write_profile_csv(out_dir / "sop_best_profile.csv",
                      sweep.candidates[sweep.best].profile);
    emit("sop_best_profile.csv");
  }

  if (cfg.outputs.wants("spectral_map") &&
      !cfg.dimensions.frequencies_hz.empty()) {
    SpectralScenario sc;
    sc.tx = cfg.tx;
    sc.link = cfg.link;
    sc.sim = sim;
    sc.estimator = est_cfg;
    sc.per_channel_power_dbm = cfg.dimensions.per_channel_power_dbm;
    const TomographyMap map =
        spectral_map(sc, cfg.dimensions.frequencies_hz);
    write_map_csv(out_dir / "spectral_map.csv", map);
    emit("spectral_map.csv");
    if (overrides.plots) {
      svg::write_heat_map(out_dir / "spectral_map.svg", map.power_dbm,
                          map.grid.z_positions_km, map.axis_values,
                          "frequency (Hz)", "distance (km)", cfg.name);
      emit("spectral_map.svg");
    }
  }

  if (cfg.outputs.wants("temporal_map")) {
    std::vector<double> times;
    for (const auto& m : members) times.push_back(m.time_s);
    const TomographyMap map =
        temporal_map(times, ensemble, cfg.dimensions.temporal_window);
    write_map_csv(out_dir / "temporal_map.csv", map);
    emit("temporal_map.csv");
    if (overrides.plots) {
      svg::write_heat_map(out_dir / "temporal_map.svg", map.power_dbm,
                          map.grid.z_positions_km, map.axis_values,
                          "time (s)", "distance (km)", cfg.name);
      emit("temporal_map.svg");
    }
  }

  write_manifest(out_dir, files);
  RunResult result;
  result.out_dir = out_dir;
  result.files = std::move(files);
  return result;
}

} // namespace olt
