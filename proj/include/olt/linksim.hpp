#ifndef OLT_LINKSIM_HPP
#define OLT_LINKSIM_HPP

#include <variant>
#include <vector>

#include "olt/types.hpp"

namespace olt {

enum class AmplifierMode { fixed_gain, fixed_output_power };

struct Amplifier {
  double gain_db = 10.0;
  double noise_figure_db = 5.0;
  AmplifierMode mode = AmplifierMode::fixed_gain;
  double output_power_dbm = 0.0; // total (both polarizations), fixed_output mode
};

struct LumpedLoss {
  double loss_db = 0.0;
  double position_km = 0.0; // within the span
};

/// Polarization-dependent loss, symmetric split: diag(+pdl/4, -pdl/4) dB in
/// field amplitude around unity in its own (theta, phi) axis basis, so the
/// element is loss-neutral for unpolarized light. Model insertion loss as a
/// co-located LumpedLoss.
struct PdlElement {
  double pdl_db = 0.0;
  double axis_theta_rad = 0.0;
  double axis_phi_rad = 0.0;
  double position_km = 0.0;
};

struct Voa {
  std::vector<std::pair<double, double>> schedule; // (time_s, attenuation_db)
  double position_km = 0.0;
};

using Element = std::variant<Amplifier, LumpedLoss, PdlElement, Voa>;

struct Span {
  FiberParams fiber{};
  std::vector<Element> elements_at_input;
};

struct LinkSpec {
  std::vector<Span> spans;
  std::vector<Element> post_link_elements;

  double total_length_km() const;
  double total_cd_ps_nm() const; // sum of D * length over spans
  void validate() const;
};

/// VOA attenuation in force at a given time (last schedule entry with
/// time_s <= t; 0 dB before the first entry).
double voa_attenuation_db(const Voa& voa, double time_s);

struct GroundTruthProfile {
  PositionGrid grid;
  Eigen::VectorXd power_x_w;
  Eigen::VectorXd power_y_w;
  Eigen::VectorXd gamma_prime_x; // (8/9) gamma(z) P_x(z), 1/km
  Eigen::VectorXd gamma_prime_y;
};

struct PropagateOptions {
  double step_km = 0.2;
  uint64_t noise_seed = 0;
  double capture_time_s = 0.0; // selects the VOA schedule entry in force
  double truth_delta_z_km = 1.0;
};

struct PropagateResult {
  Waveform rx;
  GroundTruthProfile truth;
};

/// Symmetric split-step solution of the Manakov model across the link, with
/// in-line elements applied at their positions and amplifier ASE drawn from
/// per-amplifier noise substreams. Deterministic given (inputs, seed).
PropagateResult propagate(const Waveform& w, const LinkSpec& link,
                          const PropagateOptions& opts);

struct Capture {
  double time_s = 0.0;
  Waveform rx;
  GroundTruthProfile truth;
};

/// Repeated propagation of the same transmit waveform with per-capture noise
/// substreams; the VOA schedule is evaluated at each capture time. Captures
/// are computed in parallel (substreams are independent by construction).
std::vector<Capture> capture_series(const Waveform& w, const LinkSpec& link,
                                    const PropagateOptions& base,
                                    double interval_s, int n_captures);

} // namespace olt

#endif // OLT_LINKSIM_HPP
