#include "olt/linksim.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "olt/fft.hpp"
#include "olt/parallel.hpp"
#include "olt/rng.hpp"
#include "olt/waveform_ops.hpp"

namespace olt {
namespace {

constexpr double kManakov = 8.0 / 9.0;

double element_position_km(const Element& e) {
  return std::visit(
      [](const auto& el) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(el)>, Amplifier>)
          return 0.0;
        else
          return el.position_km;
      },
      e);
}

// Accumulates cell averages of the piecewise-exponential power evolution.
class TruthAccumulator {
public:
  TruthAccumulator(double total_length_km, double dz_km)
      : dz_(dz_km), grid_(make_grid(total_length_km, dz_km)) {
    sum_x_ = Eigen::VectorXd::Zero(grid_.size());
    sum_y_ = Eigen::VectorXd::Zero(grid_.size());
    gamma_ = Eigen::VectorXd::Zero(grid_.size());
  }

  // Fiber stretch [z0, z0+len) with entry powers (px, py) decaying at alpha.
  void add_fiber(double z0, double len, double px, double py,
                 double alpha_db_km) {
    const double k = alpha_db_km * std::log(10.0) / 10.0; // 1/km, field power
    double a = z0;
    const double z1 = z0 + len;
    while (a < z1 - 1e-12) {
      const auto cell = static_cast<Eigen::Index>(a / dz_ + 1e-9);
      const double b = std::min(z1, (static_cast<double>(cell) + 1.0) * dz_);
      double w; // integral of exp(-k (z - z0)) over [a, b)
      if (k > 0.0)
        w = (std::exp(-k * (a - z0)) - std::exp(-k * (b - z0))) / k;
      else
        w = b - a;
      if (cell >= 0 && cell < grid_.size()) {
        sum_x_[cell] += px * w;
        sum_y_[cell] += py * w;
      }
      a = b;
    }
  }

  void set_gamma(double z0, double len, double gamma) {
    for (Eigen::Index m = 0; m < grid_.size(); ++m) {
      const double zc = grid_.z_positions_km[m];
      if (zc >= z0 - 1e-9 && zc < z0 + len - 1e-9) gamma_[m] = gamma;
    }
  }

  GroundTruthProfile finish() const {
    GroundTruthProfile t;
    t.grid = grid_;
    t.power_x_w = sum_x_ / dz_;
    t.power_y_w = sum_y_ / dz_;
    t.gamma_prime_x = kManakov * gamma_.cwiseProduct(t.power_x_w);
    t.gamma_prime_y = kManakov * gamma_.cwiseProduct(t.power_y_w);
    return t;
  }

private:
  double dz_;
  PositionGrid grid_;
  Eigen::VectorXd sum_x_, sum_y_, gamma_;
};

class SplitStepEngine {
public:
  SplitStepEngine(Waveform field, const PropagateOptions& opts)
      : field_(std::move(field)), opts_(opts) {}

  // Symmetric split step over n_steps of length step_km. The field enters
  // and leaves in the time domain.
  void run_fiber(const FiberParams& fiber, double z0_km, Eigen::Index n_steps,
                 TruthAccumulator& truth) {
    const double dz = opts_.step_km;
    const double beta2 = fiber.beta2_ps2_km(field_.center_frequency_hz);
    truth.add_fiber(z0_km, static_cast<double>(n_steps) * dz, px_, py_,
                    fiber.alpha_db_per_km);
    truth.set_gamma(z0_km, static_cast<double>(n_steps) * dz,
                    fiber.gamma_per_w_km);

    const Eigen::Index n = field_.size();
    const Eigen::ArrayXd omega =
        fft::angular_frequencies(n, field_.sample_rate_hz);
    const double loss_half = std::pow(10.0, -fiber.alpha_db_per_km * dz / 40.0);
    const CArray half =
        loss_half *
        (Complex(0.0, 0.5 * beta2 * dz * 1e-24 * 0.5) * omega.square()).exp();
    const CArray full = half.square();
    const double nl_coeff = kManakov * fiber.gamma_per_w_km * dz;

    fft::forward_inplace(field_.x);
    fft::forward_inplace(field_.y);
    field_.x *= half;
    field_.y *= half;
    for (Eigen::Index s = 0; s < n_steps; ++s) {
      fft::inverse_inplace(field_.x);
      fft::inverse_inplace(field_.y);
      const CArray rot =
          (Complex(0.0, -nl_coeff) * (field_.x.abs2() + field_.y.abs2()))
              .exp();
      field_.x *= rot;
      field_.y *= rot;
      fft::forward_inplace(field_.x);
      fft::forward_inplace(field_.y);
      const CArray& lin = (s + 1 < n_steps) ? full : half;
      field_.x *= lin;
      field_.y *= lin;
    }
    fft::inverse_inplace(field_.x);
    fft::inverse_inplace(field_.y);

    const double decay =
        std::pow(10.0, -fiber.alpha_db_per_km * n_steps * dz / 10.0);
    px_ *= decay;
    py_ *= decay;
  }

  void apply_element(const Element& e) {
    std::visit([&](const auto& el) { apply(el); }, e);
  }

  void measure() {
    px_ = field_.mean_power_x_w();
    py_ = field_.mean_power_y_w();
  }

  const Waveform& field() const { return field_; }
  Waveform take_field() { return std::move(field_); }
  double power_x() const { return px_; }
  double power_y() const { return py_; }

private:
  void apply(const Amplifier& amp) {
    double gain;
    if (amp.mode == AmplifierMode::fixed_gain) {
      gain = db_to_linear(amp.gain_db);
    } else {
      const double pin = px_ + py_;
      if (!(pin > 0.0))
        throw std::runtime_error(
            "propagate: fixed-output amplifier with zero input power");
      gain = dbm_to_watts(amp.output_power_dbm) / pin;
    }
    const double s = std::sqrt(gain);
    field_.x *= s;
    field_.y *= s;
    // ASE, white over the simulation bandwidth, independent per polarization.
    const double psd = (gain - 1.0) * constants::planck_j_s *
                       field_.center_frequency_hz *
                       db_to_linear(amp.noise_figure_db) / 2.0;
    const double sigma2 = std::max(0.0, psd * field_.sample_rate_hz);
    if (sigma2 > 0.0) {
      const double sigma = std::sqrt(sigma2);
      std::mt19937_64 engine(rng::substream(opts_.noise_seed, amp_counter_));
      for (Eigen::Index i = 0; i < field_.size(); ++i)
        field_.x[i] += sigma * rng::complex_normal(engine);
      for (Eigen::Index i = 0; i < field_.size(); ++i)
        field_.y[i] += sigma * rng::complex_normal(engine);
    }
    ++amp_counter_;
    measure();
  }

  void apply(const LumpedLoss& loss) {
    const double s = std::pow(10.0, -loss.loss_db / 20.0);
    field_.x *= s;
    field_.y *= s;
    px_ *= s * s;
    py_ *= s * s;
  }

  void apply(const PdlElement& pdl) {
    const Eigen::Matrix2cd u =
        jones_matrix(pdl.axis_theta_rad, pdl.axis_phi_rad);
    Eigen::Matrix2cd j = Eigen::Matrix2cd::Zero();
    j(0, 0) = std::pow(10.0, +pdl.pdl_db / 40.0);
    j(1, 1) = std::pow(10.0, -pdl.pdl_db / 40.0);
    j = u * j * u.adjoint();
    const CArray x = j(0, 0) * field_.x + j(0, 1) * field_.y;
    field_.y = j(1, 0) * field_.x + j(1, 1) * field_.y;
    field_.x = x;
    measure();
  }

  void apply(const Voa& voa) {
    apply(LumpedLoss{voa_attenuation_db(voa, opts_.capture_time_s), 0.0});
  }

  Waveform field_;
  PropagateOptions opts_;
  double px_ = 0.0, py_ = 0.0;
  uint64_t amp_counter_ = 0;
};

} // namespace

double LinkSpec::total_length_km() const {
  double L = 0.0;
  for (const auto& s : spans) L += s.fiber.length_km;
  return L;
}

double LinkSpec::total_cd_ps_nm() const {
  double cd = 0.0;
  for (const auto& s : spans)
    cd += s.fiber.dispersion_ps_nm_km * s.fiber.length_km;
  return cd;
}

void LinkSpec::validate() const {
  if (spans.empty()) throw std::invalid_argument("LinkSpec: need >= 1 span");
  for (const auto& s : spans) {
    s.fiber.validate();
    for (const auto& e : s.elements_at_input) {
      const double pos = element_position_km(e);
      if (pos < 0.0 || pos > s.fiber.length_km)
        throw std::invalid_argument("LinkSpec: element outside its span");
      if (const auto* loss = std::get_if<LumpedLoss>(&e); loss && loss->loss_db < 0.0)
        throw std::invalid_argument("LinkSpec: loss_db must be >= 0");
      if (const auto* pdl = std::get_if<PdlElement>(&e); pdl && pdl->pdl_db < 0.0)
        throw std::invalid_argument("LinkSpec: pdl_db must be >= 0");
      if (const auto* voa = std::get_if<Voa>(&e)) {
        for (size_t i = 1; i < voa->schedule.size(); ++i)
          if (voa->schedule[i].first <= voa->schedule[i - 1].first)
            throw std::invalid_argument(
                "LinkSpec: VOA schedule times must be strictly increasing");
      }
    }
  }
}

double voa_attenuation_db(const Voa& voa, double time_s) {
  double att = 0.0;
  for (const auto& [t, a] : voa.schedule) {
    if (t <= time_s)
      att = a;
    else
      break;
  }
  return att;
}

PropagateResult propagate(const Waveform& w, const LinkSpec& link,
                          const PropagateOptions& opts) {
  w.validate();
  link.validate();
  if (!(opts.step_km > 0.0))
    throw std::invalid_argument("propagate: step must be > 0");

  TruthAccumulator truth(link.total_length_km(), opts.truth_delta_z_km);
  SplitStepEngine engine(w, opts);
  engine.measure();

  double z_abs = 0.0;
  for (const auto& span : link.spans) {
    const double L = span.fiber.length_km;
    const double steps_d = L / opts.step_km;
    const auto n_steps = static_cast<Eigen::Index>(std::llround(steps_d));
    if (n_steps < 1 || std::abs(steps_d - static_cast<double>(n_steps)) > 1e-6)
      throw std::invalid_argument("propagate: step_km must divide span length");

    // Element boundaries snapped to the step grid, applied in list order.
    std::map<Eigen::Index, std::vector<const Element*>> at_boundary;
    for (const auto& e : span.elements_at_input) {
      const auto idx = static_cast<Eigen::Index>(
          std::llround(element_position_km(e) / opts.step_km));
      at_boundary[std::clamp<Eigen::Index>(idx, 0, n_steps)].push_back(&e);
    }

    Eigen::Index done = 0;
    auto run_to = [&](Eigen::Index target) {
      if (target > done) {
        engine.run_fiber(span.fiber, z_abs + done * opts.step_km,
                         target - done, truth);
        done = target;
      }
    };
    for (const auto& [idx, elements] : at_boundary) {
      run_to(idx);
      for (const Element* e : elements) engine.apply_element(*e);
    }
    run_to(n_steps);
    z_abs += L;
  }
  for (const auto& e : link.post_link_elements) engine.apply_element(e);

  return {engine.take_field(), truth.finish()};
}

std::vector<Capture> capture_series(const Waveform& w, const LinkSpec& link,
                                    const PropagateOptions& base,
                                    double interval_s, int n_captures) {
  if (n_captures < 1)
    throw std::invalid_argument("capture_series: n_captures must be >= 1");
  std::vector<Capture> out(static_cast<size_t>(n_captures));
  parallel_for(static_cast<size_t>(n_captures), [&](size_t k) {
    PropagateOptions opts = base;
    opts.capture_time_s = base.capture_time_s + interval_s * static_cast<double>(k);
    opts.noise_seed = rng::substream(base.noise_seed, k);
    auto res = propagate(w, link, opts);
    res.rx.t0_offset_s = opts.capture_time_s;
    out[k] = Capture{opts.capture_time_s, std::move(res.rx),
                     std::move(res.truth)};
  });
  return out;
}

} // namespace olt
