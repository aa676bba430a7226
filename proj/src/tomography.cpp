#include "olt/tomography.hpp"

#include <cmath>
#include <cstdio>
#include <Eigen/Dense>

#include "olt/fft.hpp"
#include "olt/log.hpp"
#include "olt/waveform_ops.hpp"

namespace olt {
namespace {

constexpr Complex kMinusJ{0.0, -1.0};

// Shared per-pair state for kernel generation: raw (launch-calibrated)
// reference spectra, normalized perturbation segments, edge bookkeeping.
struct PairContext {
  Eigen::Index n = 0;         // capture length
  Eigen::Index edge = 0;      // excluded rows at each end
  Eigen::Index rows = 0;      // n - 2*edge
  double beta2_s2_km = 0.0;   // beta2 in s^2 per km
  double dz_km = 0.0;
  double px0 = 0.0, py0 = 0.0; // launch powers per polarization, W
  CArray spec_x, spec_y;       // FFT of the pre-filter reference
  CArray mf;                   // receive filter response per bin (ones if none)
  CArray a1x, a1y;             // normalized perturbation, segment rows only
  Eigen::ArrayXd omega2;       // squared angular frequency per bin
  // Orthonormal basis of the reference-tributary subspace on the segment
  // rows; empty when the linear-component projection is disabled.
  std::vector<CArray> ref_basis;

  void project_out(CArray& v) const {
    for (const CArray& q : ref_basis)
      v -= ((q.conjugate() * v).sum()) * q;
  }
};

Eigen::Index auto_edge_exclusion(double beta2_ps2_km, double length_km,
                                 double sample_rate_hz, Eigen::Index n) {
  const double beta2L_s2 = std::abs(beta2_ps2_km) * length_km * 1e-24;
  const double spread_s = beta2L_s2 * M_PI * sample_rate_hz;
  const auto e = static_cast<Eigen::Index>(std::ceil(spread_s * sample_rate_hz));
  return std::min(e, n / 4);
}

PairContext make_context(const AlignedPair& pair, const EstimatorConfig& cfg) {
  pair.rx.validate();
  pair.ref.validate();
  if (pair.rx.size() != pair.ref.size())
    throw std::invalid_argument("tomography: rx/ref length mismatch");
  cfg.validate();

  PairContext ctx;
  ctx.n = pair.ref.size();
  ctx.beta2_s2_km = cfg.beta2_ps2_km(pair.ref.center_frequency_hz) * 1e-24;
  ctx.dz_km = cfg.grid.delta_z_km;
  ctx.edge = cfg.edge_exclusion_samples >= 0
                 ? cfg.edge_exclusion_samples
                 : auto_edge_exclusion(
                       cfg.beta2_ps2_km(pair.ref.center_frequency_hz),
                       cfg.grid.length_km(), pair.ref.sample_rate_hz, ctx.n);
  ctx.rows = ctx.n - 2 * ctx.edge;
  if (ctx.rows < 8 || ctx.rows <= cfg.grid.size())
    throw std::invalid_argument(
        "tomography: capture too short after edge exclusion");

  ctx.px0 = pair.launch_coherency(0, 0).real();
  ctx.py0 = pair.launch_coherency(1, 1).real();
  if (!(ctx.px0 > 0.0))
    throw std::invalid_argument("tomography: launch calibration missing");
  if (cfg.mode == EstimatorMode::dual_pol && !(ctx.py0 > 0.0))
    throw std::invalid_argument(
        "tomography: dual_pol mode needs both launch powers");

  const bool has_raw = pair.ref_raw.size() == ctx.n;
  ctx.spec_x = fft::forward(has_raw ? pair.ref_raw.x : pair.ref.x);
  ctx.spec_y = fft::forward(has_raw ? pair.ref_raw.y : pair.ref.y);
  if (pair.mf_response.size() == ctx.n)
    ctx.mf = pair.mf_response;
  else
    ctx.mf = CArray::Ones(ctx.n);

  ctx.a1x = (pair.rx.x - pair.ref.x).segment(ctx.edge, ctx.rows) /
            std::sqrt(ctx.px0);
  if (ctx.py0 > 0.0)
    ctx.a1y = (pair.rx.y - pair.ref.y).segment(ctx.edge, ctx.rows) /
              std::sqrt(ctx.py0);
  else
    ctx.a1y = CArray::Zero(ctx.rows);
  ctx.omega2 =
      fft::angular_frequencies(ctx.n, pair.ref.sample_rate_hz).square();

  if (cfg.remove_linear_component) {
    // Gram-Schmidt over the filtered reference tributaries (segment rows).
    for (const CArray* r : {&pair.ref.x, &pair.ref.y}) {
      CArray v = r->segment(ctx.edge, ctx.rows);
      ctx.project_out(v);
      const double norm = std::sqrt(v.abs2().sum());
      if (norm > 1e-9 * std::sqrt(ctx.px0 * ctx.rows))
        ctx.ref_basis.push_back(v / norm);
    }
    ctx.project_out(ctx.a1x);
    ctx.project_out(ctx.a1y);
  }
  return ctx;
}

CArray phase_for(const PairContext& ctx, double z_km) {
  return (Complex(0.0, 0.5 * ctx.beta2_s2_km * z_km) * ctx.omega2).exp();
}

// Reference tributaries dispersed to z (time domain), given the phase array.
void fields_at(const PairContext& ctx, const CArray& phase, CArray& ax,
               CArray& ay) {
  ax = ctx.spec_x * phase;
  fft::inverse_inplace(ax);
  ay = ctx.spec_y * phase;
  fft::inverse_inplace(ay);
}

// One cubic product, carried back to the receive frame through the receive
// filter, segment rows only, reference subspace projected out.
CArray back_dispersed(const PairContext& ctx, const CArray& phase,
                      const CArray& product) {
  CArray spec = product;
  fft::forward_inplace(spec);
  spec *= phase.conjugate() * ctx.mf;
  fft::inverse_inplace(spec);
  CArray out = spec.segment(ctx.edge, ctx.rows);
  ctx.project_out(out);
  return out;
}

struct SolveInput {
  Eigen::MatrixXd normal;
  Eigen::VectorXd projection;
  double im_projection_norm = 0.0;
  double a1_norm2 = 0.0;
  Eigen::Index rows_used = 0;
};

ProfileEstimate solve_normal_equations(const SolveInput& in,
                                       const EstimatorConfig& cfg,
                                       EstimatorMode mode, double theta,
                                       double phi) {
  const Eigen::Index cols = in.normal.rows();
  const Eigen::Index m = cfg.grid.size();

  Eigen::MatrixXd s_reg = in.normal;
  if (cfg.lambda_reg > 0.0) {
    const Eigen::MatrixXd r = regularization_matrix(cfg.reg_matrix, m);
    for (Eigen::Index b = 0; b < cols / m; ++b)
      s_reg.block(b * m, b * m, m, m) += cfg.lambda_reg * r;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s_reg);
  const double min_eig = es.eigenvalues()(0);
  const double max_eig = es.eigenvalues()(cols - 1);
  if (!(max_eig > 0.0) || min_eig <= max_eig * 1e-13) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "solve_profile: normal matrix is numerically singular; "
                  "smallest eigenvalue = %.6e (largest %.6e)",
                  min_eig, max_eig);
    throw std::runtime_error(msg);
  }

  const Eigen::VectorXd gamma =
      es.eigenvectors() *
      (es.eigenvectors().transpose() * in.projection).cwiseQuotient(
          es.eigenvalues());

  ProfileEstimate est;
  est.grid = cfg.grid;
  est.basis_theta_rad = theta;
  est.basis_phi_rad = phi;
  if (mode == EstimatorMode::dual_pol) {
    est.gamma_prime_x = gamma.head(m);
    est.gamma_prime_y = gamma.tail(m);
    const double c = 9.0 / (8.0 * cfg.gamma_nominal_per_w_km);
    est.power_x_w = c * est.gamma_prime_x;
    est.power_y_w = c * est.gamma_prime_y;
  } else {
    est.gamma_prime_x = gamma;
    est.power_x_w = gamma / cfg.gamma_nominal_per_w_km;
  }
  const double resid2 = in.a1_norm2 - 2.0 * gamma.dot(in.projection) +
                        gamma.dot(in.normal * gamma);
  est.diagnostics.residual_norm = std::sqrt(std::max(0.0, resid2));
  est.diagnostics.a1_norm = std::sqrt(std::max(0.0, in.a1_norm2));
  est.diagnostics.im_projection_norm = in.im_projection_norm;
  est.diagnostics.condition = max_eig / min_eig;
  est.diagnostics.min_eigenvalue = min_eig;
  est.diagnostics.rows_used = in.rows_used;
  return est;
}

// Column tile for the direct (identity-basis) model; handles both modes.
// Dual mode stacks x rows on y rows and pairs each cell's gamma_x column
// with its gamma_y column at offset tile_cells.
class TileBuilder {
public:
  TileBuilder(const PairContext& ctx, EstimatorMode mode)
      : ctx_(ctx), mode_(mode) {
    fxx_ = kMinusJ * ctx.dz_km / (ctx.px0 * std::sqrt(ctx.px0));
    if (ctx.py0 > 0.0) {
      fyx_ = kMinusJ * ctx.dz_km / (ctx.px0 * std::sqrt(ctx.py0));
      fxy_ = kMinusJ * ctx.dz_km / (ctx.py0 * std::sqrt(ctx.px0));
      fyy_ = kMinusJ * ctx.dz_km / (ctx.py0 * std::sqrt(ctx.py0));
    } else {
      fyx_ = fxy_ = fyy_ = 0.0;
    }
  }

  // Builds columns for grid cells [c0, c0+count).
  void build(const PositionGrid& grid, Eigen::Index c0, Eigen::Index count,
             Eigen::MatrixXcd& tile) const {
    const bool dual = mode_ == EstimatorMode::dual_pol;
    tile.resize(dual ? 2 * ctx_.rows : ctx_.rows, dual ? 2 * count : count);
    CArray phase = phase_for(ctx_, grid.z_positions_km[c0]);
    const CArray delta = phase_for(ctx_, grid.delta_z_km);
    CArray ax, ay;
    for (Eigen::Index c = 0; c < count; ++c) {
      if (c > 0) phase *= delta;
      fields_at(ctx_, phase, ax, ay);
      if (dual) {
        const Eigen::ArrayXd px = ax.abs2();
        const Eigen::ArrayXd py = ay.abs2();
        tile.col(c).head(ctx_.rows) =
            fxx_ * back_dispersed(ctx_, phase, px * ax);
        tile.col(c).tail(ctx_.rows) =
            fyx_ * back_dispersed(ctx_, phase, px * ay);
        tile.col(count + c).head(ctx_.rows) =
            fxy_ * back_dispersed(ctx_, phase, py * ax);
        tile.col(count + c).tail(ctx_.rows) =
            fyy_ * back_dispersed(ctx_, phase, py * ay);
      } else {
        tile.col(c) = fxx_ * back_dispersed(ctx_, phase, ax.abs2() * ax);
      }
    }
  }

  // Global column index of local tile column j for a tile at [c0, c0+count).
  Eigen::Index global_col(Eigen::Index c0, Eigen::Index count, Eigen::Index j,
                          Eigen::Index m_total) const {
    if (mode_ == EstimatorMode::single_pol) return c0 + j;
    return j < count ? c0 + j : m_total + c0 + (j - count);
  }

private:
  const PairContext& ctx_;
  EstimatorMode mode_;
  Complex fxx_, fyx_, fxy_, fyy_;
};

Eigen::Index pick_tile_cells(const PairContext& ctx, EstimatorMode mode,
                             std::size_t budget_mb, Eigen::Index m) {
  const double rows = static_cast<double>(
      mode == EstimatorMode::dual_pol ? 2 * ctx.rows : ctx.rows);
  const double cols_per_cell = mode == EstimatorMode::dual_pol ? 2.0 : 1.0;
  const double bytes_per_cell = rows * cols_per_cell * 16.0;
  const double budget = static_cast<double>(budget_mb) * 1048576.0 / 2.0;
  const auto cells = static_cast<Eigen::Index>(budget / bytes_per_cell);
  return std::clamp<Eigen::Index>(cells, 4, m);
}

} // namespace

double EstimatorConfig::beta2_ps2_km(double center_frequency_hz) const {
  if (beta2_override_ps2_km) return *beta2_override_ps2_km;
  return beta2_from_dispersion(cd_coefficient_ps_nm_km, center_frequency_hz);
}

void EstimatorConfig::validate() const {
  grid.validate();
  if (!(lambda_reg >= 0.0) || !std::isfinite(lambda_reg))
    throw std::invalid_argument("EstimatorConfig: lambda must be finite, >= 0");
  if (!(gamma_nominal_per_w_km > 0.0))
    throw std::invalid_argument("EstimatorConfig: gamma_nominal must be > 0");
}

Eigen::VectorXd ProfileEstimate::scalar_profile() const {
  if (!dual()) return gamma_prime_x;
  return 0.5 * (gamma_prime_x + gamma_prime_y);
}

Eigen::MatrixXd regularization_matrix(RegMatrix kind, Eigen::Index n) {
  if (kind == RegMatrix::identity)
    return Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(n - 2, n);
  for (Eigen::Index i = 0; i + 2 < n; ++i) {
    d2(i, i) = 1.0;
    d2(i, i + 1) = -2.0;
    d2(i, i + 2) = 1.0;
  }
  return d2.transpose() * d2;
}

CellKernels nli_kernel(const AlignedPair& pair, double z_m_km,
                       const EstimatorConfig& cfg) {
  if (z_m_km < 0.0 || z_m_km > cfg.grid.length_km() + 1e-9)
    throw std::invalid_argument("nli_kernel: position outside the link");
  const PairContext ctx = make_context(pair, cfg);
  const CArray phase = phase_for(ctx, z_m_km);
  CArray ax, ay;
  fields_at(ctx, phase, ax, ay);

  CellKernels k;
  const Complex fxx = kMinusJ * ctx.dz_km / (ctx.px0 * std::sqrt(ctx.px0));
  if (cfg.mode == EstimatorMode::single_pol) {
    k.xx = fxx * back_dispersed(ctx, phase, ax.abs2() * ax);
    return k;
  }
  const Eigen::ArrayXd px = ax.abs2();
  const Eigen::ArrayXd py = ay.abs2();
  k.xx = fxx * back_dispersed(ctx, phase, px * ax);
  k.yx = kMinusJ * ctx.dz_km / (ctx.px0 * std::sqrt(ctx.py0)) *
         back_dispersed(ctx, phase, px * ay);
  k.xy = kMinusJ * ctx.dz_km / (ctx.py0 * std::sqrt(ctx.px0)) *
         back_dispersed(ctx, phase, py * ax);
  k.yy = kMinusJ * ctx.dz_km / (ctx.py0 * std::sqrt(ctx.py0)) *
         back_dispersed(ctx, phase, py * ay);
  return k;
}

AssembledModel assemble_model(const AlignedPair& pair,
                              const EstimatorConfig& cfg) {
  const PairContext ctx = make_context(pair, cfg);
  const bool dual = cfg.mode == EstimatorMode::dual_pol;
  const Eigen::Index m = cfg.grid.size();
  const Eigen::Index cols = dual ? 2 * m : m;

  Eigen::VectorXcd a1(dual ? 2 * ctx.rows : ctx.rows);
  a1.head(ctx.rows) = ctx.a1x.matrix();
  if (dual) a1.tail(ctx.rows) = ctx.a1y.matrix();

  Eigen::MatrixXcd normal_c = Eigen::MatrixXcd::Zero(cols, cols);
  Eigen::VectorXcd proj_c = Eigen::VectorXcd::Zero(cols);

  const TileBuilder builder(ctx, cfg.mode);
  const Eigen::Index tile_cells =
      pick_tile_cells(ctx, cfg.mode, cfg.memory_budget_mb, m);
  const Eigen::Index n_tiles = (m + tile_cells - 1) / tile_cells;
  OLT_LOG_DEBUG("assemble_model: " << m << " cells, " << ctx.rows
                                   << " rows, " << n_tiles << " tile(s)");

  auto tile_range = [&](Eigen::Index t) {
    const Eigen::Index c0 = t * tile_cells;
    return std::pair{c0, std::min(tile_cells, m - c0)};
  };

  Eigen::MatrixXcd ti, tj;
  Eigen::Index tj_index = -1;
  for (Eigen::Index i = 0; i < n_tiles; ++i) {
    const auto [ci0, ci_n] = tile_range(i);
    if (tj_index == i)
      ti.swap(tj);
    else
      builder.build(cfg.grid, ci0, ci_n, ti);

    const Eigen::MatrixXcd pr = ti.adjoint() * a1;
    const Eigen::MatrixXcd sii = ti.adjoint() * ti;
    for (Eigen::Index a = 0; a < ti.cols(); ++a) {
      const Eigen::Index ga = builder.global_col(ci0, ci_n, a, m);
      proj_c(ga) += pr(a, 0);
      for (Eigen::Index b = 0; b < ti.cols(); ++b)
        normal_c(ga, builder.global_col(ci0, ci_n, b, m)) = sii(a, b);
    }
    for (Eigen::Index j = i + 1; j < n_tiles; ++j) {
      const auto [cj0, cj_n] = tile_range(j);
      builder.build(cfg.grid, cj0, cj_n, tj);
      tj_index = j;
      const Eigen::MatrixXcd sij = ti.adjoint() * tj;
      for (Eigen::Index a = 0; a < ti.cols(); ++a) {
        const Eigen::Index ga = builder.global_col(ci0, ci_n, a, m);
        for (Eigen::Index b = 0; b < tj.cols(); ++b) {
          const Eigen::Index gb = builder.global_col(cj0, cj_n, b, m);
          normal_c(ga, gb) = sij(a, b);
          normal_c(gb, ga) = std::conj(sij(a, b));
        }
      }
    }
  }

  AssembledModel model;
  model.normal = normal_c.real();
  model.projection = proj_c.real();
  model.im_projection_norm = proj_c.imag().norm();
  model.a1_norm2 = a1.squaredNorm();
  model.rows_used = ctx.rows;
  model.grid = cfg.grid;
  model.mode = cfg.mode;
  return model;
}

ProfileEstimate solve_profile(const AssembledModel& model,
                              const EstimatorConfig& cfg) {
  SolveInput in{model.normal, model.projection, model.im_projection_norm,
                model.a1_norm2, model.rows_used};
  return solve_normal_equations(in, cfg, model.mode, 0.0, 0.0);
}

ProfileEstimate estimate(const AlignedPair& pair, const EstimatorConfig& cfg) {
  return solve_profile(assemble_model(pair, cfg), cfg);
}

// --- basis sweep engine -----------------------------------------------------

namespace {

// Monomial ordering: s = 2*pair + conj with pair in {xx, xy, yy} and the
// conjugated factor in {x, y}.
inline Eigen::Index mono_index(int pair_idx, int conj_idx) {
  return 2 * pair_idx + conj_idx;
}

// Weight vector of the kernel k_{rp} = A_p A_r conj(A_p) over the monomial
// basis, for analysis rows p_row = U.row(p), r_row = U.row(r).
Eigen::Matrix<Complex, 6, 1> kernel_weights(const Eigen::RowVector2cd& p_row,
                                            const Eigen::RowVector2cd& r_row) {
  const Complex cxx = p_row(0) * r_row(0);
  const Complex cxy = p_row(0) * r_row(1) + p_row(1) * r_row(0);
  const Complex cyy = p_row(1) * r_row(1);
  Eigen::Matrix<Complex, 6, 1> w;
  w(mono_index(0, 0)) = cxx * std::conj(p_row(0));
  w(mono_index(0, 1)) = cxx * std::conj(p_row(1));
  w(mono_index(1, 0)) = cxy * std::conj(p_row(0));
  w(mono_index(1, 1)) = cxy * std::conj(p_row(1));
  w(mono_index(2, 0)) = cyy * std::conj(p_row(0));
  w(mono_index(2, 1)) = cyy * std::conj(p_row(1));
  return w;
}

class MonoTileBuilder {
public:
  explicit MonoTileBuilder(const PairContext& ctx) : ctx_(ctx) {}

  void build(const PositionGrid& grid, Eigen::Index c0, Eigen::Index count,
             Eigen::MatrixXcd& tile) const {
    tile.resize(ctx_.rows, 6 * count);
    CArray phase = phase_for(ctx_, grid.z_positions_km[c0]);
    const CArray delta = phase_for(ctx_, grid.delta_z_km);
    CArray ax, ay;
    for (Eigen::Index c = 0; c < count; ++c) {
      if (c > 0) phase *= delta;
      fields_at(ctx_, phase, ax, ay);
      const CArray cax = ax.conjugate();
      const CArray cay = ay.conjugate();
      const Eigen::Index base = 6 * c;
      tile.col(base + 0) = back_dispersed(ctx_, phase, ax * ax * cax);
      tile.col(base + 1) = back_dispersed(ctx_, phase, ax * ax * cay);
      tile.col(base + 2) = back_dispersed(ctx_, phase, ax * ay * cax);
      tile.col(base + 3) = back_dispersed(ctx_, phase, ax * ay * cay);
      tile.col(base + 4) = back_dispersed(ctx_, phase, ay * ay * cax);
      tile.col(base + 5) = back_dispersed(ctx_, phase, ay * ay * cay);
    }
  }

private:
  const PairContext& ctx_;
};

} // namespace

BasisSweepEngine::BasisSweepEngine(const AlignedPair& pair,
                                   const EstimatorConfig& cfg)
    : cfg_(cfg) {
  if (cfg.mode != EstimatorMode::dual_pol)
    throw std::invalid_argument("BasisSweepEngine: dual_pol mode required");
  const PairContext ctx = make_context(pair, cfg);
  delta_z_km_ = ctx.dz_km;
  rows_used_ = ctx.rows;
  launch_coherency_ = pair.launch_coherency;

  const Eigen::Index m = cfg.grid.size();
  gram_.setZero(6 * m, 6 * m);
  projection_.setZero(6 * m, 2);
  Eigen::MatrixXcd a1(ctx.rows, 2);
  a1.col(0) = ctx.a1x.matrix() * std::sqrt(ctx.px0); // un-normalized here;
  a1.col(1) = ctx.a1y.matrix() * std::sqrt(ctx.py0); // scales live in weights
  a1_coherency_ = a1.adjoint() * a1;

  const MonoTileBuilder builder(ctx);
  // 6 columns per cell; budget for two resident tiles.
  const double bytes_per_cell = static_cast<double>(ctx.rows) * 6.0 * 16.0;
  const auto tile_cells = std::clamp<Eigen::Index>(
      static_cast<Eigen::Index>(static_cast<double>(cfg.memory_budget_mb) *
                                1048576.0 / 2.0 / bytes_per_cell),
      2, m);
  const Eigen::Index n_tiles = (m + tile_cells - 1) / tile_cells;

  auto tile_range = [&](Eigen::Index t) {
    const Eigen::Index c0 = t * tile_cells;
    return std::pair{c0, std::min(tile_cells, m - c0)};
  };

  Eigen::MatrixXcd ti, tj;
  Eigen::Index tj_index = -1;
  for (Eigen::Index i = 0; i < n_tiles; ++i) {
    const auto [ci0, ci_n] = tile_range(i);
    if (tj_index == i)
      ti.swap(tj);
    else
      builder.build(cfg.grid, ci0, ci_n, ti);
    projection_.middleRows(6 * ci0, 6 * ci_n) = ti.adjoint() * a1;
    gram_.block(6 * ci0, 6 * ci0, 6 * ci_n, 6 * ci_n) = ti.adjoint() * ti;
    for (Eigen::Index j = i + 1; j < n_tiles; ++j) {
      const auto [cj0, cj_n] = tile_range(j);
      builder.build(cfg.grid, cj0, cj_n, tj);
      tj_index = j;
      const Eigen::MatrixXcd sij = ti.adjoint() * tj;
      gram_.block(6 * ci0, 6 * cj0, 6 * ci_n, 6 * cj_n) = sij;
      gram_.block(6 * cj0, 6 * ci0, 6 * cj_n, 6 * ci_n) = sij.adjoint();
    }
  }
}

ProfileEstimate BasisSweepEngine::estimate_in_basis(double theta_rad,
                                                    double phi_rad) const {
  const Eigen::Index m = cfg_.grid.size();
  const Eigen::Matrix2cd u = jones_matrix(theta_rad, phi_rad);
  const Eigen::Matrix2cd launch = u * launch_coherency_ * u.adjoint();
  const double p0[2] = {launch(0, 0).real(), launch(1, 1).real()};
  if (!(p0[0] > 0.0) || !(p0[1] > 0.0))
    throw std::runtime_error("estimate_in_basis: degenerate launch powers");

  // Weight vectors for (row pol r, driving pol p), scales folded in.
  Eigen::Matrix<Complex, 6, 1> w[2][2];
  for (int r = 0; r < 2; ++r)
    for (int p = 0; p < 2; ++p)
      w[r][p] = kernel_weights(u.row(p), u.row(r)) *
                (kMinusJ * delta_z_km_ / (p0[p] * std::sqrt(p0[r])));

  // Normalized rotated perturbation projections: <mono, A1_r_hat>.
  Eigen::MatrixXcd proj_rot(6 * m, 2);
  for (int r = 0; r < 2; ++r)
    proj_rot.col(r) = (projection_.col(0) * u(r, 0) +
                       projection_.col(1) * u(r, 1)) /
                      std::sqrt(p0[r]);

  Eigen::MatrixXcd normal_c = Eigen::MatrixXcd::Zero(2 * m, 2 * m);
  Eigen::VectorXcd proj_c = Eigen::VectorXcd::Zero(2 * m);
  for (int r = 0; r < 2; ++r) {
    for (int q = 0; q < 2; ++q) {
      // y = gram * (I (x) w[r][q]), cell-blocked.
      Eigen::MatrixXcd y(6 * m, m);
      for (Eigen::Index n = 0; n < m; ++n)
        y.col(n) = gram_.middleCols(6 * n, 6) * w[r][q];
      for (int p = 0; p < 2; ++p) {
        Eigen::MatrixXcd z(m, m);
        for (Eigen::Index mm = 0; mm < m; ++mm)
          z.row(mm) = w[r][p].adjoint() * y.middleRows(6 * mm, 6);
        normal_c.block(p * m, q * m, m, m) += z;
      }
    }
    for (int p = 0; p < 2; ++p) {
      Eigen::VectorXcd bp(m);
      for (Eigen::Index mm = 0; mm < m; ++mm)
        bp(mm) = (w[r][p].adjoint() * proj_rot.col(r).segment(6 * mm, 6))(0);
      proj_c.segment(p * m, m) += bp;
    }
  }

  SolveInput in;
  in.normal = normal_c.real();
  in.projection = proj_c.real();
  in.im_projection_norm = proj_c.imag().norm();
  in.a1_norm2 = 0.0;
  for (int r = 0; r < 2; ++r) {
    const Eigen::Vector2cd ur = u.row(r).transpose();
    in.a1_norm2 += (ur.adjoint() * a1_coherency_ * ur)(0).real() / p0[r];
  }
  in.rows_used = rows_used_;
  return solve_normal_equations(in, cfg_, EstimatorMode::dual_pol, theta_rad,
                                phi_rad);
}

} // namespace olt
