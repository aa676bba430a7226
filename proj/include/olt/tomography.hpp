#ifndef OLT_TOMOGRAPHY_HPP
#define OLT_TOMOGRAPHY_HPP

#include <optional>

#include "olt/rxdsp.hpp"
#include "olt/types.hpp"

// The inverse-problem core. The received nonlinear perturbation is modeled as
// a linear combination of per-position kernels: the reference, dispersed to
// z_m, drives cubic self/cross products that are carried back to the receiver
// frame. Working frame is the CD-compensated receive frame, so the kernel for
// cell m is
//   -j dz * D^{-1}_{z_m}[ |A(z_m)|^2 A(z_m) ],   A(z_m) = D_{z_m}[ref],
// and the profile solves the penalized least squares normal equations
//   (Re[G'G] + lambda R) g = Re[G'A1].
// Reference tributaries are normalized to unit mean power using the launch
// calibration, which makes the recovered coefficients (8/9) gamma P_i(z) in
// 1/km with P_i the local per-polarization power in watts.

namespace olt {

enum class EstimatorMode { single_pol, dual_pol };
enum class RegMatrix { identity, second_difference };

struct EstimatorConfig {
  PositionGrid grid;
  double lambda_reg = 0.0;
  RegMatrix reg_matrix = RegMatrix::identity;
  double cd_coefficient_ps_nm_km = 17.0; // uniform-fiber assumption
  std::optional<double> beta2_override_ps2_km; // bypasses the D conversion
  double gamma_nominal_per_w_km = 1.3;
  EstimatorMode mode = EstimatorMode::dual_pol;
  // Rows excluded at each capture edge; < 0 selects one dispersion-spread
  // length computed from beta2 and the grid span.
  Eigen::Index edge_exclusion_samples = -1;
  // The alignment stage absorbs the component of the perturbation parallel
  // to the reference tributaries (the mean nonlinear phase goes with it), so
  // the same subspace is projected out of the kernels; otherwise the solve
  // compensates for a component the data can no longer contain and the whole
  // profile collapses. Disable only for kernel-level analysis of the raw
  // model columns.
  bool remove_linear_component = true;
  std::size_t memory_budget_mb = 1024;

  double beta2_ps2_km(double center_frequency_hz) const;
  void validate() const;
};

struct ProfileEstimate {
  PositionGrid grid;
  Eigen::VectorXd gamma_prime_x; // 1/km
  Eigen::VectorXd gamma_prime_y; // empty in single_pol mode
  Eigen::VectorXd power_x_w;
  Eigen::VectorXd power_y_w;
  double basis_theta_rad = 0.0;
  double basis_phi_rad = 0.0;
  struct Diagnostics {
    double residual_norm = 0.0;
    double a1_norm = 0.0;
    double im_projection_norm = 0.0; // ||Im[G'A1]||, recorded not interpreted
    double condition = 0.0;
    double min_eigenvalue = 0.0;
    Eigen::Index rows_used = 0;
  } diagnostics;

  bool dual() const { return gamma_prime_y.size() > 0; }
  /// Pol-mean profile for dual estimates, gamma_prime_x for single ones.
  Eigen::VectorXd scalar_profile() const;
};

/// One grid cell's kernel block, expressed in the CD-compensated receive
/// frame, -j dz factor included. Naming is k_<row pol><driving pol>; single
/// polarization mode fills xx only.
struct CellKernels {
  CArray xx;
  CArray yx;
  CArray xy;
  CArray yy;
};
CellKernels nli_kernel(const AlignedPair& pair, double z_m_km,
                       const EstimatorConfig& cfg);

struct AssembledModel {
  Eigen::MatrixXd normal;      // Re[G'G], unregularized
  Eigen::VectorXd projection;  // Re[G'A1]
  double im_projection_norm = 0.0;
  double a1_norm2 = 0.0;
  Eigen::Index rows_used = 0;
  PositionGrid grid;
  EstimatorMode mode = EstimatorMode::dual_pol;
};

/// Builds the normal equations. Kernel columns are generated tile-by-tile and
/// reduced into Re[G'G]; the full model matrix is only ever held when it fits
/// the configured memory budget.
AssembledModel assemble_model(const AlignedPair& pair,
                              const EstimatorConfig& cfg);

/// Solves the penalized normal equations. Negative coefficients are retained.
/// Throws when the regularized normal matrix is numerically singular (the
/// message names the smallest eigenvalue).
ProfileEstimate solve_profile(const AssembledModel& model,
                              const EstimatorConfig& cfg);

ProfileEstimate estimate(const AlignedPair& pair, const EstimatorConfig& cfg);

/// Regularization matrix over one polarization block.
Eigen::MatrixXd regularization_matrix(RegMatrix kind, Eigen::Index n);

/// Shared-kernel engine for analysis-basis sweeps: cubic monomial kernels and
/// their Gram tensor are computed once per pair; an estimate in any rotated
/// basis is then a cheap contraction. Produces the same profile as
/// estimate(rotate_pair(pair, theta, phi), cfg) up to rounding.
class BasisSweepEngine {
public:
  BasisSweepEngine(const AlignedPair& pair, const EstimatorConfig& cfg);
  ProfileEstimate estimate_in_basis(double theta_rad, double phi_rad) const;
  const PositionGrid& grid() const { return cfg_.grid; }

private:
  EstimatorConfig cfg_;
  double delta_z_km_;
  Eigen::Index rows_used_ = 0;
  Eigen::MatrixXcd gram_;        // (6M x 6M) monomial Gram tensor
  Eigen::MatrixXcd projection_;  // (6M x 2): <mono, A1_x>, <mono, A1_y>
  Eigen::Matrix2cd a1_coherency_;
  Eigen::Matrix2cd launch_coherency_;
};

} // namespace olt

#endif // OLT_TOMOGRAPHY_HPP
