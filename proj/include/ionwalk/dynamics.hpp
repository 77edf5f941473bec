#pragma once

// Spin-dependent optical dipole force acting on one motional mode, kept to
// all orders in the Lamb-Dicke parameter and without a rotating-wave
// approximation on the motional sidebands.
//
// Frame: interaction picture with respect to omega_z a^dag a. For coin s the
// Hamiltonian (in units of hbar) is
//   H_s(t) = A_s cos(eta X(t) + phase - (omega_z + delta) t),
//   X(t)   = a e^{-i omega_z t} + a^dag e^{i omega_z t},
// i.e. (A_s/2)[e^{i(phase - (omega_z + delta) t)} e^{i eta X(t)} + h.c.],
// with A_T = force_ratio * A_H. The slow part of the a^dag coupling rotates
// at the detuning delta, so a drive of duration 2 pi / delta closes a loop
// in phase space.

#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ionwalk/coin.hpp"
#include "ionwalk/hilbert.hpp"
#include "ionwalk/sideband.hpp"
#include "ionwalk/walk.hpp"

namespace ionwalk {

struct DriveParams {
  double omega_z = 0.0;         // rad/s, trap frequency
  double delta = 0.0;           // rad/s, drive detuning from omega_z
  double eta = 0.0;             // Lamb-Dicke parameter
  double drive_amp_h = 0.0;     // rad/s, U_H / hbar
  double force_ratio = -1.5;    // F_T / F_H
  double phase = -std::numbers::pi / 2;  // drive phase; this value sends |T> to +Re
  double t_d = 0.0;             // s, rephasing period
  double dt = 0.0;              // s, integrator step upper bound
  std::size_t n_max = 128;
  double duration_scale = 1.0;

  // 25Mg+ parameters: omega_z = 2pi 2.1 MHz, delta = 2pi 100 kHz, eta = 0.31,
  // t_d = 2pi/delta, dt = 1/(100 f_z). The drive amplitude is left at zero;
  // obtain it from calibrate_step.
  static DriveParams trapped_ion_defaults();

  double drive_amp(Coin c) const { return c == Coin::H ? drive_amp_h : force_ratio * drive_amp_h; }
  void validate() const;
};

// Precomputed eigendecomposition of the truncated quadrature a + a^dag. The
// propagator for a short interval h at midpoint time t is
//   R(t)^dag V diag(exp(-i A cos(eta lambda + theta(t)) h)) V^T R(t),
// with R(t) = exp(-i omega_z t a^dag a); a fourth-order symmetric
// composition of these midpoint steps advances the state.
class DriveEngine {
 public:
  explicit DriveEngine(std::size_t n_max);

  std::size_t n_max() const { return static_cast<std::size_t>(values_.size()) - 1; }

  JointOperator hamiltonian(double t, const DriveParams& p) const;
  JointState evolve(const JointState& state, double t0, double t1, const DriveParams& p) const;

  // exp(i eta (a + a^dag)) on the truncated space.
  CMatrix displacement_exponential(double eta) const;

 private:
  Eigen::MatrixXd vectors_;
  Eigen::VectorXd values_;
};

JointOperator drive_hamiltonian(double t, const DriveParams& p);
JointState evolve(const JointState& state, double t0, double t1, const DriveParams& p);

// drive(t_d/2 * scale) -> R(pi,0) -> drive(t_d/2 * scale) -> R(pi,0). The
// drive clock starts at zero for every step.
JointState experimental_step(const JointState& state, const DriveParams& p);
JointState experimental_step(const JointState& state, const DriveParams& p, const DriveEngine& engine);

// <n> after one coin toss and one experimental step from |T>|0>.
double first_step_nbar(const DriveParams& p, const DriveEngine& engine);

// Bracketing root search (Illinois false position) on drive_amp_h so that
// first_step_nbar equals target_nbar.
DriveParams calibrate_step(const DriveParams& p, double target_nbar = kDefaultTargetNbar,
                           double tolerance = 1e-12);

struct StepSnapshot {
  double p_h = 0.0;
  double n_bar = 0.0;
};

struct DynamicsWalkResult {
  JointState state;
  WalkReport report;
  std::vector<StepSnapshot> steps;
};

struct DynamicsOptions {
  WalkOptions walk{};
  double target_nbar = kDefaultTargetNbar;  // sets the readout grid spacing
};

DynamicsWalkResult run_dynamics_walk(std::size_t n_steps, const DriveParams& p,
                                     const DynamicsOptions& options = {});

struct SweepPoint {
  double scale = 1.0;
  double p_h = 0.0;
  double p_t = 0.0;
};

// Three-step walk per duration scale; results are ordered as the input.
std::vector<SweepPoint> duration_sweep(const std::vector<double>& scales, const DriveParams& p,
                                       unsigned threads = 1);

struct StepLimitRecord {
  std::size_t step = 0;
  double n_bar = 0.0;
  double fidelity = 0.0;  // experimental vs ideal step applied to the same state
  double p_h = 0.0;
  QuadratureVariances dominant_branch{};
};

struct StepLimitStudy {
  std::vector<StepLimitRecord> records;
  bool truncated = false;
  std::string diagnostic;
};

StepLimitStudy step_limit_study(const DriveParams& p, std::size_t max_steps,
                                double target_nbar = kDefaultTargetNbar);

}  // namespace ionwalk
