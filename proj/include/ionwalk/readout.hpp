#pragma once

// Emulation of the measurement chain: ideal branch selection, displacing a
// position back onto the origin, blue-sideband flopping, population
// extraction and state-dependent fluorescence detection.

#include <cstdint>
#include <map>
#include <numbers>
#include <span>
#include <vector>

#include "ionwalk/hilbert.hpp"

namespace ionwalk {

using PositionDistribution = std::map<int, double>;

struct FlopTrace {
  std::vector<double> times;            // seconds
  std::vector<double> p_t;              // ideal P_T(t)
  std::vector<std::uint64_t> counts;    // bright shots per point, empty when noiseless
  std::uint64_t shots_per_point = 0;
};

struct PopulationEstimate {
  std::vector<double> p_n;
  std::vector<double> sigma_n;
  double residual = 0.0;
  double condition_number = 0.0;
};

struct SidebandModel {
  double eta = 0.31;
  double omega = 2.0 * std::numbers::pi * 500e3;  // carrier Rabi frequency, rad/s
  double decay_rate = 0.0;                          // 1/s, envelope e^{-g (n+1)^0.7 t}
};

struct BranchSelection {
  MotionalVector motion;  // unnormalized
  double probability = 0.0;
};

// Keeps the motional component attached to one coin state. Selecting H
// applies the R(pi, 0) exchange first, so the returned amplitudes carry its
// -i phase.
BranchSelection branch_select(const JointState& state, Coin coin);

// D(-i * delta)|v>.
MotionalVector displace_back(const MotionalVector& v, int i, cplx delta);

std::vector<double> uniform_times(std::size_t points, double step);

FlopTrace simulate_bsb_flopping(std::span<const double> p_n, std::span<const double> times,
                                const SidebandModel& model);
FlopTrace simulate_bsb_flopping(const MotionalVector& v, std::span<const double> times,
                                const SidebandModel& model);

// Binomial shot-noise realization of an ideal trace.
FlopTrace add_shot_noise(FlopTrace trace, std::uint64_t shots_per_point, std::uint64_t seed);

enum class ExtractionMethod { Nnls, Fourier };

struct ExtractionOptions {
  ExtractionMethod method = ExtractionMethod::Nnls;
  int bootstrap_resamples = 100;
  std::uint64_t seed = 1;
  double max_condition = 1e8;
};

PopulationEstimate extract_populations(const FlopTrace& trace, std::size_t n_fit_max,
                                       const SidebandModel& model,
                                       const ExtractionOptions& options = {});

enum class PositionEstimator { MixtureFit, Projector };
enum class PopulationSource { Exact, Flopping };

struct ReadoutKnobs {
  PositionEstimator estimator = PositionEstimator::MixtureFit;
  PopulationSource source = PopulationSource::Exact;
  std::size_t fock_rows = 40;       // Fock levels used by the exact source
  SidebandModel sideband{};
  std::size_t flop_points = 100;
  double flop_step = 1e-6;          // seconds
  std::size_t n_fit_max = 10;
  std::uint64_t shots = 0;          // 0 = noiseless flopping
  std::uint64_t seed = 1;
};

PositionDistribution position_distribution(const JointState& state, Coin coin, cplx delta,
                                           int grid_min, int grid_max,
                                           const ReadoutKnobs& knobs = {});

// Sum of the H- and T-branch distributions.
PositionDistribution position_distribution_total(const JointState& state, cplx delta,
                                                 int grid_min, int grid_max,
                                                 const ReadoutKnobs& knobs = {});

struct DetectionParams {
  double window = 100e-6;          // seconds
  double bright_rate = 200e3;      // 1/s
  double dark_rate = 1e3;          // 1/s, background seen in both states
};

struct FluorescenceResult {
  std::vector<std::uint64_t> histogram;  // counts -> number of shots
  std::uint64_t threshold = 0;           // bright iff counts > threshold
  double mean_counts = 0.0;
  double p_t_hat = 0.0;
  double std_error = 0.0;
};

FluorescenceResult simulate_fluorescence(double p_t, std::uint64_t shots,
                                         const DetectionParams& detection, std::uint64_t seed,
                                         unsigned threads = 1);

}  // namespace ionwalk
