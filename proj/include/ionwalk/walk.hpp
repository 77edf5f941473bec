#pragma once

// Walk protocols at the two ideal tiers: the discrete line (orthogonal
// positions) and the coherent-state walk with exact displacements.
//
// Step direction convention: |T> steps to +1 (displacement +delta), |H>
// steps to -1 (displacement -delta). Every asymmetry sign reported by this
// library follows from it.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "ionwalk/coin.hpp"
#include "ionwalk/hilbert.hpp"
#include "ionwalk/readout.hpp"

namespace ionwalk {

// Default step magnitude: <n> after the first step equals 1.33 phonons.
inline constexpr double kDefaultTargetNbar = 1.33;
double default_step_delta();

struct LineWalkState {
  // position -> amplitudes {H, T}
  std::map<int, std::array<cplx, 2>> entries;

  static LineWalkState localized(Coin c, int position = 0);
  double norm_squared() const;
  double coin_probability(Coin c) const;
  PositionDistribution positions() const;
};

struct CoinProbabilities {
  double p_h = 0.0;
  double p_t = 0.0;
};

struct WalkReport {
  CoinProbabilities coin;
  PositionDistribution positions;
  double n_bar = 0.0;
  double norm = 1.0;
  std::size_t steps = 0;
};

LineWalkState line_walk(std::size_t n_steps, const CoinOperator& coin, const LineWalkState& initial);
WalkReport report(const LineWalkState& s, std::size_t steps);

PositionDistribution classical_walk(std::size_t n_steps);

struct SpreadStatistics {
  double mean = 0.0;
  double variance = 0.0;
  double stddev = 0.0;
};
SpreadStatistics spread_statistics(const PositionDistribution& dist);

// |T><T| (x) D(+delta) + |H><H| (x) D(-delta)
JointOperator conditional_step_operator(cplx delta, std::size_t n_max);

struct WalkOptions {
  std::size_t initial_fock = 0;  // walk starts in |T> (x) |initial_fock>
  bool estimate_positions = true;
  ReadoutKnobs readout{};
};

struct WalkResult {
  JointState state;
  WalkReport report;
};

WalkResult run_phase_walk(std::size_t n_steps, cplx delta, std::size_t n_max,
                          const WalkOptions& options = {});

// Instantaneous coin-conditioned kicks of magnitude |kick|. directions[k]
// (radians) rotates step k in phase space; missing entries are collinear.
WalkResult impulsive_walk(std::size_t n_steps, cplx kick, std::size_t n_max,
                          const std::vector<double>& directions = {},
                          const WalkOptions& options = {});

// Fock cutoff that holds n_steps kicks of size |kick| with the tail bound.
std::size_t impulsive_n_max(std::size_t n_steps, double abs_kick);

// Report for a Fock-space walk state; positions via the readout estimator.
WalkReport report(const JointState& s, std::size_t steps, cplx delta, const WalkOptions& options);

}  // namespace ionwalk
