#include "ionwalk/walk.hpp"

#include <cmath>
#include <complex>

#include "ionwalk/error.hpp"

namespace ionwalk {

double default_step_delta() { return std::sqrt(kDefaultTargetNbar); }

LineWalkState LineWalkState::localized(Coin c, int position) {
  LineWalkState s;
  s.entries[position][static_cast<std::size_t>(c)] = 1.0;
  return s;
}

double LineWalkState::norm_squared() const {
  double sum = 0.0;
  for (const auto& [i, a] : entries) sum += std::norm(a[0]) + std::norm(a[1]);
  return sum;
}

double LineWalkState::coin_probability(Coin c) const {
  double sum = 0.0;
  for (const auto& [i, a] : entries) sum += std::norm(a[static_cast<std::size_t>(c)]);
  return sum;
}

PositionDistribution LineWalkState::positions() const {
  PositionDistribution d;
  for (const auto& [i, a] : entries) d[i] = std::norm(a[0]) + std::norm(a[1]);
  return d;
}

LineWalkState line_walk(std::size_t n_steps, const CoinOperator& coin, const LineWalkState& initial) {
  LineWalkState s = initial;
  const auto& c = coin.entries;
  for (std::size_t k = 0; k < n_steps; ++k) {
    LineWalkState next;
    for (const auto& [i, a] : s.entries) {
      const cplx h = c(0, 0) * a[0] + c(0, 1) * a[1];
      const cplx t = c(1, 0) * a[0] + c(1, 1) * a[1];
      next.entries[i - 1][0] += h;
      next.entries[i + 1][1] += t;
    }
    // Drop sites that interfered away completely.
    std::erase_if(next.entries, [](const auto& e) {
      return std::norm(e.second[0]) + std::norm(e.second[1]) == 0.0;
    });
    s = std::move(next);
  }
  return s;
}

WalkReport report(const LineWalkState& s, std::size_t steps) {
  WalkReport r;
  r.coin = {s.coin_probability(Coin::H), s.coin_probability(Coin::T)};
  r.positions = s.positions();
  r.norm = s.norm_squared();
  r.steps = steps;
  return r;
}

PositionDistribution classical_walk(std::size_t n_steps) {
  PositionDistribution d{{0, 1.0}};
  for (std::size_t k = 0; k < n_steps; ++k) {
    PositionDistribution next;
    for (const auto& [i, p] : d) {
      next[i - 1] += 0.5 * p;
      next[i + 1] += 0.5 * p;
    }
    d = std::move(next);
  }
  return d;
}

SpreadStatistics spread_statistics(const PositionDistribution& dist) {
  if (dist.empty()) throw Error(ErrorKind::InvalidArgument, "spread_statistics: empty distribution");
  double total = 0.0;
  double mean = 0.0;
  for (const auto& [i, p] : dist) {
    total += p;
    mean += p * i;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::InvalidArgument, "spread_statistics: zero total weight");
  mean /= total;
  double var = 0.0;
  for (const auto& [i, p] : dist) var += p * (i - mean) * (i - mean);
  var /= total;
  return {mean, var, std::sqrt(var)};
}

JointOperator conditional_step_operator(cplx delta, std::size_t n_max) {
  const auto dim = static_cast<Eigen::Index>(n_max + 1);
  JointOperator op;
  op.entries = CMatrix::Zero(2 * dim, 2 * dim);
  op.entries.topLeftCorner(dim, dim) = displacement_operator(-delta, n_max).entries;
  op.entries.bottomRightCorner(dim, dim) = displacement_operator(delta, n_max).entries;
  return op;
}

WalkReport report(const JointState& s, std::size_t steps, cplx delta, const WalkOptions& options) {
  WalkReport r;
  r.coin = {s.coin_probability(Coin::H), s.coin_probability(Coin::T)};
  r.n_bar = number_expectation(s);
  r.norm = s.norm_squared();
  r.steps = steps;
  if (options.estimate_positions) {
    const int reach = static_cast<int>(steps);
    r.positions = position_distribution_total(s, delta, -reach, reach, options.readout);
  }
  return r;
}

namespace {

JointState initial_state(std::size_t n_max, std::size_t fock) {
  return JointState::product(Coin::T, MotionalVector::fock(fock, n_max));
}

}  // namespace

WalkResult run_phase_walk(std::size_t n_steps, cplx delta, std::size_t n_max,
                          const WalkOptions& options) {
  JointState s = initial_state(n_max, options.initial_fock);
  const CoinOperator toss = coin_toss();
  const JointOperator step = conditional_step_operator(delta, n_max);
  for (std::size_t k = 0; k < n_steps; ++k) {
    s = step.apply(apply_coin(s, toss));
    require_truncation(s, "run_phase_walk");
  }
  WalkResult out{s, report(s, n_steps, delta, options)};
  return out;
}

std::size_t impulsive_n_max(std::size_t n_steps, double abs_kick) {
  return recommended_n_max(static_cast<double>(n_steps) * abs_kick);
}

WalkResult impulsive_walk(std::size_t n_steps, cplx kick, std::size_t n_max,
                          const std::vector<double>& directions, const WalkOptions& options) {
  JointState s = initial_state(n_max, options.initial_fock);
  const CoinOperator toss = coin_toss();
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double angle = k < directions.size() ? directions[k] : 0.0;
    const cplx d = kick * std::polar(1.0, angle);
    s = apply_coin(s, toss);
    s.amp.col(0) = apply_displacement(CVector(s.amp.col(0)), -d);
    s.amp.col(1) = apply_displacement(CVector(s.amp.col(1)), d);
    require_truncation(s, "impulsive_walk");
  }
  WalkResult out{s, report(s, n_steps, kick, options)};
  return out;
}

}  // namespace ionwalk
