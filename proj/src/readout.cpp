#include "ionwalk/readout.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include "ionwalk/coin.hpp"
#include "ionwalk/error.hpp"
#include "ionwalk/nnls.hpp"
#include "ionwalk/rng.hpp"
#include "ionwalk/sideband.hpp"

namespace ionwalk {

BranchSelection branch_select(const JointState& state, Coin coin) {
  const JointState moved = coin == Coin::H ? apply_coin(state, pi_pulse()) : state;
  BranchSelection sel;
  sel.motion = moved.branch(Coin::T);
  sel.probability = sel.motion.norm_squared();
  return sel;
}

MotionalVector displace_back(const MotionalVector& v, int i, cplx delta) {
  if (i == 0) return v;
  const double norm = v.norm_squared();
  if (norm > 0.0) {
    // The shifted packet has to sit inside the retained levels, otherwise the
    // truncated operator folds it back and the tail test alone can miss it.
    const double reach = std::abs(static_cast<double>(i) * delta) + std::sqrt(number_expectation(v) / norm);
    if (reach * reach > 0.9 * static_cast<double>(v.n_max())) {
      std::ostringstream os;
      os << "displace_back: shift by " << i << " steps reaches <n> ~ " << reach * reach << " beyond 90% of n_max = "
         << v.n_max() << "; increase n_max";
      throw TruncationError(os.str());
    }
  }
  MotionalVector out = apply_displacement(v, -static_cast<double>(i) * delta);
  require_truncation(out, "displace_back");
  return out;
}

std::vector<double> uniform_times(std::size_t points, double step) {
  std::vector<double> t(points);
  for (std::size_t k = 0; k < points; ++k) t[k] = static_cast<double>(k) * step;
  return t;
}

namespace {

double flop_basis(std::size_t n, double t, const SidebandModel& model) {
  const double rabi = sideband_rabi_exact(n, model.eta, model.omega);
  const double envelope =
      std::exp(-model.decay_rate * std::pow(static_cast<double>(n) + 1.0, 0.7) * t);
  return 0.5 * (1.0 + std::cos(rabi * t) * envelope);
}

std::vector<double> fock_populations(const MotionalVector& v, std::size_t rows) {
  const std::size_t count = std::min<std::size_t>(rows + 1, v.n_max() + 1);
  std::vector<double> p(count);
  for (std::size_t n = 0; n < count; ++n) p[n] = std::norm(v.amp[static_cast<Eigen::Index>(n)]);
  return p;
}

double poisson_pmf(std::size_t n, double mean) {
  if (mean == 0.0) return n == 0 ? 1.0 : 0.0;
  const double dn = static_cast<double>(n);
  return std::exp(-mean + dn * std::log(mean) - std::lgamma(dn + 1.0));
}

}  // namespace

FlopTrace simulate_bsb_flopping(std::span<const double> p_n, std::span<const double> times,
                                const SidebandModel& model) {
  FlopTrace trace;
  trace.times.assign(times.begin(), times.end());
  trace.p_t.resize(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < 0.0) throw Error(ErrorKind::InvalidArgument, "simulate_bsb_flopping: negative time");
    double p = 0.0;
    for (std::size_t n = 0; n < p_n.size(); ++n) p += p_n[n] * flop_basis(n, times[k], model);
    trace.p_t[k] = std::clamp(p, 0.0, 1.0);
  }
  return trace;
}

FlopTrace simulate_bsb_flopping(const MotionalVector& v, std::span<const double> times,
                                const SidebandModel& model) {
  const std::vector<double> p = fock_populations(v, v.n_max());
  return simulate_bsb_flopping(std::span<const double>(p), times, model);
}

FlopTrace add_shot_noise(FlopTrace trace, std::uint64_t shots_per_point, std::uint64_t seed) {
  trace.shots_per_point = shots_per_point;
  trace.counts.clear();
  if (shots_per_point == 0) return trace;
  trace.counts.resize(trace.p_t.size());
  for (std::size_t k = 0; k < trace.p_t.size(); ++k) {
    CounterRng rng(seed, k);
    std::binomial_distribution<std::uint64_t> draw(shots_per_point, trace.p_t[k]);
    trace.counts[k] = draw(rng);
  }
  return trace;
}

namespace {

Eigen::VectorXd fit_nnls(const Eigen::MatrixXd& basis, const Eigen::VectorXd& data) {
  return nnls(basis, data).x;
}

Eigen::VectorXd fit_fourier(const FlopTrace& trace, const Eigen::VectorXd& data,
                            std::size_t n_fit_max, const SidebandModel& model) {
  const std::size_t m = trace.times.size();
  Eigen::VectorXd p(static_cast<Eigen::Index>(n_fit_max + 1));
  for (std::size_t n = 0; n <= n_fit_max; ++n) {
    const double rabi = sideband_rabi_exact(n, model.eta, model.omega);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double w = m > 1 ? 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                                                     static_cast<double>(m - 1)))
                             : 1.0;
      const double c = std::cos(rabi * trace.times[k]);
      num += w * (2.0 * data[static_cast<Eigen::Index>(k)] - 1.0) * c;
      den += w * c * c;
    }
    p[static_cast<Eigen::Index>(n)] = den > 0.0 ? std::max(0.0, num / den) : 0.0;
  }
  return p;
}

}  // namespace

PopulationEstimate extract_populations(const FlopTrace& trace, std::size_t n_fit_max,
                                       const SidebandModel& model,
                                       const ExtractionOptions& options) {
  const std::size_t m = trace.times.size();
  if (m == 0) throw Error(ErrorKind::InvalidArgument, "extract_populations: empty trace");
  const bool noisy = trace.shots_per_point > 0;
  if (noisy && trace.counts.size() != m) {
    throw DimensionError("extract_populations: counts/times size mismatch");
  }

  const double duration = *std::max_element(trace.times.begin(), trace.times.end());
  const double split = std::abs(sideband_rabi_exact(0, model.eta, model.omega) -
                                sideband_rabi_exact(1, model.eta, model.omega));
  if (duration * split < 2.0 * std::numbers::pi) {
    std::ostringstream os;
    os << "extract_populations: trace duration " << duration << " s cannot resolve Omega_01 from Omega_12";
    throw NumericalError(ErrorKind::IllConditioned, os.str());
  }

  const auto cols = static_cast<Eigen::Index>(n_fit_max + 1);
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(m), cols);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t n = 0; n <= n_fit_max; ++n) {
      basis(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n)) = flop_basis(n, trace.times[k], model);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(basis);
  const auto& sv = svd.singularValues();
  const double cond = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1]
                                              : std::numeric_limits<double>::infinity();
  if (!(cond <= options.max_condition)) {
    std::ostringstream os;
    os << "extract_populations: basis condition number " << cond << " exceeds "
       << options.max_condition << "; lengthen or densify the trace";
    throw NumericalError(ErrorKind::IllConditioned, os.str());
  }

  auto data_of = [&](const std::vector<std::uint64_t>& counts) {
    Eigen::VectorXd d(static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < m; ++k) {
      d[static_cast<Eigen::Index>(k)] =
          noisy ? static_cast<double>(counts[k]) / static_cast<double>(trace.shots_per_point)
                : trace.p_t[k];
    }
    return d;
  };
  auto fit = [&](const Eigen::VectorXd& d) {
    return options.method == ExtractionMethod::Nnls ? fit_nnls(basis, d)
                                                    : fit_fourier(trace, d, n_fit_max, model);
  };

  const Eigen::VectorXd data = data_of(trace.counts);
  const Eigen::VectorXd p = fit(data);

  PopulationEstimate est;
  est.p_n.assign(p.data(), p.data() + p.size());
  est.sigma_n.assign(p.size(), 0.0);
  est.residual = (basis * p - data).norm();
  est.condition_number = cond;

  if (noisy && options.bootstrap_resamples > 1) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(cols);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(cols);
    std::vector<std::uint64_t> resampled(m);
    for (int r = 0; r < options.bootstrap_resamples; ++r) {
      for (std::size_t k = 0; k < m; ++k) {
        CounterRng rng(options.seed, (static_cast<std::uint64_t>(r) << 32) | k);
        const double freq = static_cast<double>(trace.counts[k]) / static_cast<double>(trace.shots_per_point);
        std::binomial_distribution<std::uint64_t> draw(trace.shots_per_point, freq);
        resampled[k] = draw(rng);
      }
      const Eigen::VectorXd pr = fit(data_of(resampled));
      sum += pr;
      sum_sq += pr.cwiseProduct(pr);
    }
    const double nb = static_cast<double>(options.bootstrap_resamples);
    for (Eigen::Index n = 0; n < cols; ++n) {
      const double mean = sum[n] / nb;
      const double var = std::max(0.0, (sum_sq[n] - nb * mean * mean) / (nb - 1.0));
      est.sigma_n[static_cast<std::size_t>(n)] = std::sqrt(var);
    }
  }
  return est;
}

namespace {

std::vector<double> measured_populations(const MotionalVector& v, const ReadoutKnobs& knobs,
                                         std::uint64_t stream) {
  if (knobs.source == PopulationSource::Exact) return fock_populations(v, knobs.fock_rows);
  const std::vector<double> times = uniform_times(knobs.flop_points, knobs.flop_step);
  FlopTrace trace = simulate_bsb_flopping(v, times, knobs.sideband);
  trace = add_shot_noise(std::move(trace), knobs.shots, CounterRng::mix(knobs.seed ^ stream));
  ExtractionOptions opts;
  opts.seed = knobs.seed + stream;
  opts.bootstrap_resamples = 0;
  return extract_populations(trace, knobs.n_fit_max, knobs.sideband, opts).p_n;
}

}  // namespace

PositionDistribution position_distribution(const JointState& state, Coin coin, cplx delta,
                                           int grid_min, int grid_max,
                                           const ReadoutKnobs& knobs) {
  if (grid_max < grid_min) throw Error(ErrorKind::InvalidArgument, "position_distribution: empty grid");
  const BranchSelection sel = branch_select(state, coin);
  const int points = grid_max - grid_min + 1;

  std::vector<std::vector<double>> pops(static_cast<std::size_t>(points));
  for (int i = grid_min; i <= grid_max; ++i) {
    const MotionalVector back = displace_back(sel.motion, i, delta);
    pops[static_cast<std::size_t>(i - grid_min)] =
        measured_populations(back, knobs, static_cast<std::uint64_t>(i - grid_min) +
                                              (coin == Coin::H ? 0x10000u : 0u));
  }

  PositionDistribution dist;
  if (knobs.estimator == PositionEstimator::Projector) {
    for (int i = grid_min; i <= grid_max; ++i) dist[i] = pops[static_cast<std::size_t>(i - grid_min)][0];
    return dist;
  }

  // Incoherent mixture of coherent states at the grid points: after
  // displacing back by i, component j shows a Poisson profile of mean
  // |(j - i) delta|^2. One joint fit over every displaced-back record.
  const std::size_t rows = pops.front().size();
  Eigen::MatrixXd a(static_cast<Eigen::Index>(rows) * points, points);
  Eigen::VectorXd b(static_cast<Eigen::Index>(rows) * points);
  const double step2 = std::norm(delta);
  for (int i = 0; i < points; ++i) {
    for (std::size_t n = 0; n < rows; ++n) {
      const Eigen::Index row = static_cast<Eigen::Index>(i) * static_cast<Eigen::Index>(rows) +
                               static_cast<Eigen::Index>(n);
      b[row] = pops[static_cast<std::size_t>(i)][n];
      for (int j = 0; j < points; ++j) {
        const double d = static_cast<double>(j - i);
        a(row, j) = poisson_pmf(n, d * d * step2);
      }
    }
  }
  const NnlsResult fit = nnls(a, b);
  for (int j = 0; j < points; ++j) dist[grid_min + j] = fit.x[j];
  return dist;
}

PositionDistribution position_distribution_total(const JointState& state, cplx delta,
                                                 int grid_min, int grid_max,
                                                 const ReadoutKnobs& knobs) {
  PositionDistribution total = position_distribution(state, Coin::H, delta, grid_min, grid_max, knobs);
  for (const auto& [i, p] : position_distribution(state, Coin::T, delta, grid_min, grid_max, knobs)) {
    total[i] += p;
  }
  return total;
}

namespace {
constexpr std::uint64_t kShotBlock = 4096;
}

FluorescenceResult simulate_fluorescence(double p_t, std::uint64_t shots,
                                         const DetectionParams& detection, std::uint64_t seed,
                                         unsigned threads) {
  if (detection.bright_rate < 0.0 || detection.dark_rate < 0.0 || detection.window < 0.0) {
    throw PhysicsError("simulate_fluorescence: rates and window must be non-negative");
  }
  if (p_t < 0.0 || p_t > 1.0) throw Error(ErrorKind::InvalidArgument, "simulate_fluorescence: p_T outside [0,1]");

  const double mean_dark = detection.dark_rate * detection.window;
  const double mean_bright = (detection.bright_rate + detection.dark_rate) * detection.window;
  const std::uint64_t blocks = (shots + kShotBlock - 1) / kShotBlock;

  // Each block owns its RNG stream, so the result does not depend on threads.
  std::vector<std::vector<std::uint64_t>> block_counts(blocks);
  auto run_block = [&](std::uint64_t blk) {
    CounterRng rng(seed, blk);
    std::bernoulli_distribution coin(p_t);
    const std::uint64_t begin = blk * kShotBlock;
    const std::uint64_t end = std::min(shots, begin + kShotBlock);
    auto& out = block_counts[blk];
    out.reserve(end - begin);
    for (std::uint64_t s = begin; s < end; ++s) {
      const double mean = coin(rng) ? mean_bright : mean_dark;
      if (mean > 0.0) {
        std::poisson_distribution<std::uint64_t> counts(mean);
        out.push_back(counts(rng));
      } else {
        out.push_back(0);
      }
    }
  };
  threads = std::max(1u, threads);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::uint64_t blk = w; blk < blocks; blk += threads) run_block(blk);
    });
  }
  for (auto& t : pool) t.join();

  FluorescenceResult res;
  std::uint64_t total_counts = 0;
  for (const auto& blk : block_counts) {
    for (std::uint64_t c : blk) {
      if (c >= res.histogram.size()) res.histogram.resize(c + 1, 0);
      ++res.histogram[c];
      total_counts += c;
    }
  }
  if (res.histogram.empty()) res.histogram.assign(1, 0);

  // Valley: the emptiest bin strictly between the dark and bright means,
  // lowest such bin on ties.
  const auto lo = static_cast<std::uint64_t>(std::floor(mean_dark)) + 1;
  const auto hi = static_cast<std::uint64_t>(std::ceil(mean_bright));
  res.threshold = lo;
  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  for (std::uint64_t k = lo; k < std::max(hi, lo + 1); ++k) {
    const std::uint64_t h = k < res.histogram.size() ? res.histogram[k] : 0;
    if (h < best) {
      best = h;
      res.threshold = k;
    }
  }

  std::uint64_t bright = 0;
  for (std::uint64_t c = res.threshold + 1; c < res.histogram.size(); ++c) bright += res.histogram[c];
  const double n = static_cast<double>(std::max<std::uint64_t>(shots, 1));
  res.p_t_hat = static_cast<double>(bright) / n;
  res.std_error = std::sqrt(res.p_t_hat * (1.0 - res.p_t_hat) / n);
  res.mean_counts = static_cast<double>(total_counts) / n;
  return res;
}

}  // namespace ionwalk
