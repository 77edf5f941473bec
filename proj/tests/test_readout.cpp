#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ionwalk/error.hpp"
#include "ionwalk/nnls.hpp"
#include "ionwalk/readout.hpp"
#include "ionwalk/sideband.hpp"
#include "ionwalk/walk.hpp"

using namespace ionwalk;
using std::numbers::pi;

namespace {

const double kDelta = std::sqrt(1.33);

double l1(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
    s += std::abs((i < a.size() ? a[i] : 0.0) - (i < b.size() ? b[i] : 0.0));
  }
  return s;
}

std::vector<double> poisson(double mean, std::size_t n) {
  std::vector<double> p(n + 1);
  for (std::size_t k = 0; k <= n; ++k) p[k] = std::exp(-mean + k * std::log(mean) - std::lgamma(k + 1.0));
  return p;
}

// Brute-force NNLS: best unconstrained solution over every support set that is nonnegative.
Eigen::VectorXd nnls_brute(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const int n = static_cast<int>(a.cols());
  Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
  double best_r = b.norm();
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> idx;
    for (int j = 0; j < n; ++j)
      if (mask & (1 << j)) idx.push_back(j);
    Eigen::MatrixXd sub(a.rows(), idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) sub.col(k) = a.col(idx[k]);
    Eigen::VectorXd xs = sub.colPivHouseholderQr().solve(b);
    if (xs.minCoeff() < 0) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) x[idx[k]] = xs[k];
    const double r = (a * x - b).norm();
    if (r < best_r) best_r = r, best = x;
  }
  return best;
}

SidebandModel model() { return SidebandModel{}; }

}  // namespace

TEST_CASE("nnls against brute force") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 30; ++trial) {
    Eigen::MatrixXd a(12, 5);
    Eigen::VectorXd b(12);
    for (int i = 0; i < 12; ++i) {
      b[i] = g(rng);
      for (int j = 0; j < 5; ++j) a(i, j) = g(rng);
    }
    auto r = nnls(a, b);
    auto want = nnls_brute(a, b);
    CHECK((r.x - want).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(r.x.minCoeff() >= 0.0);
    CHECK(r.residual == doctest::Approx((a * want - b).norm()).epsilon(1e-9));
  }
}

TEST_CASE("branch selection") {
  auto s = JointState::product(Coin::T, coherent_state(0.7, 30));
  auto t = branch_select(s, Coin::T);
  CHECK(t.probability == doctest::Approx(1.0));
  CHECK(fidelity(t.motion, coherent_state(0.7, 30)) == doctest::Approx(1.0));
  auto h = branch_select(s, Coin::H);
  CHECK(h.probability < 1e-30);
  CHECK(h.motion.norm_squared() < 1e-30);

  auto w = run_phase_walk(3, kDelta, 96, {});
  CHECK(branch_select(w.state, Coin::T).probability == doctest::Approx(0.75).epsilon(3e-4));
}

TEST_CASE("displace back") {
  auto a = coherent_state(kDelta, 60);
  CHECK((displace_back(a, 0, kDelta).amp - a.amp).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(fidelity(displace_back(a, 1, kDelta), MotionalVector::fock(0, 60)) > 1 - 1e-8);
  auto m = displace_back(coherent_state(-kDelta, 60), 1, kDelta);
  CHECK(number_expectation(m) == doctest::Approx(4 * 1.33).epsilon(1e-8));
  CHECK(fidelity(m, coherent_state(-2 * kDelta, 60)) > 1 - 1e-8);
  CHECK_THROWS_AS(displace_back(coherent_state(2.0, 20), -3, 2.0), TruncationError);
}

TEST_CASE("flopping from vacuum") {
  SidebandModel m = model();
  const double w01 = sideband_rabi_exact(0, m.eta, m.omega);
  CHECK(w01 == doctest::Approx(m.eta * m.omega * std::exp(-m.eta * m.eta / 2)));
  std::vector<double> times = {0.0, pi / w01, 2 * pi / w01, 0.3e-6};
  auto tr = simulate_bsb_flopping(MotionalVector::fock(0, 10), times, m);
  CHECK(tr.p_t[0] == doctest::Approx(1.0));
  CHECK(std::abs(tr.p_t[1]) < 1e-12);
  CHECK(tr.p_t[2] == doctest::Approx(1.0));
  CHECK(tr.p_t[3] == doctest::Approx(0.5 * (1 + std::cos(w01 * 0.3e-6))));

  // decay envelope
  m.decay_rate = 2e4;
  auto d = simulate_bsb_flopping(MotionalVector::fock(0, 10), times, m);
  CHECK(d.p_t[2] == doctest::Approx(0.5 * (1 + std::exp(-m.decay_rate * times[2]))));
}

TEST_CASE("frequency resolution is best at the bottom") {
  auto c = sideband_rabi_curve(0.31, 2 * pi * 500e3, 30);
  const double first = c.exact[1] - c.exact[0];
  for (std::size_t n = 1; n <= 20; ++n) CHECK(first > c.exact[n + 1] - c.exact[n]);
}

TEST_CASE("population extraction") {
  const SidebandModel m = model();
  const auto times = uniform_times(100, 1e-6);
  ExtractionOptions o;
  o.bootstrap_resamples = 0;

  auto vac = extract_populations(simulate_bsb_flopping(MotionalVector::fock(0, 20), times, m), 10, m, o);
  CHECK(std::abs(vac.p_n[0] - 1.0) < 1e-6);
  for (std::size_t n = 1; n < vac.p_n.size(); ++n) CHECK(vac.p_n[n] < 1e-6);

  const std::vector<double> mix = {0.5, 0.3, 0.2};
  auto r = extract_populations(simulate_bsb_flopping(mix, times, m), 10, m, o);
  CHECK(l1(r.p_n, mix) < 0.01);

  auto coh = coherent_state(kDelta, 40);
  auto rc = extract_populations(simulate_bsb_flopping(coh, times, m), 10, m, o);
  CHECK(l1(rc.p_n, poisson(1.33, 10)) < 0.05);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(11);
    double s = 0.0;
    for (auto& x : p) s += (x = u(rng));
    for (auto& x : p) x /= s;
    auto e = extract_populations(simulate_bsb_flopping(p, times, m), 10, m, o);
    CHECK(l1(e.p_n, p) < 0.01);
  }
}

TEST_CASE("shot noise extraction") {
  const SidebandModel m = model();
  const auto times = uniform_times(100, 1e-6);
  auto coh = coherent_state(kDelta, 40);
  auto noisy = add_shot_noise(simulate_bsb_flopping(coh, times, m), 1000, 99);
  REQUIRE(noisy.counts.size() == 100);
  CHECK(noisy.shots_per_point == 1000);
  ExtractionOptions o;
  o.seed = 4;
  auto e = extract_populations(noisy, 10, m, o);
  CHECK(l1(e.p_n, poisson(1.33, 10)) < 0.15);
  REQUIRE(e.sigma_n.size() == e.p_n.size());
  CHECK(e.sigma_n[0] > 0.0);
  CHECK(e.sigma_n[0] < 0.1);

  auto again = add_shot_noise(simulate_bsb_flopping(coh, times, m), 1000, 99);
  CHECK(again.counts == noisy.counts);
}

TEST_CASE("fourier mode") {
  const SidebandModel m = model();
  const auto times = uniform_times(400, 0.5e-6);
  ExtractionOptions o;
  o.method = ExtractionMethod::Fourier;
  o.bootstrap_resamples = 0;
  auto e = extract_populations(simulate_bsb_flopping(MotionalVector::fock(0, 10), times, m), 5, m, o);
  CHECK(e.p_n[0] > 0.8);
  double s = 0;
  for (double p : e.p_n) s += p;
  CHECK(s == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("short traces are rejected") {
  const SidebandModel m = model();
  auto tr = simulate_bsb_flopping(MotionalVector::fock(0, 10), uniform_times(5, 1e-8), m);
  try {
    extract_populations(tr, 10, m);
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IllConditioned);
  }
}

TEST_CASE("position estimator on the three step walk") {
  auto w = run_phase_walk(3, kDelta, 96, {});
  ReadoutKnobs k;
  auto t = position_distribution(w.state, Coin::T, kDelta, -3, 3, k);
  auto h = position_distribution(w.state, Coin::H, kDelta, -3, 3, k);
  double st = 0, sh = 0;
  for (auto& [i, p] : t) st += p;
  for (auto& [i, p] : h) sh += p;
  CHECK(std::abs(st - w.state.coin_probability(Coin::T)) < 0.05);
  CHECK(std::abs(sh - w.state.coin_probability(Coin::H)) < 0.05);

  auto total = position_distribution_total(w.state, kDelta, -3, 3, k);
  CHECK(std::abs(total[-3] - 0.125) < 0.05);
  CHECK(std::abs(total[-1] - 0.125) < 0.05);
  CHECK(std::abs(total[1] - 0.625) < 0.05);
  CHECK(std::abs(total[3] - 0.125) < 0.05);
  // regression values of the mixture fit at even sites
  CHECK(total[0] == doctest::Approx(0.09676).epsilon(1e-3));
  CHECK(total[-2] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK(total[2] < 1e-4);

  // the naive projector piles weight on the origin
  ReadoutKnobs pk;
  pk.estimator = PositionEstimator::Projector;
  auto proj = position_distribution_total(w.state, kDelta, -3, 3, pk);
  CHECK(proj[0] > 0.25);
}

TEST_CASE("one hot coherent component") {
  auto s = JointState::product(Coin::T, coherent_state(2 * kDelta, 96));
  auto d = position_distribution(s, Coin::T, kDelta, -3, 3);
  CHECK(d[2] > 0.95);
}

TEST_CASE("even sites fade in the orthogonal limit") {
  double prev = 1.0;
  for (double d : {1.15, 1.6, 2.2}) {
    auto w = run_phase_walk(3, d, 320, {});
    auto t = position_distribution_total(w.state, d, -3, 3, {});
    const double even = t[-2] + t[0] + t[2];
    CHECK(even <= prev);
    prev = even;
  }
  CHECK(prev < 0.01);
}

TEST_CASE("flopping population source") {
  // displaced-back profiles stay inside the fitted rows 0..10
  auto s = JointState::product(Coin::T, coherent_state(kDelta, 60));
  ReadoutKnobs flop;
  flop.source = PopulationSource::Flopping;
  auto d = position_distribution(s, Coin::T, kDelta, -1, 2, flop);
  CHECK(d[1] > 0.9);
  flop.shots = 1000;
  auto n1 = position_distribution(s, Coin::T, kDelta, -1, 2, flop);
  auto n2 = position_distribution(s, Coin::T, kDelta, -1, 2, flop);
  CHECK(n1 == n2);
  CHECK(n1[1] > 0.8);
}

TEST_CASE("fluorescence detection") {
  DetectionParams clean;
  clean.dark_rate = 0.0;
  auto bright = simulate_fluorescence(1.0, 20000, clean, 1);
  CHECK(bright.mean_counts == doctest::Approx(20.0).epsilon(0.01));
  auto dark = simulate_fluorescence(0.0, 1000, clean, 1);
  CHECK(dark.mean_counts == 0.0);
  CHECK(dark.p_t_hat == 0.0);

  DetectionParams det;
  auto r = simulate_fluorescence(0.741, 60000, det, 7);
  const double se = std::sqrt(0.741 * 0.259 / 60000);
  CHECK(std::abs(r.p_t_hat - 0.741) < 3 * se);
  CHECK(std::abs(r.p_t_hat - 0.741) < 0.004);
  CHECK(r.std_error == doctest::Approx(se).epsilon(0.02));
  CHECK(r.threshold >= 1);
  CHECK(r.threshold < 20);

  auto r4 = simulate_fluorescence(0.741, 60000, det, 7, 4);
  CHECK(r4.histogram == r.histogram);
  CHECK(r4.p_t_hat == r.p_t_hat);

  CHECK_THROWS_AS(simulate_fluorescence(1.5, 10, det, 1), Error);
}

TEST_CASE("fluorescence estimate is unbiased") {
  DetectionParams det;
  const double p = 0.741;
  const std::uint64_t shots = 2000;
  double sum = 0.0;
  for (std::uint64_t rep = 0; rep < 200; ++rep) sum += simulate_fluorescence(p, shots, det, 1000 + rep).p_t_hat;
  const double mean = sum / 200;
  const double se = std::sqrt(p * (1 - p) / shots / 200);
  CHECK(std::abs(mean - p) < 2 * se);
}
