#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/special_functions/laguerre.hpp>

#include "ionwalk/dynamics.hpp"
#include "ionwalk/error.hpp"
#include "ionwalk/sideband.hpp"

using namespace ionwalk;
using std::numbers::pi;

namespace {

const double kDelta = std::sqrt(1.33);

DriveParams base() { return DriveParams::trapped_ion_defaults(); }

// The calibrated default drive is used by several cases.
const DriveParams& calibrated() {
  static const DriveParams p = calibrate_step(base(), 1.33);
  return p;
}

JointState superposed(std::size_t n_max) {
  JointState s(n_max);
  s.amp(0, 0) = s.amp(0, 1) = 1.0 / std::sqrt(2.0);
  return s;
}

cplx mean_a(const MotionalVector& v) {
  cplx m = 0.0;
  for (Eigen::Index n = 1; n < v.amp.size(); ++n) m += std::conj(v.amp[n - 1]) * std::sqrt(double(n)) * v.amp[n];
  return m / v.norm_squared();
}

// Forced oscillator H = -A eta sin(phase - (wz + d) t) (a e^{-i wz t} + h.c.) started in vacuum.
cplx forced_alpha(double a, double eta, double phase, double wz, double d, double t) {
  const cplx i(0, 1);
  const cplx i1 = std::exp(i * phase) * (1.0 - std::exp(-i * d * t)) / (i * d);
  const cplx i2 = std::exp(-i * phase) * (std::exp(i * (2 * wz + d) * t) - 1.0) / (i * (2 * wz + d));
  return 0.5 * a * eta * (i1 - i2);
}

}  // namespace

TEST_CASE("parameter validation") {
  DriveParams p = base();
  CHECK_NOTHROW(p.validate());
  p.eta = 0.0;
  CHECK_THROWS_AS(p.validate(), PhysicsError);
  p = base();
  p.delta = 0.0;
  CHECK_THROWS_AS(p.validate(), PhysicsError);
  p = base();
  p.dt = -1.0;
  CHECK_THROWS_AS(p.validate(), PhysicsError);
}

TEST_CASE("hamiltonian is hermitian") {
  DriveParams p = base();
  p.drive_amp_h = 2 * pi * 150e3;
  p.n_max = 40;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 2e-5);
  for (int k = 0; k < 5; ++k) {
    auto h = drive_hamiltonian(u(rng), p).entries;
    CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() < 1e-12 * h.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("hamiltonian Lamb-Dicke limit") {
  DriveParams p = base();
  p.eta = 1e-4;
  p.drive_amp_h = 2 * pi * 150e3;
  p.n_max = 30;
  const double t = 3.7e-6;
  const auto h = drive_hamiltonian(t, p).entries;
  const std::size_t dim = p.n_max + 1;
  const cplx ph = std::exp(cplx(0, p.omega_z * t));
  for (Coin c : {Coin::H, Coin::T}) {
    const double a = p.drive_amp(c);
    const double th = p.phase - (p.omega_z + p.delta) * t;
    CMatrix ref = CMatrix::Zero(dim, dim);
    for (std::size_t n = 0; n < dim; ++n) ref(n, n) = a * std::cos(th);
    for (std::size_t n = 0; n + 1 < dim; ++n) {
      const double s = std::sqrt(double(n + 1));
      ref(n + 1, n) = -a * p.eta * std::sin(th) * s * ph;
      ref(n, n + 1) = std::conj(ref(n + 1, n));
    }
    const auto off = static_cast<Eigen::Index>(c) * dim;
    CMatrix blk = h.block(off, off, dim, dim);
    const int k = dim - 3;
    // remainder is O(eta^2 n) relative to the drive amplitude
    CHECK((blk - ref).topLeftCorner(k, k).cwiseAbs().maxCoeff() < 1e-6 * std::abs(a));
  }
  CHECK(h.topRightCorner(dim, dim).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matrix elements follow the Laguerre law") {
  const double eta = 0.31;
  DriveEngine engine(256);
  const CMatrix e = engine.displacement_exponential(eta);
  for (unsigned n = 0; n <= 60; ++n) {
    const cplx want = cplx(0, eta) * std::exp(-eta * eta / 2) * boost::math::laguerre(n, 1u, eta * eta) /
                      std::sqrt(double(n + 1));
    CHECK(std::abs(e(n + 1, n) - want) < 1e-10);
    CHECK(std::abs(e(n, n) - std::exp(-eta * eta / 2) * boost::math::laguerre(n, eta * eta)) < 1e-10);
  }
}

TEST_CASE("Laguerre recurrence against boost") {
  for (unsigned n = 0; n <= 80; ++n) {
    for (double x : {0.0, 0.0961, 0.5, 2.0}) {
      const double b = boost::math::laguerre(n, 1u, x);
      CHECK(laguerre_l1(n, x) == doctest::Approx(b).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("sideband Rabi curve") {
  const double om = 2 * pi * 500e3;
  auto c = sideband_rabi_curve(0.31, om, 64);
  CHECK(c.peak_n >= 8);
  CHECK(c.peak_n <= 10);
  REQUIRE(c.zero_n.has_value());
  CHECK(*c.zero_n >= 34);
  CHECK(*c.zero_n <= 40);
  // sign change of L_n^1(eta^2) from boost
  std::size_t first = 0;
  for (unsigned n = 0; n < 64; ++n) {
    if (boost::math::laguerre(n, 1u, 0.31 * 0.31) <= 0.0) {
      first = n;
      break;
    }
  }
  CHECK(*c.zero_n == first);
  CHECK(c.ld[3] == doctest::Approx(2.0 * 0.31 * om));
  CHECK_THROWS_AS(sideband_rabi_curve(0.0, om, 10), PhysicsError);

  const double eta = 0.01;
  auto s = sideband_rabi_curve(eta, om, 200);
  for (std::size_t n = 0; n < 200; ++n) {
    if (n * eta * eta < 0.01) CHECK(std::abs(s.exact[n] / s.ld[n] - 1.0) < 0.01);
  }
}

TEST_CASE("zero drive keeps probabilities") {
  DriveParams p = base();
  p.n_max = 40;
  auto s = apply_coin(JointState::product(Coin::T, coherent_state(0.8, 40)), coin_toss());
  auto r = evolve(s, 0.0, 3e-6, p);
  for (Eigen::Index n = 0; n <= 40; ++n) {
    for (int c = 0; c < 2; ++c) CHECK(std::norm(r.amp(n, c)) == doctest::Approx(std::norm(s.amp(n, c))).epsilon(1e-12));
  }
}

TEST_CASE("forced oscillator in the Lamb-Dicke regime") {
  DriveParams p = base();
  p.eta = 1e-3;
  p.n_max = 40;
  p.drive_amp_h = p.delta / (p.eta * std::abs(p.force_ratio));  // |alpha| near 1 after t_d / 2
  const double a_t = p.drive_amp(Coin::T);
  const double half = p.t_d / 2;
  auto s = evolve(JointState::product(Coin::T, MotionalVector::fock(0, p.n_max)), 0.0, half, p);
  const cplx got = mean_a(s.branch(Coin::T));
  const cplx want = forced_alpha(a_t, p.eta, p.phase, p.omega_z, p.delta, half);
  CHECK(std::abs(got - want) < 0.01 * std::abs(want));
  // slow part alone: 2 (a eta / 2) / delta
  CHECK(std::abs(std::abs(got) - std::abs(a_t) * p.eta / p.delta) < 0.01 * std::abs(got) + std::abs(want - forced_alpha(a_t, p.eta, p.phase, 1e30, p.delta, half)));
  CHECK(fidelity(s.branch(Coin::T), coherent_state(got, p.n_max)) > 1 - 1e-5);
  // default phase sends T toward +Re
  CHECK(got.real() > 0.9 * std::abs(got));

  auto full = evolve(JointState::product(Coin::T, MotionalVector::fock(0, p.n_max)), 0.0, p.t_d, p);
  CHECK(std::norm(full.amp(0, 1)) > 0.99);
}

TEST_CASE("duration zero step is two pi pulses") {
  DriveParams p = calibrated();
  p.duration_scale = 0.0;
  auto s = superposed(p.n_max);
  auto r = experimental_step(s, p);
  CHECK((r.amp + s.amp).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("calibration") {
  const DriveParams& p = calibrated();
  CHECK(p.drive_amp_h > 0.0);
  DriveEngine engine(p.n_max);
  CHECK(std::abs(first_step_nbar(p, engine) - 1.33) < 1e-9);
  // bit identical on repeat
  CHECK(calibrate_step(base(), 1.33).drive_amp_h == p.drive_amp_h);
  const DriveParams tiny = calibrate_step(base(), 1e-6);
  CHECK(tiny.drive_amp_h < 1e-2 * p.drive_amp_h);

  // closed-form estimate for the step amplitude, tolerant of beyond-LD corrections
  const double ld = std::sqrt(1.33) * p.delta / (p.eta * (1 - p.force_ratio));
  CHECK(p.drive_amp_h == doctest::Approx(ld).epsilon(0.1));
}

TEST_CASE("calibrated step") {
  const DriveParams& p = calibrated();
  auto s0 = superposed(p.n_max);
  auto got = experimental_step(s0, p);
  auto ideal = conditional_step_operator(kDelta, p.n_max).apply(s0);
  CHECK(fidelity(got, ideal) > 0.99);
  auto from_t = experimental_step(apply_coin(JointState::product(Coin::T, MotionalVector::fock(0, p.n_max)), coin_toss()), p);
  CHECK(number_expectation(from_t) == doctest::Approx(1.33).epsilon(0.05 / 1.33));
  CHECK(std::abs(got.norm_squared() - 1.0) < 1e-9);

  // echo symmetrization: both branches move by the same amount
  const double mh = std::abs(mean_a(got.branch(Coin::H)));
  const double mt = std::abs(mean_a(got.branch(Coin::T)));
  CHECK(std::abs(mh - mt) < 0.01 * mt);
  CHECK(mean_a(got.branch(Coin::T)).real() > 0.0);
  CHECK(mean_a(got.branch(Coin::H)).real() < 0.0);
}

TEST_CASE("dynamics walk") {
  const DriveParams& p = calibrated();
  auto w = run_dynamics_walk(3, p, {});
  REQUIRE(w.steps.size() == 3);
  CHECK(std::abs(w.steps[0].p_h - 0.5) < 1e-9);
  CHECK(std::abs(w.report.norm - 1.0) < 1e-7);
  CHECK(w.report.coin.p_h == doctest::Approx(0.259).epsilon(0.015 / 0.259));
  CHECK(w.steps[2].n_bar > w.steps[1].n_bar);
  CHECK(w.steps[1].n_bar > w.steps[0].n_bar);

  // bit identical on repeat
  auto again = run_dynamics_walk(3, p, {});
  CHECK((again.state.amp - w.state.amp).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("deep Lamb-Dicke dynamics approaches the phase walk") {
  DriveParams p = base();
  p.eta = 0.02;
  p = calibrate_step(p, 1.33);
  DynamicsOptions o;
  o.walk.estimate_positions = false;
  auto d = run_dynamics_walk(3, p, o);
  WalkOptions wo;
  wo.estimate_positions = false;
  auto ph = run_phase_walk(3, kDelta, p.n_max, wo);
  CHECK(std::abs(d.report.coin.p_h - ph.report.coin.p_h) < 0.005);
  CHECK(std::abs(d.steps[1].p_h - ph.report.coin.p_h) > 0.0);
}

TEST_CASE("time step halving") {
  DriveParams p = calibrated();
  auto s0 = superposed(p.n_max);
  auto ideal = conditional_step_operator(kDelta, p.n_max).apply(s0);
  const double f1 = fidelity(experimental_step(s0, p), ideal);
  p.dt /= 2;
  const double f2 = fidelity(experimental_step(s0, p), ideal);
  CHECK(std::abs(f1 - f2) < 1e-8);
}

TEST_CASE("duration sweep") {
  const DriveParams& p = calibrated();
  const std::vector<double> scales = {0.98, 1.0, 1.02};
  auto one = duration_sweep(scales, p, 1);
  auto three = duration_sweep(scales, p, 3);
  REQUIRE(one.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(one[i].scale == scales[i]);
    CHECK(one[i].p_h == three[i].p_h);
    CHECK(one[i].p_h + one[i].p_t == doctest::Approx(1.0));
  }
  CHECK(std::abs(std::abs(one[0].p_h - 0.5) - std::abs(one[2].p_h - 0.5)) < 0.03);
}

TEST_CASE("step limit study") {
  auto s = step_limit_study(calibrated(), 6, 1.33);
  REQUIRE(!s.records.empty());
  CHECK(s.records[0].fidelity > 0.99);
  bool dropped = false;
  for (const auto& r : s.records) dropped = dropped || r.fidelity < 0.99;
  CHECK(dropped);

  DriveParams ld = base();
  ld.eta = 0.02;
  auto q = step_limit_study(calibrate_step(ld, 1.33), 1, 1.33);
  REQUIRE(q.records.size() == 1);
  CHECK(q.records[0].dominant_branch.min_variance == doctest::Approx(0.5).epsilon(0.01));
  CHECK(q.records[0].dominant_branch.max_variance == doctest::Approx(0.5).epsilon(0.01));
}
