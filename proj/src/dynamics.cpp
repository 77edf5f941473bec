#include "ionwalk/dynamics.hpp"

#include <algorithm>
#include <array>
#include <exception>
#include <cmath>
#include <sstream>
#include <thread>

#include "ionwalk/error.hpp"

namespace ionwalk {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kNormDriftBound = 1e-7;

// Fourth-order symmetric composition weights (Yoshida).
const double kW1 = 1.0 / (2.0 - std::cbrt(2.0));
const double kW0 = -std::cbrt(2.0) * kW1;

}  // namespace

DriveParams DriveParams::trapped_ion_defaults() {
  DriveParams p;
  p.omega_z = kTwoPi * 2.1e6;
  p.delta = kTwoPi * 100e3;
  p.eta = 0.31;
  p.drive_amp_h = 0.0;
  p.force_ratio = -1.5;
  p.phase = -std::numbers::pi / 2;
  p.t_d = kTwoPi / p.delta;
  p.dt = 1.0 / (100.0 * 2.1e6);
  p.n_max = 128;
  p.duration_scale = 1.0;
  return p;
}

void DriveParams::validate() const {
  std::ostringstream os;
  if (!(eta > 0.0)) os << "eta must be positive (got " << eta << ")";
  else if (delta == 0.0 || !std::isfinite(delta)) os << "detuning delta must be nonzero and finite";
  else if (!(omega_z > 0.0)) os << "omega_z must be positive";
  else if (!(dt > 0.0)) os << "dt must be positive";
  else if (!(t_d > 0.0)) os << "t_d must be positive";
  else if (!(duration_scale >= 0.0)) os << "duration_scale must be non-negative";
  else if (n_max < 1) os << "n_max must be at least 1";
  else if (!std::isfinite(drive_amp_h) || !std::isfinite(force_ratio) || !std::isfinite(phase))
    os << "drive amplitude, force ratio and phase must be finite";
  const std::string msg = os.str();
  if (!msg.empty()) throw PhysicsError("DriveParams: " + msg);
}

DriveEngine::DriveEngine(std::size_t n_max) {
  const auto dim = static_cast<Eigen::Index>(n_max + 1);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index n = 1; n < dim; ++n) {
    x(n, n - 1) = x(n - 1, n) = std::sqrt(static_cast<double>(n));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(x);
  vectors_ = eig.eigenvectors();
  values_ = eig.eigenvalues();
}

CMatrix DriveEngine::displacement_exponential(double eta) const {
  const CVector d = values_.unaryExpr([eta](double l) { return std::polar(1.0, eta * l); });
  return vectors_.cast<cplx>() * d.asDiagonal() * vectors_.transpose().cast<cplx>();
}

JointOperator DriveEngine::hamiltonian(double t, const DriveParams& p) const {
  const Eigen::Index dim = values_.size();
  const double theta = p.phase - (p.omega_z + p.delta) * t;
  CVector rot(dim);
  for (Eigen::Index n = 0; n < dim; ++n) rot[n] = std::polar(1.0, -p.omega_z * t * static_cast<double>(n));

  JointOperator op;
  op.entries = CMatrix::Zero(2 * dim, 2 * dim);
  for (int c = 0; c < 2; ++c) {
    const double amp = p.drive_amp(static_cast<Coin>(c));
    const Eigen::VectorXd diag =
        values_.unaryExpr([&](double l) { return amp * std::cos(p.eta * l + theta); });
    const Eigen::MatrixXd lab = vectors_ * diag.asDiagonal() * vectors_.transpose();
    op.entries.block(c * dim, c * dim, dim, dim) =
        rot.conjugate().asDiagonal() * lab.cast<cplx>() * rot.asDiagonal();
  }
  return op;
}

JointState DriveEngine::evolve(const JointState& state, double t0, double t1,
                               const DriveParams& p) const {
  if (t1 < t0) throw Error(ErrorKind::InvalidArgument, "evolve: t1 < t0");
  const Eigen::Index dim = values_.size();
  if (state.amp.rows() != dim) throw DimensionError("evolve: state n_max differs from engine");
  if (t1 == t0) return state;

  const double span = t1 - t0;
  const auto steps = static_cast<long>(std::ceil(span / p.dt - 1e-9));
  const double h = span / static_cast<double>(std::max(1L, steps));
  const double amp[2] = {p.drive_amp(Coin::H), p.drive_amp(Coin::T)};
  const double norm0 = state.norm_squared();

  // Columns: Re H, Im H, Re T, Im T, carried in the rotated frame R(t)|psi>
  // between kicks.
  Eigen::MatrixXd work(dim, 4);
  Eigen::MatrixXd tmp(dim, 4);
  const std::array<double, 3> weights{kW1, kW0, kW1};

  double t = t0;
  double frame_t = t0 + 0.5 * kW1 * h;
  for (Eigen::Index n = 0; n < dim; ++n) {
    const cplx r = std::polar(1.0, -p.omega_z * frame_t * static_cast<double>(n));
    for (int c = 0; c < 2; ++c) {
      const cplx z = r * state.amp(n, c);
      work(n, 2 * c) = z.real();
      work(n, 2 * c + 1) = z.imag();
    }
  }

  auto rotate = [&](double dt_frame) {
    for (Eigen::Index n = 0; n < dim; ++n) {
      const cplx r = std::polar(1.0, -p.omega_z * dt_frame * static_cast<double>(n));
      for (int c = 0; c < 2; ++c) {
        const cplx z = r * cplx(work(n, 2 * c), work(n, 2 * c + 1));
        work(n, 2 * c) = z.real();
        work(n, 2 * c + 1) = z.imag();
      }
    }
  };

  for (long k = 0; k < std::max(1L, steps); ++k) {
    for (double w : weights) {
      const double sub = w * h;
      const double tm = t + 0.5 * sub;
      if (tm != frame_t) {
        rotate(tm - frame_t);
        frame_t = tm;
      }
      const double theta = p.phase - (p.omega_z + p.delta) * tm;
      tmp.noalias() = vectors_.transpose() * work;
      for (Eigen::Index j = 0; j < dim; ++j) {
        const double potential = std::cos(p.eta * values_[j] + theta);
        for (int c = 0; c < 2; ++c) {
          const cplx ph = std::polar(1.0, -amp[c] * potential * sub);
          const cplx z = ph * cplx(tmp(j, 2 * c), tmp(j, 2 * c + 1));
          tmp(j, 2 * c) = z.real();
          tmp(j, 2 * c + 1) = z.imag();
        }
      }
      work.noalias() = vectors_ * tmp;
      t += sub;
    }
  }

  JointState out(state.n_max());
  for (Eigen::Index n = 0; n < dim; ++n) {
    const cplx r = std::polar(1.0, p.omega_z * frame_t * static_cast<double>(n));
    for (int c = 0; c < 2; ++c) out.amp(n, c) = r * cplx(work(n, 2 * c), work(n, 2 * c + 1));
  }

  const double drift = std::abs(out.norm_squared() - norm0);
  if (drift > kNormDriftBound) {
    std::ostringstream os;
    os << "evolve: norm drift " << drift << " exceeds " << kNormDriftBound << "; reduce dt";
    throw NumericalError(ErrorKind::NormDrift, os.str());
  }
  return out;
}

JointOperator drive_hamiltonian(double t, const DriveParams& p) {
  p.validate();
  return DriveEngine(p.n_max).hamiltonian(t, p);
}

JointState evolve(const JointState& state, double t0, double t1, const DriveParams& p) {
  p.validate();
  JointState out = DriveEngine(state.n_max()).evolve(state, t0, t1, p);
  require_truncation(out, "evolve");
  return out;
}

JointState experimental_step(const JointState& state, const DriveParams& p, const DriveEngine& engine) {
  const double half = 0.5 * p.t_d * p.duration_scale;
  const CoinOperator pi = pi_pulse();
  JointState s = engine.evolve(state, 0.0, half, p);
  s = apply_coin(s, pi);
  s = engine.evolve(s, half, 2.0 * half, p);
  s = apply_coin(s, pi);
  require_truncation(s, "experimental_step");
  return s;
}

JointState experimental_step(const JointState& state, const DriveParams& p) {
  p.validate();
  return experimental_step(state, p, DriveEngine(state.n_max()));
}

double first_step_nbar(const DriveParams& p, const DriveEngine& engine) {
  JointState s = JointState::product(Coin::T, MotionalVector::fock(0, p.n_max));
  s = experimental_step(apply_coin(s, coin_toss()), p, engine);
  return number_expectation(s);
}

DriveParams calibrate_step(const DriveParams& p, double target_nbar, double tolerance) {
  p.validate();
  if (!(target_nbar > 0.0)) throw Error(ErrorKind::InvalidArgument, "calibrate_step: target_nbar must be positive");
  const DriveEngine engine(p.n_max);
  DriveParams q = p;
  auto residual = [&](double amp) {
    q.drive_amp_h = amp;
    return first_step_nbar(q, engine) - target_nbar;
  };

  // Lamb-Dicke estimate of the amplitude: step = eta |A_H - A_T| / delta.
  const double lever = std::abs(1.0 - p.force_ratio);
  if (lever == 0.0) throw NumericalError(ErrorKind::NoBracket, "calibrate_step: force_ratio = 1 produces no step");
  double lo = 0.0;
  double f_lo = -target_nbar;
  double hi = std::sqrt(target_nbar) * std::abs(p.delta) / (p.eta * lever);
  double f_hi = residual(hi);
  int expansions = 0;
  while (f_hi < 0.0) {
    if (++expansions > 30) {
      throw NumericalError(ErrorKind::NoBracket, "calibrate_step: no amplitude reaches the target <n>");
    }
    lo = hi;
    f_lo = f_hi;
    hi *= 1.5;
    f_hi = residual(hi);
  }

  // Illinois-modified false position keeps the bracket and converges
  // superlinearly.
  int side = 0;
  double amp = hi;
  for (int iter = 0; iter < 200; ++iter) {
    amp = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    const double f = residual(amp);
    if (std::abs(f) <= tolerance * target_nbar || (hi - lo) <= 1e-15 * hi) break;
    if ((f < 0.0) == (f_lo < 0.0)) {
      lo = amp;
      f_lo = f;
      if (side == -1) f_hi *= 0.5;
      side = -1;
    } else {
      hi = amp;
      f_hi = f;
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
  }
  q.drive_amp_h = amp;
  return q;
}

DynamicsWalkResult run_dynamics_walk(std::size_t n_steps, const DriveParams& p,
                                     const DynamicsOptions& options) {
  p.validate();
  const DriveEngine engine(p.n_max);
  JointState s = JointState::product(Coin::T, MotionalVector::fock(options.walk.initial_fock, p.n_max));
  const CoinOperator toss = coin_toss();
  DynamicsWalkResult out;
  for (std::size_t k = 0; k < n_steps; ++k) {
    s = experimental_step(apply_coin(s, toss), p, engine);
    out.steps.push_back({s.coin_probability(Coin::H), number_expectation(s)});
  }
  out.report = report(s, n_steps, std::sqrt(options.target_nbar), options.walk);
  out.state = std::move(s);
  return out;
}

std::vector<SweepPoint> duration_sweep(const std::vector<double>& scales, const DriveParams& p,
                                       unsigned threads) {
  p.validate();
  const DriveEngine engine(p.n_max);
  std::vector<SweepPoint> out(scales.size());
  auto run_one = [&](std::size_t idx) {
    DriveParams q = p;
    q.duration_scale = scales[idx];
    JointState s = JointState::product(Coin::T, MotionalVector::fock(0, q.n_max));
    for (int k = 0; k < 3; ++k) s = experimental_step(apply_coin(s, coin_toss()), q, engine);
    out[idx] = {scales[idx], s.coin_probability(Coin::H), s.coin_probability(Coin::T)};
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, scales.size()))));
  if (threads == 1) {
    for (std::size_t i = 0; i < scales.size(); ++i) run_one(i);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < scales.size(); i += threads) run_one(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

StepLimitStudy step_limit_study(const DriveParams& p, std::size_t max_steps, double target_nbar) {
  p.validate();
  const DriveEngine engine(p.n_max);
  const double step = std::sqrt(target_nbar);
  const CoinOperator toss = coin_toss();
  JointState s = JointState::product(Coin::T, MotionalVector::fock(0, p.n_max));
  StepLimitStudy study;
  for (std::size_t k = 1; k <= max_steps; ++k) {
    try {
      const JointState tossed = apply_coin(s, toss);
      JointState ideal(p.n_max);
      ideal.amp.col(0) = apply_displacement(CVector(tossed.amp.col(0)), -step);
      ideal.amp.col(1) = apply_displacement(CVector(tossed.amp.col(1)), step);
      s = experimental_step(tossed, p, engine);

      StepLimitRecord rec;
      rec.step = k;
      rec.n_bar = number_expectation(s);
      rec.fidelity = fidelity(ideal, s);
      rec.p_h = s.coin_probability(Coin::H);
      const Coin dominant = rec.p_h >= 0.5 ? Coin::H : Coin::T;
      rec.dominant_branch = quadrature_variances(s.branch(dominant));
      study.records.push_back(rec);
    } catch (const TruncationError& e) {
      study.truncated = true;
      study.diagnostic = e.what();
      break;
    }
  }
  return study;
}

}  // namespace ionwalk
