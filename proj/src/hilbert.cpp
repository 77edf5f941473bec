#include "ionwalk/hilbert.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "ionwalk/error.hpp"

namespace ionwalk {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::DimensionMismatch: return "dimension_mismatch";
    case ErrorKind::Truncation: return "truncation";
    case ErrorKind::InvalidPhysics: return "invalid_physics";
    case ErrorKind::NoBracket: return "no_bracket";
    case ErrorKind::IllConditioned: return "ill_conditioned";
    case ErrorKind::NormDrift: return "norm_drift";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

MotionalVector MotionalVector::fock(std::size_t n, std::size_t n_max) {
  if (n > n_max) throw Error(ErrorKind::InvalidArgument, "fock index exceeds n_max");
  MotionalVector v(n_max);
  v.amp[static_cast<Eigen::Index>(n)] = 1.0;
  return v;
}

JointState JointState::product(Coin c, const MotionalVector& motion) {
  JointState s(motion.n_max());
  s.amp.col(static_cast<int>(c)) = motion.amp;
  return s;
}

MotionalVector MotionalOperator::apply(const MotionalVector& v) const {
  if (v.amp.size() != entries.cols()) {
    throw DimensionError("motional operator/vector dimension mismatch");
  }
  return MotionalVector(CVector(entries * v.amp));
}

JointState JointOperator::apply(const JointState& s) const {
  const Eigen::Index dim = s.amp.rows();
  if (entries.rows() != 2 * dim) {
    throw DimensionError("joint operator/state dimension mismatch");
  }
  CVector flat(2 * dim);
  flat << s.amp.col(0), s.amp.col(1);
  const CVector out = entries * flat;
  JointState r(s.n_max());
  r.amp.col(0) = out.head(dim);
  r.amp.col(1) = out.tail(dim);
  return r;
}

double tail_probability(const CVector& amp) {
  const Eigen::Index size = amp.size();
  const auto count = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::ceil(0.1 * static_cast<double>(size))));
  return amp.tail(count).squaredNorm();
}

double tail_probability(const MotionalVector& v) { return tail_probability(v.amp); }

double tail_probability(const JointState& s) {
  return tail_probability(CVector(s.amp.col(0))) + tail_probability(CVector(s.amp.col(1)));
}

std::size_t recommended_n_max(double abs_alpha) {
  return static_cast<std::size_t>(std::ceil(abs_alpha * abs_alpha + 6.0 * abs_alpha + 10.0));
}

namespace {

[[noreturn]] void throw_tail(double tail, std::size_t n_max, const char* where) {
  std::ostringstream os;
  os << where << ": probability " << tail << " in the top 10% of " << n_max + 1
     << " Fock levels exceeds " << kTailTolerance << "; increase n_max";
  throw TruncationError(os.str());
}

}  // namespace

void require_truncation(const JointState& s, const char* where) {
  const double tail = tail_probability(s);
  if (tail > kTailTolerance) throw_tail(tail, s.n_max(), where);
}

void require_truncation(const MotionalVector& v, const char* where) {
  const double tail = tail_probability(v);
  if (tail > kTailTolerance) throw_tail(tail, v.n_max(), where);
}

MotionalVector coherent_state(cplx alpha, std::size_t n_max) {
  if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag())) {
    throw Error(ErrorKind::InvalidArgument, "coherent_state: non-finite amplitude");
  }
  MotionalVector v(n_max);
  const double r = std::abs(alpha);
  if (r == 0.0) {
    v.amp[0] = 1.0;
    return v;
  }
  // log|c_n| = -r^2/2 + n log r - log(n!)/2, phase n arg(alpha)
  const double log_r = std::log(r);
  const double theta = std::arg(alpha);
  for (std::size_t n = 0; n <= n_max; ++n) {
    const double dn = static_cast<double>(n);
    const double log_mag = -0.5 * r * r + dn * log_r - 0.5 * std::lgamma(dn + 1.0);
    v.amp[static_cast<Eigen::Index>(n)] = std::polar(std::exp(log_mag), dn * theta);
  }
  const double missing = 1.0 - v.amp.squaredNorm();
  if (missing > kTailTolerance) {
    std::ostringstream os;
    os << "coherent_state: truncation error " << missing << " for |alpha|=" << r
       << " at n_max=" << n_max << "; use n_max >= " << recommended_n_max(r);
    throw TruncationError(os.str());
  }
  return v;
}

MotionalOperator lowering_operator(std::size_t n_max) {
  MotionalOperator a;
  const auto dim = static_cast<Eigen::Index>(n_max + 1);
  a.entries = CMatrix::Zero(dim, dim);
  for (Eigen::Index n = 1; n < dim; ++n) {
    a.entries(n - 1, n) = std::sqrt(static_cast<double>(n));
  }
  return a;
}

MotionalOperator displacement_operator(cplx alpha, std::size_t n_max) {
  const auto dim = static_cast<Eigen::Index>(n_max + 1);
  MotionalOperator d;
  d.unitary = true;
  if (alpha == cplx{0.0, 0.0}) {
    d.entries = CMatrix::Identity(dim, dim);
    return d;
  }
  // K = i(alpha a^dag - alpha^* a) is Hermitian and D = exp(-iK).
  CMatrix k = CMatrix::Zero(dim, dim);
  const cplx i{0.0, 1.0};
  for (Eigen::Index n = 1; n < dim; ++n) {
    const double s = std::sqrt(static_cast<double>(n));
    k(n, n - 1) = i * alpha * s;
    k(n - 1, n) = -i * std::conj(alpha) * s;
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(k);
  const CVector phases =
      eig.eigenvalues().unaryExpr([](double l) { return std::polar(1.0, -l); });
  d.entries = eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();

  const auto keep = static_cast<Eigen::Index>(std::floor(0.9 * static_cast<double>(dim)));
  const CMatrix defect = (d.entries.adjoint() * d.entries - CMatrix::Identity(dim, dim))
                             .topLeftCorner(keep, keep);
  const double worst = defect.cwiseAbs().maxCoeff();
  if (worst > 1e-8) {
    std::ostringstream os;
    os << "displacement_operator: unitarity defect " << worst;
    throw NumericalError(ErrorKind::NormDrift, os.str());
  }
  return d;
}

namespace {

// J_0(x) .. J_kmax(x) by Miller's backward recurrence, normalized with
// J_0 + 2 sum J_2k = 1.
std::vector<double> bessel_j_sequence(int kmax, double x) {
  const int start = kmax + 40 + static_cast<int>(std::sqrt(40.0 * (kmax + 1)));
  std::vector<double> j(static_cast<std::size_t>(start) + 2, 0.0);
  j[static_cast<std::size_t>(start) + 1] = 0.0;
  j[static_cast<std::size_t>(start)] = 1e-300;
  for (int k = start; k >= 1; --k) {
    const auto uk = static_cast<std::size_t>(k);
    j[uk - 1] = (2.0 * k / x) * j[uk] - j[uk + 1];
    if (std::abs(j[uk - 1]) > 1e250) {
      for (std::size_t m = uk - 1; m < j.size(); ++m) j[m] *= 1e-250;
    }
  }
  double norm = j[0];
  for (std::size_t k = 2; k < j.size(); k += 2) norm += 2.0 * j[k];
  j.resize(static_cast<std::size_t>(kmax) + 1);
  for (double& v : j) v /= norm;
  return j;
}

}  // namespace

CVector apply_displacement(const CVector& v, cplx alpha) {
  const Eigen::Index dim = v.size();
  const double r = std::abs(alpha);
  if (r == 0.0 || dim <= 1) return v;

  const double n_top = static_cast<double>(dim - 1);
  const double rho = 2.0 * r * std::sqrt(n_top);
  std::vector<double> sq(static_cast<std::size_t>(dim));
  for (Eigen::Index n = 0; n < dim; ++n) sq[static_cast<std::size_t>(n)] = std::sqrt(static_cast<double>(n));

  // X = H / rho with H = i(alpha a^dag - alpha^* a); spectrum of X in [-1, 1].
  const cplx up = cplx{0.0, 1.0} * alpha / rho;
  const cplx down = -cplx{0.0, 1.0} * std::conj(alpha) / rho;
  auto apply_x = [&](const CVector& in, CVector& out) {
    for (Eigen::Index n = 0; n < dim; ++n) {
      cplx acc{0.0, 0.0};
      if (n > 0) acc += up * sq[static_cast<std::size_t>(n)] * in[n - 1];
      if (n + 1 < dim) acc += down * sq[static_cast<std::size_t>(n + 1)] * in[n + 1];
      out[n] = acc;
    }
  };

  const int kmax = static_cast<int>(std::ceil(rho + 10.0 * std::cbrt(rho) + 30.0));
  const std::vector<double> jk = bessel_j_sequence(kmax, rho);

  // exp(-i rho X) = J_0 + 2 sum_k (-i)^k J_k T_k(X)
  CVector t_prev = v;
  CVector t_cur(dim);
  apply_x(v, t_cur);
  CVector result = jk[0] * v + 2.0 * cplx{0.0, -1.0} * jk[1] * t_cur;
  CVector t_next(dim);
  cplx phase{0.0, -1.0};
  for (int k = 2; k <= kmax; ++k) {
    apply_x(t_cur, t_next);
    t_next = 2.0 * t_next - t_prev;
    phase *= cplx{0.0, -1.0};
    const double c = jk[static_cast<std::size_t>(k)];
    result += (2.0 * c) * phase * t_next;
    std::swap(t_prev, t_cur);
    std::swap(t_cur, t_next);
    if (k > rho && std::abs(c) < 1e-18) break;
  }
  return result;
}

MotionalVector apply_displacement(const MotionalVector& v, cplx alpha) {
  return MotionalVector(apply_displacement(v.amp, alpha));
}

cplx overlap(const MotionalVector& a, const MotionalVector& b) {
  if (a.amp.size() != b.amp.size()) throw DimensionError("overlap: n_max mismatch");
  return a.amp.dot(b.amp);  // conjugates the first argument
}

cplx overlap(const JointState& a, const JointState& b) {
  if (a.amp.rows() != b.amp.rows()) throw DimensionError("overlap: n_max mismatch");
  return a.amp.col(0).dot(b.amp.col(0)) + a.amp.col(1).dot(b.amp.col(1));
}

double number_expectation(const MotionalVector& s) {
  double sum = 0.0;
  for (Eigen::Index n = 0; n < s.amp.size(); ++n) sum += static_cast<double>(n) * std::norm(s.amp[n]);
  return sum;
}

double number_expectation(const JointState& s) {
  double sum = 0.0;
  for (Eigen::Index n = 0; n < s.amp.rows(); ++n) {
    sum += static_cast<double>(n) * (std::norm(s.amp(n, 0)) + std::norm(s.amp(n, 1)));
  }
  return sum;
}

double fidelity(const JointState& a, const JointState& b) { return std::norm(overlap(a, b)); }

double fidelity(const MotionalVector& a, const MotionalVector& b) { return std::norm(overlap(a, b)); }

QuadratureVariances quadrature_variances(const MotionalVector& v) {
  const double nrm = v.amp.norm();
  if (nrm == 0.0) throw Error(ErrorKind::InvalidArgument, "quadrature_variances: zero vector");
  const CVector psi = v.amp / nrm;
  const Eigen::Index dim = psi.size();
  CVector a_psi = CVector::Zero(dim);
  for (Eigen::Index n = 1; n < dim; ++n) a_psi[n - 1] = std::sqrt(static_cast<double>(n)) * psi[n];
  CVector aa_psi = CVector::Zero(dim);
  for (Eigen::Index n = 1; n < dim; ++n) aa_psi[n - 1] = std::sqrt(static_cast<double>(n)) * a_psi[n];

  const cplx mean_a = psi.dot(a_psi);
  const cplx mean_aa = psi.dot(aa_psi);
  const double mean_n = a_psi.squaredNorm();
  const double spread = mean_n - std::norm(mean_a);
  const double squeeze = std::abs(mean_aa - mean_a * mean_a);
  return {0.5 + spread - squeeze, 0.5 + spread + squeeze};
}

}  // namespace ionwalk
