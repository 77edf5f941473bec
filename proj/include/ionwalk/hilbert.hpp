#pragma once

// Truncated Fock-space representation of a single motional mode, optionally
// tensored with a two-level coin. Coin index 0 is |H>, index 1 is |T>.

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace ionwalk {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

// Probability allowed in the top 10% of retained Fock levels.
inline constexpr double kTailTolerance = 1e-6;

enum class Coin : int { H = 0, T = 1 };

struct MotionalVector {
  CVector amp;

  MotionalVector() = default;
  explicit MotionalVector(std::size_t n_max) : amp(CVector::Zero(n_max + 1)) {}
  explicit MotionalVector(CVector a) : amp(std::move(a)) {}

  std::size_t n_max() const { return static_cast<std::size_t>(amp.size()) - 1; }
  double norm_squared() const { return amp.squaredNorm(); }

  static MotionalVector fock(std::size_t n, std::size_t n_max);
};

struct JointState {
  // Column 0 holds the |H> motional amplitudes, column 1 the |T> ones.
  Eigen::Matrix<cplx, Eigen::Dynamic, 2> amp;

  JointState() = default;
  explicit JointState(std::size_t n_max)
      : amp(Eigen::Matrix<cplx, Eigen::Dynamic, 2>::Zero(n_max + 1, 2)) {}

  std::size_t n_max() const { return static_cast<std::size_t>(amp.rows()) - 1; }
  double norm_squared() const { return amp.squaredNorm(); }

  MotionalVector branch(Coin c) const {
    return MotionalVector(CVector(amp.col(static_cast<int>(c))));
  }
  double coin_probability(Coin c) const {
    return amp.col(static_cast<int>(c)).squaredNorm();
  }

  static JointState product(Coin c, const MotionalVector& motion);
};

struct MotionalOperator {
  CMatrix entries;
  bool unitary = false;

  std::size_t n_max() const { return static_cast<std::size_t>(entries.rows()) - 1; }
  MotionalVector apply(const MotionalVector& v) const;
};

// Dense operator on coin (x) motion, index = coin * (n_max + 1) + n.
struct JointOperator {
  CMatrix entries;

  std::size_t n_max() const {
    return static_cast<std::size_t>(entries.rows()) / 2 - 1;
  }
  JointState apply(const JointState& s) const;
};

struct CoinOperator {
  Eigen::Matrix2cd entries;
};

// Truncation bookkeeping.
double tail_probability(const CVector& amp);
double tail_probability(const MotionalVector& v);
double tail_probability(const JointState& s);
std::size_t recommended_n_max(double abs_alpha);
void require_truncation(const JointState& s, const char* where);
void require_truncation(const MotionalVector& v, const char* where);

MotionalVector coherent_state(cplx alpha, std::size_t n_max);

// Dense D(alpha) = exp(alpha a^dag - alpha^* a) on the truncated space,
// built from a Hermitian eigendecomposition of the generator.
MotionalOperator displacement_operator(cplx alpha, std::size_t n_max);

// D(alpha)|v> without forming the dense matrix: Chebyshev expansion of the
// tridiagonal generator. Suitable for n_max in the tens of thousands.
CVector apply_displacement(const CVector& v, cplx alpha);
MotionalVector apply_displacement(const MotionalVector& v, cplx alpha);

MotionalOperator lowering_operator(std::size_t n_max);

cplx overlap(const MotionalVector& a, const MotionalVector& b);
cplx overlap(const JointState& a, const JointState& b);

double number_expectation(const MotionalVector& s);
double number_expectation(const JointState& s);

double fidelity(const JointState& a, const JointState& b);
double fidelity(const MotionalVector& a, const MotionalVector& b);

// Extremal variances of the rotated quadrature (a e^{-i t} + a^dag e^{i t})/sqrt2,
// evaluated on the normalized vector. Both equal 1/2 for a coherent state.
struct QuadratureVariances {
  double min_variance = 0.5;
  double max_variance = 0.5;
};
QuadratureVariances quadrature_variances(const MotionalVector& v);

}  // namespace ionwalk
