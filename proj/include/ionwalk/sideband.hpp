#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace ionwalk {

// Generalized Laguerre polynomial L_n^{(1)}(x) by three-term recurrence.
double laguerre_l1(std::size_t n, double x);

// Blue-sideband coupling |n> -> |n+1> for carrier Rabi frequency omega:
//   omega e^{-eta^2/2} eta L_n^1(eta^2) / sqrt(n+1)   (signed)
double sideband_rabi_exact(std::size_t n, double eta, double omega);

// Lamb-Dicke form sqrt(n+1) eta omega.
double sideband_rabi_ld(std::size_t n, double eta, double omega);

struct RabiCurve {
  double eta = 0.0;
  double omega = 0.0;
  std::vector<double> exact;  // index n -> Omega_{n,n+1} (rad/s), n < n_max
  std::vector<double> ld;
  std::size_t peak_n = 0;     // argmax of exact
  std::optional<std::size_t> zero_n;  // first n with exact coupling <= 0
};

RabiCurve sideband_rabi_curve(double eta, double omega, std::size_t n_max);

}  // namespace ionwalk
