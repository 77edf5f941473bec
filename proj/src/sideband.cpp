#include "ionwalk/sideband.hpp"

#include <cmath>

#include "ionwalk/error.hpp"

namespace ionwalk {

double laguerre_l1(std::size_t n, double x) {
  double prev = 1.0;
  if (n == 0) return prev;
  double cur = 2.0 - x;
  for (std::size_t k = 1; k < n; ++k) {
    const double dk = static_cast<double>(k);
    const double next = ((2.0 * dk + 2.0 - x) * cur - (dk + 1.0) * prev) / (dk + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

double sideband_rabi_exact(std::size_t n, double eta, double omega) {
  const double x = eta * eta;
  return omega * std::exp(-0.5 * x) * eta * laguerre_l1(n, x) /
         std::sqrt(static_cast<double>(n) + 1.0);
}

double sideband_rabi_ld(std::size_t n, double eta, double omega) {
  return std::sqrt(static_cast<double>(n) + 1.0) * eta * omega;
}

RabiCurve sideband_rabi_curve(double eta, double omega, std::size_t n_max) {
  if (!(eta > 0.0)) throw PhysicsError("sideband_rabi_curve: eta must be positive");
  RabiCurve curve;
  curve.eta = eta;
  curve.omega = omega;
  curve.exact.reserve(n_max);
  curve.ld.reserve(n_max);
  for (std::size_t n = 0; n < n_max; ++n) {
    curve.exact.push_back(sideband_rabi_exact(n, eta, omega));
    curve.ld.push_back(sideband_rabi_ld(n, eta, omega));
  }
  for (std::size_t n = 0; n < curve.exact.size(); ++n) {
    if (curve.exact[n] > curve.exact[curve.peak_n]) curve.peak_n = n;
    if (!curve.zero_n && curve.exact[n] <= 0.0) curve.zero_n = n;
  }
  return curve;
}

}  // namespace ionwalk
