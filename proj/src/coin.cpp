#include "ionwalk/coin.hpp"

#include <cmath>

namespace ionwalk {

CoinOperator rotation(double theta, double phi) {
  const double c = std::cos(theta / 2);
  const double s = std::sin(theta / 2);
  const cplx mi{0.0, -1.0};
  CoinOperator r;
  r.entries << c, mi * std::polar(1.0, -phi) * s,
               mi * std::polar(1.0, phi) * s, c;
  return r;
}

JointState apply_coin(const JointState& state, const CoinOperator& c) {
  JointState out(state.n_max());
  out.amp = state.amp * c.entries.transpose();
  return out;
}

}  // namespace ionwalk
