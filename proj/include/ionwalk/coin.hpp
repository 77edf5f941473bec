#pragma once

#include <numbers>

#include "ionwalk/hilbert.hpp"

namespace ionwalk {

// Bloch-sphere rotation in the (H, T) basis:
//   [[cos(t/2), -i e^{-i p} sin(t/2)], [-i e^{+i p} sin(t/2), cos(t/2)]]
CoinOperator rotation(double theta, double phi);

// The coin toss used by every walk protocol, R(pi/2, -pi/2).
inline CoinOperator coin_toss() { return rotation(std::numbers::pi / 2, -std::numbers::pi / 2); }

// Population exchange |H> <-> |T>, R(pi, 0).
inline CoinOperator pi_pulse() { return rotation(std::numbers::pi, 0.0); }

// (C (x) 1_motion)|state>. Global phases are kept.
JointState apply_coin(const JointState& state, const CoinOperator& c);

}  // namespace ionwalk
