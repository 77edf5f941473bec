#pragma once

#include <Eigen/Dense>

namespace ionwalk {

struct NnlsResult {
  Eigen::VectorXd x;
  double residual = 0.0;  // ||A x - b||_2
  int iterations = 0;
};

// Lawson-Hanson active-set solver for min ||A x - b|| subject to x >= 0.
// Throws NumericalError when the iteration limit is exhausted.
NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations = 0);

}  // namespace ionwalk
