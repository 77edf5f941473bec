#include "ionwalk/nnls.hpp"

#include <limits>
#include <vector>

#include "ionwalk/error.hpp"

namespace ionwalk {

namespace {

Eigen::VectorXd solve_passive(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                              const std::vector<bool>& passive) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
  }
  Eigen::VectorXd z = Eigen::VectorXd::Zero(a.cols());
  if (idx.empty()) return z;
  Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
  const Eigen::VectorXd zs = sub.colPivHouseholderQr().solve(b);
  for (std::size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zs[static_cast<Eigen::Index>(k)];
  return z;
}

}  // namespace

NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations) {
  if (a.rows() != b.size()) throw DimensionError("nnls: rows of A must match size of b");
  const Eigen::Index n = a.cols();
  if (max_iterations <= 0) max_iterations = static_cast<int>(30 * n + 30);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() *
                     a.cwiseAbs().colwise().sum().maxCoeff() * static_cast<double>(std::max(a.rows(), n));

  NnlsResult result;
  int iter = 0;
  for (;;) {
    const Eigen::VectorXd w = a.transpose() * (b - a * x);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w[j] > best_w) {
        best_w = w[j];
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    for (;;) {
      if (++iter > max_iterations) {
        throw NumericalError(ErrorKind::IllConditioned, "nnls: iteration limit exhausted");
      }
      const Eigen::VectorXd z = solve_passive(a, b, passive);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) feasible = false;
      }
      if (feasible) {
        x = z;
        break;
      }
      double step = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) {
          step = std::min(step, x[j] / (x[j] - z[j]));
        }
      }
      x += step * (z - x);
      const double floor = 1e-15 * std::max(1.0, x.cwiseAbs().maxCoeff());
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x[j] <= floor) {
          passive[static_cast<std::size_t>(j)] = false;
          x[j] = 0.0;
        }
      }
    }
  }
  result.x = x;
  result.residual = (a * x - b).norm();
  result.iterations = iter;
  return result;
}

}  // namespace ionwalk
