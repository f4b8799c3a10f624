#include "sentcx/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <limits>

#include "sentcx/errors.hpp"

namespace sentcx {

SpdSolution solve_spd(Eigen::MatrixXd a, const Eigen::VectorXd& b) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw NumericError("solve_spd: shape mismatch");
  if (!a.allFinite() || !b.allFinite()) throw NumericError("solve_spd: non-finite input");
  for (int attempt = 0; attempt <= kMaxJitterRetries; ++attempt) {
    if (attempt > 0) a.diagonal().array() += kJitter;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) continue;
    Eigen::VectorXd x = llt.solve(b);
    if (x.allFinite()) return {std::move(x), attempt};
  }
  throw NumericError("matrix is not positive definite after " + std::to_string(kMaxJitterRetries) +
                     " jitter retries");
}

double condition_number_sym(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace sentcx
