#pragma once

#include <Eigen/Core>

namespace sentcx {

inline constexpr double kJitter = 1e-10;
inline constexpr int kMaxJitterRetries = 3;

struct SpdSolution {
  Eigen::VectorXd x;
  // Number of jitter retries needed (0 when the first factorization worked).
  int jitter_retries = 0;
};

// Cholesky solve of a symmetric positive-definite system. On failure adds
// kJitter * I to the diagonal and retries, at most kMaxJitterRetries times,
// then throws NumericError.
SpdSolution solve_spd(Eigen::MatrixXd a, const Eigen::VectorXd& b);

// Ratio of extreme eigenvalues of a symmetric matrix; +inf if the smallest is
// not positive.
double condition_number_sym(const Eigen::MatrixXd& a);

}  // namespace sentcx
