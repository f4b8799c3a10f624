#include "sentcx/metrics.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <set>

#include "sentcx/errors.hpp"
#include "sentcx/linalg.hpp"

namespace sentcx {

double rmse(std::span<const double> pred, std::span<const double> gold) {
  if (pred.size() != gold.size()) {
    throw ValidationError("rmse: " + std::to_string(pred.size()) + " predictions for " + std::to_string(gold.size()) +
                          " gold values");
  }
  if (pred.empty()) throw ValidationError("rmse of an empty sequence");
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sq += (pred[i] - gold[i]) * (pred[i] - gold[i]);
  return std::sqrt(sq / static_cast<double>(pred.size()));
}

double fold_mean(std::span<const double> per_fold) {
  if (per_fold.empty()) throw ValidationError("fold_mean of an empty sequence");
  double s = 0.0;
  for (double v : per_fold) s += v;
  return s / static_cast<double>(per_fold.size());
}

MappingCoeffs fit_third_order_mapping(std::span<const double> pred, std::span<const double> gold) {
  if (pred.size() != gold.size() || pred.empty()) {
    throw ValidationError("mapping needs equal, non-empty prediction and gold sequences");
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!std::isfinite(pred[i]) || !std::isfinite(gold[i])) throw NumericError("mapping input is not finite");
  }
  const std::set<double> distinct(pred.begin(), pred.end());
  MappingCoeffs out;
  out.order = std::min<std::size_t>(3, distinct.size() - 1);
  out.degenerate = distinct.size() < 4;

  // Standardize p so the normal matrix stays well conditioned: t = (p - c) / s.
  const auto n = static_cast<double>(pred.size());
  double center = 0.0;
  for (double p : pred) center += p;
  center /= n;
  double scale = 0.0;
  for (double p : pred) scale = std::max(scale, std::abs(p - center));
  if (scale == 0.0) scale = 1.0;

  const auto k = static_cast<Eigen::Index>(out.order + 1);
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd row(k);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double t = (pred[i] - center) / scale;
    double pw = 1.0;
    for (Eigen::Index j = 0; j < k; ++j, pw *= t) row(j) = pw;
    normal.noalias() += row * row.transpose();
    rhs += gold[i] * row;
  }
  const Eigen::VectorXd c = solve_spd(std::move(normal), rhs).x;

  // Expand sum_j c_j ((p - center) / scale)^j into powers of p.
  std::array<double, 4> a{0.0, 0.0, 0.0, 0.0};
  std::array<double, 4> basis{1.0, 0.0, 0.0, 0.0};  // coefficients of t^j in p
  for (Eigen::Index j = 0; j < k; ++j) {
    for (std::size_t m = 0; m < 4; ++m) a[m] += c(j) * basis[m];
    // basis *= (p - center) / scale
    std::array<double, 4> next{0.0, 0.0, 0.0, 0.0};
    for (std::size_t m = 0; m < 4; ++m) {
      if (m + 1 < 4) next[m + 1] += basis[m] / scale;
      next[m] -= basis[m] * center / scale;
    }
    basis = next;
  }
  out.a = a;
  return out;
}

std::vector<double> apply_mapping(const MappingCoeffs& coeffs, std::span<const double> pred) {
  std::vector<double> out(pred.size());
  std::transform(pred.begin(), pred.end(), out.begin(), [&](double p) { return coeffs.apply(p); });
  return out;
}

MappedRmse mapped_rmse(std::span<const double> pred, std::span<const double> gold) {
  MappedRmse r;
  r.mapping = fit_third_order_mapping(pred, gold);
  const auto mapped = apply_mapping(r.mapping, pred);
  r.rmse = rmse(mapped, gold);
  return r;
}

}  // namespace sentcx
