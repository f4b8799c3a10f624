#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sentcx {

// sqrt(mean((pred - gold)^2)). Throws ValidationError on empty or unequal input.
double rmse(std::span<const double> pred, std::span<const double> gold);

// Arithmetic mean of per-fold values.
double fold_mean(std::span<const double> per_fold);

// mapped = a[0] + a[1] p + a[2] p^2 + a[3] p^3
struct MappingCoeffs {
  std::array<double, 4> a{0.0, 1.0, 0.0, 0.0};
  // Set when fewer than four distinct predictions forced a lower order.
  bool degenerate = false;
  std::size_t order = 3;

  double apply(double p) const { return ((a[3] * p + a[2]) * p + a[1]) * p + a[0]; }
  bool operator==(const MappingCoeffs&) const = default;
};

// Least-squares fit of gold on [1, p, p^2, p^3]; order drops to
// (distinct predictions - 1) below four distinct values. Solved through the
// normal equations of the standardized predictions.
MappingCoeffs fit_third_order_mapping(std::span<const double> pred, std::span<const double> gold);

std::vector<double> apply_mapping(const MappingCoeffs& coeffs, std::span<const double> pred);

struct MappedRmse {
  double rmse = 0.0;
  MappingCoeffs mapping;
};

// Fits the mapping on (pred, gold) and scores the mapped predictions.
MappedRmse mapped_rmse(std::span<const double> pred, std::span<const double> gold);

}  // namespace sentcx
