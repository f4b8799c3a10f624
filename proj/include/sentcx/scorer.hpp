#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sentcx/featurize.hpp"

namespace sentcx {

inline constexpr double kScoreMin = 1.0;
inline constexpr double kScoreMax = 7.0;

inline double clamp_score(double v) { return v < kScoreMin ? kScoreMin : (v > kScoreMax ? kScoreMax : v); }

enum class Stage : std::uint8_t { baseline, pseudo_tuned, final };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);

// Linear complexity regressor over one feature configuration.
struct ScorerModel {
  std::vector<double> weights;
  double intercept = 0.0;
  std::uint64_t fingerprint = 0;
  std::uint64_t seed = 0;
  Stage stage = Stage::baseline;
  int archetype = 0;

  std::size_t dimension() const { return weights.size(); }

  std::string to_json() const;
  static ScorerModel from_json(std::string_view text);

  bool operator==(const ScorerModel&) const = default;
};

enum class Schedule : std::uint8_t { linear };

struct HyperParams {
  double learning_rate = 0.2;
  Schedule schedule = Schedule::linear;
  double warmup_fraction = 0.1;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 2;
  bool early_stopping = false;
  double early_stopping_holdout_fraction = 0.1;
  double ridge_lambda = 1.0;
  std::uint64_t seed = 0;

  // Throws ValidationError when a field is out of range.
  void validate() const;

  // Training on pseudo-labels: no early stopping, two epochs.
  static HyperParams pseudo_defaults();
  // Fine-tuning on the labeled set: smaller step, early stopping, at most
  // four epochs, stronger ridge penalty.
  static HyperParams fine_tune_defaults();
};

// Learning rate for 0-based `step` of `total_steps`: linear warmup over the
// first warmup_fraction of steps, then linear decay towards zero.
double scheduled_learning_rate(const HyperParams& hyper, std::size_t step, std::size_t total_steps);

// Closed-form ridge with an unpenalized intercept, solved on mean-centered
// data. Uses the equivalent N x N dual system when N < D and lambda > 0.
ScorerModel train_ridge(const FeatureMatrix& x, std::span<const double> y, double lambda);

// Called after every epoch with the current (not best-so-far) parameters.
using EpochObserver = std::function<void(std::size_t epoch, const ScorerModel& current, double holdout_rmse)>;

struct TrainResult {
  ScorerModel model;
  std::size_t epochs_run = 0;
  // 1-based epoch whose weights were returned; equals epochs_run without
  // early stopping.
  std::size_t best_epoch = 0;
  std::vector<double> holdout_rmse;
};

// Mini-batch gradient descent on
//   (1 / 2n) * sum_i (x_i . w + b - y_i)^2 + (lambda / 2n) * |w|^2
// with n the number of training rows. Without `init`, weights start at zero
// and the intercept at mean(y).
TrainResult train_iterative(const ScorerModel* init, const FeatureMatrix& x, std::span<const double> y,
                            const HyperParams& hyper, const EpochObserver& observer = {});

inline TrainResult train_iterative(const FeatureMatrix& x, std::span<const double> y, const HyperParams& hyper) {
  return train_iterative(nullptr, x, y, hyper);
}

// Unclamped x . w + b.
Eigen::VectorXd predict_raw(const ScorerModel& model, const FeatureMatrix& x);
// Clamped to [1, 7]. Throws ConfigMismatchError on fingerprint or dimension mismatch.
Eigen::VectorXd predict(const ScorerModel& model, const FeatureMatrix& x);

// Training objective above and its gradient; gradient is (d/dw..., d/db).
double objective(const ScorerModel& model, const FeatureMatrix& x, std::span<const double> y, double lambda);
Eigen::VectorXd objective_gradient(const ScorerModel& model, const FeatureMatrix& x, std::span<const double> y,
                                   double lambda);

// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-10),
// numeric by central differences with step `epsilon`.
double gradient_check(const FeatureMatrix& x, std::span<const double> y, const ScorerModel& model, double lambda,
                      double epsilon = 1e-6);

}  // namespace sentcx
