#include "sentcx/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>

#include "sentcx/errors.hpp"
#include "sentcx/linalg.hpp"
#include "sentcx/rng.hpp"

namespace sentcx {

using json = nlohmann::json;

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::baseline: return "baseline";
    case Stage::pseudo_tuned: return "pseudo_tuned";
    case Stage::final: return "final";
  }
  return "baseline";
}

Stage parse_stage(std::string_view name) {
  if (name == "baseline") return Stage::baseline;
  if (name == "pseudo_tuned") return Stage::pseudo_tuned;
  if (name == "final") return Stage::final;
  throw ParseError("unknown model stage '" + std::string(name) + "'");
}

std::string ScorerModel::to_json() const {
  const json doc = {
      {"fingerprint", fingerprint_hex(fingerprint)},
      {"archetype", archetype},
      {"seed", seed},
      {"stage", to_string(stage)},
      {"intercept", intercept},
      {"weights", weights},
  };
  return doc.dump() + "\n";
}

ScorerModel ScorerModel::from_json(std::string_view text) {
  ScorerModel m;
  try {
    const json doc = json::parse(text);
    m.fingerprint = parse_fingerprint_hex(doc.at("fingerprint").get<std::string>());
    m.archetype = doc.at("archetype").get<int>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.stage = parse_stage(doc.at("stage").get<std::string>());
    m.intercept = doc.at("intercept").get<double>();
    m.weights = doc.at("weights").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("scorer model: ") + e.what());
  }
  return m;
}

void HyperParams::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be > 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw ValidationError("warmup_fraction must be in [0, 1)");
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  if (max_epochs == 0) throw ValidationError("max_epochs must be positive");
  if (!(early_stopping_holdout_fraction > 0.0 && early_stopping_holdout_fraction < 1.0)) {
    throw ValidationError("early_stopping_holdout_fraction must be in (0, 1)");
  }
  if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) throw ValidationError("ridge_lambda must be >= 0");
}

HyperParams HyperParams::pseudo_defaults() { return HyperParams{}; }

HyperParams HyperParams::fine_tune_defaults() {
  HyperParams h;
  h.learning_rate = 0.02;
  h.max_epochs = 4;
  h.early_stopping = true;
  h.ridge_lambda = 10.0;
  return h;
}

double scheduled_learning_rate(const HyperParams& hyper, std::size_t step, std::size_t total_steps) {
  const auto warmup = static_cast<std::size_t>(std::floor(hyper.warmup_fraction * static_cast<double>(total_steps)));
  if (step < warmup) return hyper.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
  const double remaining = static_cast<double>(total_steps - std::min(step, total_steps));
  return hyper.learning_rate * remaining / static_cast<double>(total_steps - warmup);
}

namespace {

void check_inputs(const FeatureMatrix& x, std::span<const double> y) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw ValidationError("feature matrix has " + std::to_string(x.rows()) + " rows but " +
                          std::to_string(y.size()) + " targets");
  }
  if (!x.values.allFinite()) throw NumericError("non-finite feature value");
  for (double v : y) {
    if (!std::isfinite(v)) throw NumericError("non-finite target value");
  }
}

void check_model_matches(const ScorerModel& model, const FeatureMatrix& x) {
  if (model.fingerprint != x.fingerprint) {
    throw ConfigMismatchError("model expects features " + fingerprint_hex(model.fingerprint) + ", got " +
                              fingerprint_hex(x.fingerprint));
  }
  if (static_cast<Eigen::Index>(model.weights.size()) != x.cols()) {
    throw ConfigMismatchError("model has " + std::to_string(model.weights.size()) + " weights, features have " +
                              std::to_string(x.cols()) + " columns");
  }
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

ScorerModel train_ridge(const FeatureMatrix& x, std::span<const double> y, double lambda) {
  if (y.empty()) throw ValidationError("ridge regression needs at least one sample");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be finite and >= 0");
  check_inputs(x, y);

  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::RowVectorXd x_mean = x.values.colwise().mean();
  const double y_mean = as_vector(y).mean();
  const Eigen::MatrixXd xc = x.values.rowwise() - x_mean;
  const Eigen::VectorXd yc = as_vector(y).array() - y_mean;

  Eigen::VectorXd w;
  if (n < d && lambda > 0.0) {
    // (Xc'Xc + lI)^-1 Xc' = Xc' (Xc Xc' + lI)^-1
    Eigen::MatrixXd gram = xc * xc.transpose();
    gram.diagonal().array() += lambda;
    w = xc.transpose() * solve_spd(std::move(gram), yc).x;
  } else {
    Eigen::MatrixXd normal = xc.transpose() * xc;
    normal.diagonal().array() += lambda;
    w = solve_spd(std::move(normal), xc.transpose() * yc).x;
  }
  if (!w.allFinite()) throw NumericError("ridge solution is not finite");

  ScorerModel model;
  model.weights.assign(w.data(), w.data() + w.size());
  model.intercept = y_mean - x_mean.dot(w);
  model.fingerprint = x.fingerprint;
  model.stage = Stage::baseline;
  return model;
}

Eigen::VectorXd predict_raw(const ScorerModel& model, const FeatureMatrix& x) {
  check_model_matches(model, x);
  const Eigen::Map<const Eigen::VectorXd> w(model.weights.data(), static_cast<Eigen::Index>(model.weights.size()));
  return (x.values * w).array() + model.intercept;
}

Eigen::VectorXd predict(const ScorerModel& model, const FeatureMatrix& x) {
  return predict_raw(model, x).unaryExpr([](double v) { return clamp_score(v); });
}

double objective(const ScorerModel& model, const FeatureMatrix& x, std::span<const double> y, double lambda) {
  const auto n = static_cast<double>(y.size());
  const Eigen::VectorXd r = predict_raw(model, x) - as_vector(y);
  const Eigen::Map<const Eigen::VectorXd> w(model.weights.data(), static_cast<Eigen::Index>(model.weights.size()));
  return 0.5 * r.squaredNorm() / n + 0.5 * lambda * w.squaredNorm() / n;
}

Eigen::VectorXd objective_gradient(const ScorerModel& model, const FeatureMatrix& x, std::span<const double> y,
                                   double lambda) {
  const auto n = static_cast<double>(y.size());
  const Eigen::VectorXd r = predict_raw(model, x) - as_vector(y);
  const Eigen::Map<const Eigen::VectorXd> w(model.weights.data(), static_cast<Eigen::Index>(model.weights.size()));
  Eigen::VectorXd g(w.size() + 1);
  g.head(w.size()) = x.values.transpose() * r / n + lambda * w / n;
  g(w.size()) = r.sum() / n;
  return g;
}

double gradient_check(const FeatureMatrix& x, std::span<const double> y, const ScorerModel& model, double lambda,
                      double epsilon) {
  const Eigen::VectorXd analytic = objective_gradient(model, x, y, lambda);
  ScorerModel probe = model;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < analytic.size(); ++j) {
    double& param = j < static_cast<Eigen::Index>(probe.weights.size()) ? probe.weights[static_cast<std::size_t>(j)]
                                                                         : probe.intercept;
    const double saved = param;
    param = saved + epsilon;
    const double up = objective(probe, x, y, lambda);
    param = saved - epsilon;
    const double down = objective(probe, x, y, lambda);
    param = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic(j)), std::abs(numeric), 1e-10});
    worst = std::max(worst, std::abs(analytic(j) - numeric) / denom);
  }
  return worst;
}

TrainResult train_iterative(const ScorerModel* init, const FeatureMatrix& x, std::span<const double> y,
                            const HyperParams& hyper, const EpochObserver& observer) {
  hyper.validate();
  if (y.empty()) throw ValidationError("empty training set");
  check_inputs(x, y);
  const std::size_t n = y.size();
  const Eigen::Index d = x.cols();

  TrainResult result;
  ScorerModel& model = result.model;
  if (init) {
    check_model_matches(*init, x);
    model = *init;
  } else {
    model.weights.assign(static_cast<std::size_t>(d), 0.0);
    model.intercept = as_vector(y).mean();
    model.fingerprint = x.fingerprint;
  }
  model.seed = hyper.seed;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t holdout_n = 0;
  if (hyper.early_stopping) {
    Engine split_rng(derive_seed(hyper.seed, 1));
    shuffle(split_rng, std::span<std::size_t>(order));
    holdout_n = static_cast<std::size_t>(std::floor(hyper.early_stopping_holdout_fraction * static_cast<double>(n)));
    if (holdout_n == 0 || holdout_n >= n) holdout_n = 0;
  }
  std::vector<std::size_t> train_rows(order.begin(), order.end() - static_cast<std::ptrdiff_t>(holdout_n));
  const std::vector<std::size_t> holdout_rows(order.end() - static_cast<std::ptrdiff_t>(holdout_n), order.end());
  const std::size_t n_train = train_rows.size();

  const std::size_t steps_per_epoch = (n_train + hyper.batch_size - 1) / hyper.batch_size;
  const std::size_t total_steps = steps_per_epoch * hyper.max_epochs;
  const double decay = hyper.ridge_lambda / static_cast<double>(n_train);

  Eigen::Map<Eigen::VectorXd> w(model.weights.data(), d);
  Eigen::VectorXd grad(d);
  Engine rng(derive_seed(hyper.seed, 2));

  auto holdout_rmse = [&]() {
    double sq = 0.0;
    for (std::size_t r : holdout_rows) {
      const double p = clamp_score(x.values.row(static_cast<Eigen::Index>(r)).dot(w) + model.intercept);
      sq += (p - y[r]) * (p - y[r]);
    }
    return std::sqrt(sq / static_cast<double>(holdout_rows.size()));
  };

  ScorerModel best = model;
  double best_rmse = std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    shuffle(rng, std::span<std::size_t>(train_rows));
    for (std::size_t start = 0; start < n_train; start += hyper.batch_size, ++step) {
      const std::size_t end = std::min(start + hyper.batch_size, n_train);
      const auto b = static_cast<double>(end - start);
      grad.setZero();
      double grad_b = 0.0;
      double loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto row = x.values.row(static_cast<Eigen::Index>(train_rows[k]));
        const double r = row.dot(w) + model.intercept - y[train_rows[k]];
        loss += r * r;
        grad.noalias() += r * row.transpose();
        grad_b += r;
      }
      loss = 0.5 * loss / b + 0.5 * decay * w.squaredNorm();
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at step " + std::to_string(step) + " (epoch " + std::to_string(epoch) +
                           ")");
      }
      const double lr = scheduled_learning_rate(hyper, step, total_steps);
      w -= lr * (grad / b + decay * w);
      model.intercept -= lr * grad_b / b;
    }
    result.epochs_run = epoch;
    const double h = holdout_n > 0 ? holdout_rmse() : std::numeric_limits<double>::quiet_NaN();
    if (observer) observer(epoch, model, h);
    if (holdout_n == 0) continue;
    result.holdout_rmse.push_back(h);
    if (h < best_rmse) {
      best_rmse = h;
      best = model;
      result.best_epoch = epoch;
    } else {
      break;  // patience of one epoch
    }
  }
  if (holdout_n > 0) {
    result.model = std::move(best);
  } else {
    result.best_epoch = result.epochs_run;
  }
  return result;
}

}  // namespace sentcx
