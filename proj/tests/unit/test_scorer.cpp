#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sentcx/errors.hpp"
#include "sentcx/rng.hpp"
#include "sentcx/scorer.hpp"
#include "support/support.hpp"

using namespace sentcx;
using testsupport::Matrix;

namespace {

constexpr std::uint64_t kFp = 0xabcdef;

FeatureMatrix to_features(const Matrix& m) {
  FeatureMatrix f;
  f.fingerprint = kFp;
  f.values.resize(static_cast<Eigen::Index>(m.size()), m.empty() ? 0 : static_cast<Eigen::Index>(m[0].size()));
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m[i].size(); ++j) f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m[i][j];
  }
  return f;
}

Matrix random_matrix(Engine& rng, std::size_t n, std::size_t d, double scale = 1.0) {
  Matrix m(n, std::vector<double>(d));
  for (auto& row : m) {
    for (auto& v : row) v = scale * normal(rng);
  }
  return m;
}

// Noise-free targets of a random linear function, kept inside [1, 7].
std::vector<double> linear_targets(Engine& rng, const Matrix& x, double noise = 0.0) {
  std::vector<double> w(x[0].size());
  for (auto& v : w) v = 0.3 * normal(rng);
  std::vector<double> y;
  for (const auto& row : x) {
    double s = 4.0;
    for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * row[j];
    y.push_back(s + noise * normal(rng));
  }
  return y;
}

double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

void check_matches_oracle(const ScorerModel& m, const testsupport::RidgeOracle& o, double tol) {
  REQUIRE(m.weights.size() == o.w.size());
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < o.w.size(); ++j) {
    num += (m.weights[j] - o.w[j]) * (m.weights[j] - o.w[j]);
    den += o.w[j] * o.w[j];
  }
  CHECK(std::sqrt(num / std::max(den, 1e-300)) <= tol);
  CHECK(testsupport::rel_diff(m.intercept, o.b) <= tol);
}

}  // namespace

TEST_CASE("train_ridge: exact line") {
  const auto x = to_features({{1}, {2}, {3}});
  const std::vector<double> y = {2, 3, 4};
  const auto m = train_ridge(x, y, 0.0);
  CHECK(m.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.intercept == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.fingerprint == kFp);
  CHECK(m.stage == Stage::baseline);
}

TEST_CASE("train_ridge: infinite regularization limit") {
  Engine rng(1);
  const auto xm = random_matrix(rng, 30, 6);
  const auto y = linear_targets(rng, xm, 0.2);
  const auto m = train_ridge(to_features(xm), y, 1e12);
  for (double w : m.weights) CHECK(std::abs(w) < 1e-6);
  CHECK(m.intercept == doctest::Approx(testsupport::two_pass_mean(y)).epsilon(1e-6));
}

TEST_CASE("train_ridge matches the normal-equations oracle") {
  Engine rng(2);
  SUBCASE("50 x 8, lambda 0.1") {
    const auto xm = random_matrix(rng, 50, 8);
    const auto y = linear_targets(rng, xm, 0.3);
    check_matches_oracle(train_ridge(to_features(xm), y, 0.1), testsupport::ridge_oracle(xm, y, 0.1), 1e-8);
  }
  SUBCASE("random shapes and lambdas") {
    for (int t = 0; t < 20; ++t) {
      const std::size_t n = 5 + uniform_below(rng, 80);
      const std::size_t d = 1 + uniform_below(rng, 12);
      const double lambda = t % 4 == 0 ? 0.0 : std::pow(10.0, -3.0 + 5.0 * uniform01(rng));
      if (lambda == 0.0 && n <= d + 1) continue;
      const auto xm = random_matrix(rng, n, d);
      const auto y = linear_targets(rng, xm, 0.3);
      check_matches_oracle(train_ridge(to_features(xm), y, lambda), testsupport::ridge_oracle(xm, y, lambda), 1e-8);
    }
  }
  SUBCASE("dual path when N < D") {
    const auto xm = random_matrix(rng, 12, 40);
    const auto y = linear_targets(rng, xm, 0.3);
    check_matches_oracle(train_ridge(to_features(xm), y, 0.5), testsupport::ridge_oracle(xm, y, 0.5), 1e-8);
  }
}

TEST_CASE("train_ridge errors") {
  const auto x = to_features({{1}, {2}});
  CHECK_THROWS_AS(train_ridge(x, std::vector<double>{1.0}, 0.1), ValidationError);
  CHECK_THROWS_AS(train_ridge(x, std::vector<double>{1.0, NAN}, 0.1), NumericError);
  CHECK_THROWS_AS(train_ridge(x, std::vector<double>{1.0, 2.0}, -1.0), ValidationError);
  CHECK_THROWS_AS(train_ridge(to_features({}), std::vector<double>{}, 0.1), ValidationError);
  auto bad = to_features({{1}, {INFINITY}});
  CHECK_THROWS_AS(train_ridge(bad, std::vector<double>{1.0, 2.0}, 0.1), NumericError);
}

TEST_CASE("ridge solution beats random perturbations") {
  Engine rng(3);
  for (int inst = 0; inst < 5; ++inst) {
    const auto xm = random_matrix(rng, 40, 6);
    const auto y = linear_targets(rng, xm, 0.4);
    const auto x = to_features(xm);
    const double lambda = 0.5;
    const auto m = train_ridge(x, y, lambda);
    const double best = objective(m, x, y, lambda);
    for (int t = 0; t < 1000; ++t) {
      ScorerModel p = m;
      for (auto& w : p.weights) w += 1e-3 * (2.0 * uniform01(rng) - 1.0);
      p.intercept += 1e-3 * (2.0 * uniform01(rng) - 1.0);
      REQUIRE(best <= objective(p, x, y, lambda));
    }
  }
}

TEST_CASE("learning-rate schedule: warmup then linear decay") {
  HyperParams h;
  h.learning_rate = 1.0;
  h.warmup_fraction = 0.1;
  CHECK(scheduled_learning_rate(h, 0, 100) == doctest::Approx(0.1));
  CHECK(scheduled_learning_rate(h, 9, 100) == doctest::Approx(1.0));
  CHECK(scheduled_learning_rate(h, 10, 100) == doctest::Approx(1.0));
  CHECK(scheduled_learning_rate(h, 55, 100) == doctest::Approx(0.5));
  CHECK(scheduled_learning_rate(h, 99, 100) == doctest::Approx(1.0 / 90.0));
  h.warmup_fraction = 0.0;
  CHECK(scheduled_learning_rate(h, 0, 4) == doctest::Approx(1.0));
}

TEST_CASE("hyperparameter validation") {
  CHECK_NOTHROW(HyperParams::pseudo_defaults().validate());
  CHECK_NOTHROW(HyperParams::fine_tune_defaults().validate());
  CHECK(HyperParams::fine_tune_defaults().learning_rate < HyperParams::pseudo_defaults().learning_rate);
  HyperParams h;
  h.learning_rate = 0.0;
  CHECK_THROWS_AS(h.validate(), ValidationError);
  h = {};
  h.warmup_fraction = 1.0;
  CHECK_THROWS_AS(h.validate(), ValidationError);
  h = {};
  h.batch_size = 0;
  CHECK_THROWS_AS(h.validate(), ValidationError);
  h = {};
  h.early_stopping_holdout_fraction = 0.0;
  CHECK_THROWS_AS(h.validate(), ValidationError);
  h = {};
  h.ridge_lambda = -1.0;
  CHECK_THROWS_AS(h.validate(), ValidationError);
}

TEST_CASE("train_iterative: single point is fittable") {
  const auto x = to_features({{0.5, -0.25, 1.0}});
  const std::vector<double> y = {5.5};
  HyperParams h;
  h.max_epochs = 200;
  h.batch_size = 1;
  const auto m = train_iterative(x, y, h).model;
  CHECK(std::abs(predict(m, x)(0) - 5.5) <= 1e-3);
}

TEST_CASE("train_iterative converges to the ridge solution") {
  Engine rng(4);
  const auto xm = random_matrix(rng, 200, 10, 0.5);
  const auto y = linear_targets(rng, xm);
  const auto x = to_features(xm);
  HyperParams h;
  h.learning_rate = 1.0;
  h.batch_size = 200;
  h.max_epochs = 3000;
  h.ridge_lambda = 2.0;
  const auto iter = train_iterative(x, y, h).model;
  const auto ridge = train_ridge(x, y, h.ridge_lambda);
  CHECK(l2_distance(iter.weights, ridge.weights) < 1e-3);
  CHECK(std::abs(iter.intercept - ridge.intercept) < 1e-3);
}

TEST_CASE("train_iterative reaches low training error at default hyperparameters") {
  Engine rng(5);
  const auto xm = random_matrix(rng, 4000, 6, 1.0);
  const auto y = linear_targets(rng, xm);
  const auto x = to_features(xm);
  const auto m = train_iterative(x, y, HyperParams::pseudo_defaults()).model;
  const auto p = predict(m, x);
  double sq = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sq += (p(static_cast<Eigen::Index>(i)) - y[i]) * (p(static_cast<Eigen::Index>(i)) - y[i]);
  CHECK(std::sqrt(sq / static_cast<double>(y.size())) < 1e-2);
}

TEST_CASE("train_iterative is deterministic per seed") {
  Engine rng(6);
  const auto xm = random_matrix(rng, 120, 7);
  const auto y = linear_targets(rng, xm, 0.3);
  const auto x = to_features(xm);
  HyperParams h = HyperParams::fine_tune_defaults();
  h.seed = 77;
  std::vector<std::string> traj_a, traj_b;
  const auto a = train_iterative(nullptr, x, y, h, [&](std::size_t, const ScorerModel& m, double) {
    traj_a.push_back(m.to_json());
  });
  const auto b = train_iterative(nullptr, x, y, h, [&](std::size_t, const ScorerModel& m, double) {
    traj_b.push_back(m.to_json());
  });
  CHECK(a.model.to_json() == b.model.to_json());
  CHECK(traj_a == traj_b);
  CHECK(a.model.seed == 77);
  h.seed = 78;
  CHECK(train_iterative(x, y, h).model.to_json() != a.model.to_json());
}

TEST_CASE("train_iterative: warm start, early stopping and errors") {
  Engine rng(7);
  const auto xm = random_matrix(rng, 60, 4);
  const auto y = linear_targets(rng, xm, 0.5);
  const auto x = to_features(xm);

  HyperParams h = HyperParams::fine_tune_defaults();
  h.max_epochs = 10;
  const auto r = train_iterative(x, y, h);
  CHECK(r.best_epoch >= 1);
  CHECK(r.best_epoch <= r.epochs_run);
  CHECK(r.holdout_rmse.size() == r.epochs_run);
  for (std::size_t e = 0; e + 2 < r.holdout_rmse.size(); ++e) CHECK(r.holdout_rmse[e + 1] < r.holdout_rmse[e]);
  if (r.epochs_run < h.max_epochs) CHECK(r.holdout_rmse.back() >= r.holdout_rmse[r.best_epoch - 1]);

  ScorerModel init = train_ridge(x, y, 1.0);
  init.archetype = 2;
  init.stage = Stage::pseudo_tuned;
  const auto warm = train_iterative(&init, x, y, h).model;
  CHECK(warm.archetype == 2);
  ScorerModel wrong = init;
  wrong.fingerprint = 1;
  CHECK_THROWS_AS(train_iterative(&wrong, x, y, h), ConfigMismatchError);

  CHECK_THROWS_AS(train_iterative(to_features({}), std::vector<double>{}, h), ValidationError);
  HyperParams wild;
  wild.learning_rate = 1e200;
  wild.batch_size = 1;
  try {
    (void)train_iterative(x, y, wild);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("predict clamps and checks fingerprints") {
  ScorerModel m;
  m.weights = {0.0, 0.0};
  m.intercept = 3.0;
  m.fingerprint = kFp;
  const auto x = to_features({{1, 2}, {-3, 4}});
  CHECK(predict(m, x)(0) == 3.0);
  CHECK(predict(m, x)(1) == 3.0);
  m.intercept = 9.2;
  CHECK(predict(m, x)(0) == 7.0);
  CHECK(predict_raw(m, x)(0) == 9.2);
  m.intercept = -0.5;
  CHECK(predict(m, x)(0) == 1.0);

  Engine rng(8);
  ScorerModel r;
  r.weights = {50.0, -50.0};
  r.fingerprint = kFp;
  const auto big = to_features(random_matrix(rng, 500, 2));
  const auto p = predict(r, big);
  for (Eigen::Index i = 0; i < p.size(); ++i) CHECK((p(i) >= 1.0 && p(i) <= 7.0));

  ScorerModel other = m;
  other.fingerprint = 5;
  CHECK_THROWS_AS(predict(other, x), ConfigMismatchError);
  ScorerModel narrow = m;
  narrow.weights = {1.0};
  CHECK_THROWS_AS(predict(narrow, x), ConfigMismatchError);
}

TEST_CASE("gradient check") {
  Engine rng(9);
  const auto xm = random_matrix(rng, 10, 5);
  const auto y = linear_targets(rng, xm, 0.5);
  const auto x = to_features(xm);
  ScorerModel m;
  for (int j = 0; j < 5; ++j) m.weights.push_back(normal(rng));
  m.intercept = 2.0;
  m.fingerprint = kFp;
  CHECK(gradient_check(x, y, m, 0.7) <= 1e-5);
  CHECK(gradient_check(x, y, m, 0.7, 1e-1) <= 1e-2);

  const auto zero = to_features(Matrix(10, std::vector<double>(5, 0.0)));
  const auto g = objective_gradient(m, zero, y, 0.7);
  for (int j = 0; j < 5; ++j) CHECK(g(j) == doctest::Approx(0.7 * m.weights[static_cast<std::size_t>(j)] / 10.0).epsilon(1e-15));
  CHECK(gradient_check(zero, y, m, 0.7) <= 1e-6);
}

TEST_CASE("model JSON round-trip is bit-exact") {
  Engine rng(10);
  ScorerModel m;
  for (int j = 0; j < 300; ++j) m.weights.push_back(normal(rng) * std::pow(10.0, static_cast<double>(uniform_below(rng, 20)) - 10.0));
  m.weights.push_back(0.1 + 0.2);
  m.weights.push_back(-0.0);
  m.weights.push_back(5e-324);
  m.intercept = 1.0 / 3.0;
  m.fingerprint = 0xfedcba9876543210ULL;
  m.seed = 123456789;
  m.stage = Stage::final;
  m.archetype = 2;
  const auto back = ScorerModel::from_json(m.to_json());
  REQUIRE(back.weights.size() == m.weights.size());
  for (std::size_t j = 0; j < m.weights.size(); ++j) {
    CHECK(std::bit_cast<std::uint64_t>(back.weights[j]) == std::bit_cast<std::uint64_t>(m.weights[j]));
  }
  CHECK(back == m);
  CHECK(back.to_json() == m.to_json());
  CHECK_THROWS_AS(ScorerModel::from_json("{\"weights\": 3}"), ParseError);
  CHECK(parse_stage(to_string(Stage::pseudo_tuned)) == Stage::pseudo_tuned);
}
