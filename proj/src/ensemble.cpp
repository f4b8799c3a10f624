#include "sentcx/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <numeric>

#include "sentcx/errors.hpp"
#include "sentcx/io.hpp"
#include "sentcx/linalg.hpp"
#include "sentcx/parallel.hpp"
#include "sentcx/rng.hpp"

namespace sentcx {

using json = nlohmann::json;

std::vector<Archetype> default_archetypes() {
  std::vector<Archetype> out(3);
  out[0].id = 0;
  out[1].id = 1;
  out[1].features.hashed_dim = 1024;
  out[1].features.ngram_min = 2;
  out[1].features.ngram_max = 4;
  out[2].id = 2;
  out[2].features.hashed_dim = 4096;
  out[2].features.ngram_min = 3;
  out[2].features.ngram_max = 6;
  out[2].batch_size = 20;
  return out;
}

void check_archetype_ids(std::span<const Archetype> archetypes) {
  for (std::size_t i = 0; i < archetypes.size(); ++i) {
    if (archetypes[i].id != static_cast<int>(i)) {
      throw ValidationError("archetype at position " + std::to_string(i) + " has id " +
                            std::to_string(archetypes[i].id));
    }
    archetypes[i].features.validate();
    if (archetypes[i].batch_size == 0) throw ValidationError("archetype batch_size must be positive");
  }
}

std::vector<std::size_t> FoldPlan::rows_in(std::size_t fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == fold) rows.push_back(i);
  }
  return rows;
}

std::vector<std::size_t> FoldPlan::rows_out(std::size_t fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] != fold) rows.push_back(i);
  }
  return rows;
}

FoldPlan make_fold_plan(std::size_t n, std::size_t n_folds, std::uint64_t seed) {
  if (n_folds == 0) throw ValidationError("n_folds must be positive");
  if (n < n_folds) {
    throw ValidationError("cannot split " + std::to_string(n) + " sentences into " + std::to_string(n_folds) +
                          " folds");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Engine rng(derive_seed(seed, 0xF01D));
  shuffle(rng, std::span<std::size_t>(perm));
  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.seed = seed;
  plan.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) plan.assignment[perm[i]] = i % n_folds;
  return plan;
}

std::string_view to_string(StackerColumns c) { return c == StackerColumns::per_fold ? "per_fold" : "per_model"; }

StackerColumns parse_stacker_columns(std::string_view name) {
  if (name == "per_model") return StackerColumns::per_model;
  if (name == "per_fold") return StackerColumns::per_fold;
  throw ValidationError("unknown stacker column construction '" + std::string(name) +
                        "' (expected per_model or per_fold)");
}

std::string OofColumn::name() const {
  std::string s = fmt::format("a{}_s{}", archetype, seed);
  if (fold) s += fmt::format("_f{}", *fold);
  return s;
}

std::string OofMatrix::to_csv(std::span<const LabeledSentence> labeled) const {
  std::string out = "id,mos";
  for (const auto& c : columns) out += "," + c.name();
  out += '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    const auto& s = labeled[static_cast<std::size_t>(i)];
    out += fmt::format("{},{:.17g}", s.id, s.mos);
    for (Eigen::Index j = 0; j < values.cols(); ++j) out += fmt::format(",{:.17g}", values(i, j));
    out += '\n';
  }
  return out;
}

namespace {

const FeatureStats& stats_for(const ScorerModel& model, std::span<const FeatureStats> feature_stats) {
  if (model.archetype < 0 || static_cast<std::size_t>(model.archetype) >= feature_stats.size()) {
    throw ValidationError("model archetype " + std::to_string(model.archetype) + " has no feature stats");
  }
  const FeatureStats& stats = feature_stats[static_cast<std::size_t>(model.archetype)];
  if (stats.fingerprint != model.fingerprint) {
    throw ConfigMismatchError("model fingerprint " + fingerprint_hex(model.fingerprint) +
                              " does not match archetype " + std::to_string(model.archetype) + " features " +
                              fingerprint_hex(stats.fingerprint));
  }
  return stats;
}

// Embeds `texts` once per archetype referenced by `models`.
std::vector<FeatureMatrix> embed_for_models(std::span<const ScorerModel> models,
                                            std::span<const FeatureStats> feature_stats,
                                            std::span<const std::string> texts, std::size_t workers) {
  std::vector<FeatureMatrix> out(feature_stats.size());
  std::vector<bool> needed(feature_stats.size(), false);
  for (const auto& m : models) {
    stats_for(m, feature_stats);
    needed[static_cast<std::size_t>(m.archetype)] = true;
  }
  for (std::size_t a = 0; a < feature_stats.size(); ++a) {
    if (needed[a]) out[a] = embed_batch(texts, feature_stats[a], workers);
  }
  return out;
}

FeatureMatrix select_rows(const FeatureMatrix& x, const std::vector<std::size_t>& rows) {
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  return FeatureMatrix{x.fingerprint, x.values(idx, Eigen::all)};
}

}  // namespace

std::vector<ScorerModel> train_pseudo_stage(const PseudoLabelSet& pseudo, std::span<const Archetype> archetypes,
                                            std::span<const FeatureStats> feature_stats,
                                            std::span<const std::uint64_t> seeds, const HyperParams& hyper,
                                            std::size_t workers) {
  if (pseudo.labels.empty()) throw ValidationError("no pseudo-labels to train on");
  if (seeds.empty()) throw ValidationError("at least one seed is required");
  check_archetype_ids(archetypes);
  if (feature_stats.size() != archetypes.size()) {
    throw ValidationError("need feature stats for each of the " + std::to_string(archetypes.size()) + " archetypes");
  }
  std::vector<std::string> texts;
  std::vector<double> targets;
  texts.reserve(pseudo.labels.size());
  for (const auto& l : pseudo.labels) {
    texts.push_back(l.text);
    targets.push_back(l.predicted_score);
  }
  std::vector<FeatureMatrix> features(archetypes.size());
  for (std::size_t a = 0; a < archetypes.size(); ++a) {
    if (feature_stats[a].config != archetypes[a].features) {
      throw ConfigMismatchError("feature stats for archetype " + std::to_string(a) + " were fit with another config");
    }
    features[a] = embed_batch(texts, feature_stats[a], workers);
  }

  std::vector<ScorerModel> models(archetypes.size() * seeds.size());
  parallel_for(models.size(), workers, [&](std::size_t job) {
    const std::size_t a = job / seeds.size();
    const std::uint64_t seed = seeds[job % seeds.size()];
    HyperParams h = hyper;
    h.seed = derive_seed(seed, a);
    h.batch_size = archetypes[a].batch_size;
    ScorerModel m = train_iterative(nullptr, features[a], targets, h).model;
    m.seed = seed;
    m.archetype = archetypes[a].id;
    m.stage = Stage::pseudo_tuned;
    models[job] = std::move(m);
  });
  return models;
}

CvFineTuneResult cv_fine_tune(std::span<const ScorerModel> base_models, std::span<const Archetype> archetypes,
                              std::span<const FeatureStats> feature_stats, std::span<const LabeledSentence> labeled,
                              const FoldPlan& plan, const HyperParams& hyper, StackerColumns columns,
                              std::size_t workers) {
  if (base_models.empty()) throw ValidationError("no base models to fine-tune");
  if (plan.size() != labeled.size()) {
    throw ValidationError("fold plan covers " + std::to_string(plan.size()) + " sentences, labeled set has " +
                          std::to_string(labeled.size()));
  }
  check_archetype_ids(archetypes);

  std::vector<std::string> texts;
  std::vector<double> mos;
  for (const auto& s : labeled) {
    texts.push_back(s.text);
    mos.push_back(s.mos);
  }
  const auto features = embed_for_models(base_models, feature_stats, texts, workers);

  const std::size_t n = labeled.size();
  const std::size_t folds = plan.n_folds;
  const std::size_t jobs = base_models.size() * folds;
  CvFineTuneResult out;
  out.models.resize(jobs);
  out.training_rows.resize(jobs);
  out.base_of.resize(jobs);
  out.fold_of.resize(jobs);
  std::vector<Eigen::VectorXd> predictions(jobs);

  parallel_for(jobs, workers, [&](std::size_t job) {
    const std::size_t b = job / folds;
    const std::size_t f = job % folds;
    const ScorerModel& base = base_models[b];
    const auto a = static_cast<std::size_t>(base.archetype);
    if (a >= archetypes.size()) throw ValidationError("base model refers to unknown archetype");
    std::vector<std::size_t> rows = plan.rows_out(f);
    std::vector<double> y;
    y.reserve(rows.size());
    for (std::size_t r : rows) y.push_back(mos[r]);

    HyperParams h = hyper;
    h.seed = derive_seed(base.seed, a, f + 1);
    h.batch_size = archetypes[a].batch_size;
    ScorerModel m = train_iterative(&base, select_rows(features[a], rows), y, h).model;
    m.seed = base.seed;
    m.archetype = base.archetype;
    m.stage = Stage::final;
    predictions[job] = predict(m, features[a]);
    out.models[job] = std::move(m);
    out.training_rows[job] = std::move(rows);
    out.base_of[job] = b;
    out.fold_of[job] = f;
  });

  // Single-writer assembly of the OOF matrix.
  OofMatrix& oof = out.oof;
  oof.construction = columns;
  const auto rows = static_cast<Eigen::Index>(n);
  if (columns == StackerColumns::per_model) {
    const auto m = static_cast<Eigen::Index>(base_models.size());
    oof.values.resize(rows, m);
    oof.producer.resize(rows, m);
    for (std::size_t b = 0; b < base_models.size(); ++b) {
      oof.columns.push_back({base_models[b].archetype, base_models[b].seed, std::nullopt});
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t job = b * folds + plan.assignment[i];
        const auto ii = static_cast<Eigen::Index>(i), bb = static_cast<Eigen::Index>(b);
        oof.values(ii, bb) = predictions[job](ii);
        oof.producer(ii, bb) = static_cast<int>(job);
      }
    }
  } else {
    const auto m = static_cast<Eigen::Index>(jobs);
    oof.values.resize(rows, m);
    oof.producer.resize(rows, m);
    for (std::size_t job = 0; job < jobs; ++job) {
      const ScorerModel& base = base_models[out.base_of[job]];
      oof.columns.push_back({base.archetype, base.seed, out.fold_of[job]});
      const auto jj = static_cast<Eigen::Index>(job);
      oof.values.col(jj) = predictions[job];
      oof.producer.col(jj).setConstant(static_cast<int>(job));
    }
  }
  return out;
}

OofAudit audit_oof(const CvFineTuneResult& result, const FoldPlan& plan) {
  OofAudit audit;
  const OofMatrix& oof = result.oof;
  auto fail = [&](std::string msg) {
    if (audit.ok) audit.first_violation = std::move(msg);
    audit.ok = false;
  };
  if (static_cast<std::size_t>(oof.values.rows()) != plan.size()) {
    fail("OOF matrix rows do not match the fold plan");
    return audit;
  }
  std::vector<std::vector<bool>> trained_on(result.models.size(), std::vector<bool>(plan.size(), false));
  for (std::size_t j = 0; j < result.models.size(); ++j) {
    for (std::size_t r : result.training_rows[j]) trained_on[j][r] = true;
  }
  for (Eigen::Index i = 0; i < oof.values.rows(); ++i) {
    const auto row = static_cast<std::size_t>(i);
    for (Eigen::Index c = 0; c < oof.values.cols(); ++c) {
      const double v = oof.values(i, c);
      if (!std::isfinite(v) || v < kScoreMin || v > kScoreMax) {
        fail(fmt::format("entry ({}, {}) = {} is missing or off-scale", i, c, v));
      }
      const auto job = static_cast<std::size_t>(oof.producer(i, c));
      if (job >= result.models.size()) {
        fail(fmt::format("entry ({}, {}) has no producing model", i, c));
        continue;
      }
      const bool declared_oof = oof.construction == StackerColumns::per_model || result.fold_of[job] == plan.assignment[row];
      if (!declared_oof) {
        ++audit.in_fold_entries;
        continue;
      }
      ++audit.entries_checked;
      if (result.fold_of[job] != plan.assignment[row] || trained_on[job][row]) {
        fail(fmt::format("entry ({}, {}) was produced by a model fine-tuned on row {}", i, c, i));
      }
    }
  }
  return audit;
}

double aggregate_mean(std::span<const double> row) {
  if (row.empty()) throw ValidationError("cannot aggregate an empty prediction row");
  double sum = 0.0;
  for (double v : row) sum += v;
  return clamp_score(sum / static_cast<double>(row.size()));
}

StackerFit fit_stacker(const Eigen::MatrixXd& oof, std::span<const double> y) {
  if (static_cast<std::size_t>(oof.rows()) != y.size() || y.empty()) {
    throw ValidationError("stacker needs one target per OOF row");
  }
  if (!oof.allFinite()) throw NumericError("non-finite OOF prediction");
  const Eigen::Map<const Eigen::VectorXd> target(y.data(), static_cast<Eigen::Index>(y.size()));
  if (!target.allFinite()) throw NumericError("non-finite stacker target");

  const Eigen::RowVectorXd x_mean = oof.colwise().mean();
  const double y_mean = target.mean();
  const Eigen::MatrixXd xc = oof.rowwise() - x_mean;
  const Eigen::VectorXd yc = target.array() - y_mean;
  Eigen::MatrixXd normal = xc.transpose() * xc;

  StackerFit fit;
  fit.condition = condition_number_sym(normal);
  if (!(fit.condition <= kStackerConditionLimit)) {
    fit.ridge_fallback = true;
    normal.diagonal().array() += kStackerFallbackLambda;
  }
  const Eigen::VectorXd w = solve_spd(std::move(normal), xc.transpose() * yc).x;
  fit.weights.assign(w.data(), w.data() + w.size());
  fit.intercept = y_mean - x_mean.dot(w);
  return fit;
}

double apply_stacker(const StackerFit& fit, std::span<const double> row) {
  if (row.size() != fit.weights.size()) {
    throw ValidationError("stacker expects " + std::to_string(fit.weights.size()) + " inputs, got " +
                          std::to_string(row.size()));
  }
  double v = fit.intercept;
  for (std::size_t j = 0; j < row.size(); ++j) v += fit.weights[j] * row[j];
  return clamp_score(v);
}

void EnsembleBundle::validate() const {
  check_archetype_ids(archetypes);
  if (feature_stats.size() != archetypes.size()) throw ValidationError("bundle needs feature stats per archetype");
  for (std::size_t a = 0; a < archetypes.size(); ++a) {
    if (feature_stats[a].config != archetypes[a].features) {
      throw ConfigMismatchError("bundle feature stats for archetype " + std::to_string(a) + " disagree with its config");
    }
  }
  const std::size_t expected_base = archetypes.size() * seeds.size();
  if (base_models.size() != expected_base) {
    throw ValidationError("bundle holds " + std::to_string(base_models.size()) + " base models, expected " +
                          std::to_string(expected_base));
  }
  if (models.size() != expected_base * plan.n_folds) {
    throw ValidationError("bundle holds " + std::to_string(models.size()) + " models, expected " +
                          std::to_string(expected_base * plan.n_folds));
  }
  for (const auto& m : models) stats_for(m, feature_stats);
  for (const auto& m : base_models) stats_for(m, feature_stats);
  if (aggregation.mode == AggregationMode::stacker) {
    const std::size_t inputs =
        aggregation.columns == StackerColumns::per_model ? base_models.size() : models.size();
    if (aggregation.stacker.weights.size() != inputs) {
      throw ValidationError("stacker has " + std::to_string(aggregation.stacker.weights.size()) +
                            " weights for " + std::to_string(inputs) + " inputs");
    }
  }
}

namespace {

std::string model_file(const ScorerModel& m, std::optional<std::size_t> fold) {
  std::string name = fmt::format("a{}_s{}", m.archetype, m.seed);
  if (fold) name += fmt::format("_f{}", *fold);
  return name + ".json";
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void EnsembleBundle::save(const fs::path& dir, const OofMatrix* oof, std::span<const LabeledSentence> labeled) const {
  validate();
  fs::path tmp = dir;
  tmp += ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  json arch = json::array();
  for (std::size_t a = 0; a < archetypes.size(); ++a) {
    const std::string file = fmt::format("features/archetype_{}.json", a);
    io::write_file_atomic(tmp / file, feature_stats[a].to_json());
    arch.push_back({{"id", archetypes[a].id},
                    {"batch_size", archetypes[a].batch_size},
                    {"fingerprint", fingerprint_hex(feature_stats[a].fingerprint)},
                    {"features", file}});
  }
  json base_files = json::array();
  for (const auto& m : base_models) {
    const std::string file = "base/" + model_file(m, std::nullopt);
    io::write_file_atomic(tmp / file, m.to_json());
    base_files.push_back(file);
  }
  json model_files = json::array();
  for (std::size_t j = 0; j < models.size(); ++j) {
    const std::string file = "models/" + model_file(models[j], j % plan.n_folds);
    io::write_file_atomic(tmp / file, models[j].to_json());
    model_files.push_back(file);
  }
  const json manifest = {
      {"archetypes", arch},
      {"seeds", seeds},
      {"plan", {{"n_folds", plan.n_folds}, {"seed", plan.seed}, {"assignment", plan.assignment}}},
      {"aggregation",
       {{"mode", aggregation.mode == AggregationMode::stacker ? "stacker" : "mean"},
        {"columns", to_string(aggregation.columns)},
        {"weights", aggregation.stacker.weights},
        {"intercept", aggregation.stacker.intercept},
        {"ridge_fallback", aggregation.stacker.ridge_fallback},
        {"condition", nullable(aggregation.stacker.condition)}}},
      {"base_models", base_files},
      {"models", model_files},
  };
  io::write_file_atomic(tmp / "manifest.json", manifest.dump(2) + "\n");
  if (oof) io::write_file_atomic(tmp / "oof.csv", oof->to_csv(labeled));

  fs::path old = dir;
  old += ".old";
  fs::remove_all(old);
  if (fs::exists(dir)) fs::rename(dir, old);
  fs::rename(tmp, dir);
  fs::remove_all(old);
}

EnsembleBundle EnsembleBundle::load(const fs::path& dir) {
  EnsembleBundle b;
  try {
    const json manifest = json::parse(io::read_file(dir / "manifest.json"));
    for (const auto& a : manifest.at("archetypes")) {
      FeatureStats stats = FeatureStats::from_json(io::read_file(dir / a.at("features").get<std::string>()));
      Archetype arch;
      arch.id = a.at("id").get<int>();
      arch.batch_size = a.at("batch_size").get<std::size_t>();
      arch.features = stats.config;
      if (parse_fingerprint_hex(a.at("fingerprint").get<std::string>()) != stats.fingerprint) {
        throw ConfigMismatchError("bundle manifest fingerprint disagrees with stored feature stats");
      }
      b.archetypes.push_back(std::move(arch));
      b.feature_stats.push_back(std::move(stats));
    }
    b.seeds = manifest.at("seeds").get<std::vector<std::uint64_t>>();
    const json& plan = manifest.at("plan");
    b.plan.n_folds = plan.at("n_folds").get<std::size_t>();
    b.plan.seed = plan.at("seed").get<std::uint64_t>();
    b.plan.assignment = plan.at("assignment").get<std::vector<std::size_t>>();
    const json& agg = manifest.at("aggregation");
    const std::string mode = agg.at("mode").get<std::string>();
    if (mode != "mean" && mode != "stacker") throw ParseError("unknown aggregation mode '" + mode + "'");
    b.aggregation.mode = mode == "stacker" ? AggregationMode::stacker : AggregationMode::mean;
    b.aggregation.columns = parse_stacker_columns(agg.at("columns").get<std::string>());
    b.aggregation.stacker.weights = agg.at("weights").get<std::vector<double>>();
    b.aggregation.stacker.intercept = agg.at("intercept").get<double>();
    b.aggregation.stacker.ridge_fallback = agg.at("ridge_fallback").get<bool>();
    b.aggregation.stacker.condition =
        agg.at("condition").is_null() ? std::numeric_limits<double>::infinity() : agg.at("condition").get<double>();
    for (const auto& f : manifest.at("base_models")) {
      b.base_models.push_back(ScorerModel::from_json(io::read_file(dir / f.get<std::string>())));
    }
    for (const auto& f : manifest.at("models")) {
      b.models.push_back(ScorerModel::from_json(io::read_file(dir / f.get<std::string>())));
    }
  } catch (const json::exception& e) {
    throw ParseError("bundle " + dir.string() + ": " + e.what());
  }
  b.validate();
  return b;
}

Eigen::MatrixXd model_predictions(const EnsembleBundle& bundle, std::span<const std::string> texts,
                                  std::size_t workers) {
  const auto features = embed_for_models(bundle.models, bundle.feature_stats, texts, workers);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(bundle.models.size()));
  for (std::size_t j = 0; j < bundle.models.size(); ++j) {
    const auto& m = bundle.models[j];
    out.col(static_cast<Eigen::Index>(j)) = predict(m, features[static_cast<std::size_t>(m.archetype)]);
  }
  return out;
}

Eigen::MatrixXd stacker_inputs(const EnsembleBundle& bundle, const Eigen::MatrixXd& per_model) {
  if (bundle.aggregation.columns == StackerColumns::per_fold) return per_model;
  const auto folds = static_cast<Eigen::Index>(bundle.plan.n_folds);
  const auto bases = static_cast<Eigen::Index>(bundle.base_models.size());
  Eigen::MatrixXd pooled(per_model.rows(), bases);
  for (Eigen::Index b = 0; b < bases; ++b) {
    pooled.col(b) = per_model.middleCols(b * folds, folds).rowwise().mean();
  }
  return pooled;
}

std::vector<double> predict_ensemble(const EnsembleBundle& bundle, std::span<const std::string> texts,
                                     std::size_t workers) {
  const Eigen::MatrixXd per_model = model_predictions(bundle, texts, workers);
  std::vector<double> out(texts.size());
  if (bundle.aggregation.mode == AggregationMode::mean) {
    for (Eigen::Index i = 0; i < per_model.rows(); ++i) {
      const Eigen::RowVectorXd row = per_model.row(i);
      out[static_cast<std::size_t>(i)] = aggregate_mean(std::span<const double>(row.data(), row.size()));
    }
    return out;
  }
  const Eigen::MatrixXd inputs = stacker_inputs(bundle, per_model);
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const Eigen::RowVectorXd row = inputs.row(i);
    out[static_cast<std::size_t>(i)] = apply_stacker(bundle.aggregation.stacker, std::span<const double>(row.data(), row.size()));
  }
  return out;
}

double predict_ensemble(const EnsembleBundle& bundle, std::string_view text) {
  const std::vector<std::string> one{std::string(text)};
  return predict_ensemble(bundle, one).front();
}

std::vector<double> predict_base_mean(const EnsembleBundle& bundle, std::span<const std::string> texts,
                                      std::size_t workers) {
  const auto features = embed_for_models(bundle.base_models, bundle.feature_stats, texts, workers);
  Eigen::MatrixXd preds(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(bundle.base_models.size()));
  for (std::size_t j = 0; j < bundle.base_models.size(); ++j) {
    const auto& m = bundle.base_models[j];
    preds.col(static_cast<Eigen::Index>(j)) = predict(m, features[static_cast<std::size_t>(m.archetype)]);
  }
  std::vector<double> out(texts.size());
  for (Eigen::Index i = 0; i < preds.rows(); ++i) {
    const Eigen::RowVectorXd row = preds.row(i);
    out[static_cast<std::size_t>(i)] = aggregate_mean(std::span<const double>(row.data(), row.size()));
  }
  return out;
}

}  // namespace sentcx
