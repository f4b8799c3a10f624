#include "sentcx/evaluation.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "sentcx/errors.hpp"
#include "sentcx/parallel.hpp"
#include "sentcx/rng.hpp"

namespace sentcx {

using json = nlohmann::json;

std::string_view to_string(Setting s) {
  switch (s) {
    case Setting::baseline: return "baseline";
    case Setting::pseudo_only: return "pseudo_only";
    case Setting::ensemble_mean: return "ensemble_mean";
    case Setting::ensemble_stacker: return "ensemble_stacker";
  }
  return "baseline";
}

std::string_view display_name(Setting s) {
  switch (s) {
    case Setting::baseline: return "Baseline";
    case Setting::pseudo_only: return "Ensemble pseudo-labels only";
    case Setting::ensemble_mean: return "Ensemble simple mean aggregation";
    case Setting::ensemble_stacker: return "Ensemble linear model aggregation";
  }
  return "Baseline";
}

Setting parse_setting(std::string_view name) {
  for (Setting s : kAllSettings) {
    if (to_string(s) == name) return s;
  }
  throw ValidationError("unknown setting '" + std::string(name) +
                        "' (expected baseline, pseudo_only, ensemble_mean or ensemble_stacker)");
}

std::string EvalReport::to_json() const {
  const json doc = {
      {"setting", to_string(setting)},
      {"per_fold_rmse", per_fold_rmse},
      {"mean_fold_rmse", mean_fold_rmse},
      {"rmse_raw", rmse_raw},
      {"rmse_mapped", rmse_mapped},
      {"mapping", {{"coefficients", mapping.a}, {"order", mapping.order}, {"degenerate", mapping.degenerate}}},
      {"predictions", predictions},
  };
  return doc.dump(2) + "\n";
}

std::string render_cv_table(std::span<const EvalReport> reports) {
  std::size_t folds = 0;
  std::size_t name_w = std::string_view("Model").size();
  for (const auto& r : reports) {
    folds = std::max(folds, r.per_fold_rmse.size());
    name_w = std::max(name_w, display_name(r.setting).size());
  }
  std::string out = fmt::format("{:<{}}", "Model", name_w);
  for (std::size_t f = 0; f < folds; ++f) out += fmt::format("  {:>6}", f + 1);
  out += fmt::format("  {:>6}\n", "Mean");
  for (const auto& r : reports) {
    out += fmt::format("{:<{}}", display_name(r.setting), name_w);
    for (std::size_t f = 0; f < folds; ++f) {
      out += f < r.per_fold_rmse.size() ? fmt::format("  {:>6.3f}", r.per_fold_rmse[f]) : fmt::format("  {:>6}", "");
    }
    out += fmt::format("  {:>6.3f}\n", r.mean_fold_rmse);
  }
  return out;
}

namespace {

EvalReport assemble_report(Setting setting, std::span<const LabeledSentence> labeled, const FoldPlan& plan,
                           std::vector<double> predictions) {
  EvalReport report;
  report.setting = setting;
  std::vector<double> gold;
  gold.reserve(labeled.size());
  for (const auto& s : labeled) gold.push_back(s.mos);
  for (std::size_t f = 0; f < plan.n_folds; ++f) {
    std::vector<double> p, g;
    for (std::size_t r : plan.rows_in(f)) {
      p.push_back(predictions[r]);
      g.push_back(gold[r]);
    }
    report.per_fold_rmse.push_back(rmse(p, g));
  }
  report.mean_fold_rmse = fold_mean(report.per_fold_rmse);
  report.rmse_raw = rmse(predictions, gold);
  const MappedRmse mapped = mapped_rmse(predictions, gold);
  report.rmse_mapped = mapped.rmse;
  report.mapping = mapped.mapping;
  report.predictions = std::move(predictions);
  return report;
}

std::vector<LabeledSentence> subset(std::span<const LabeledSentence> labeled, std::span<const std::size_t> rows) {
  std::vector<LabeledSentence> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labeled[r]);
  return out;
}

std::vector<double> mean_of_models(std::span<const ScorerModel> models, std::span<const FeatureStats> stats,
                                   std::span<const std::string> texts, std::size_t workers) {
  std::vector<FeatureMatrix> features(stats.size());
  for (const auto& m : models) {
    auto& f = features[static_cast<std::size_t>(m.archetype)];
    if (f.rows() == 0 && !texts.empty()) f = embed_batch(texts, stats[static_cast<std::size_t>(m.archetype)], workers);
  }
  Eigen::MatrixXd preds(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(models.size()));
  for (std::size_t j = 0; j < models.size(); ++j) {
    preds.col(static_cast<Eigen::Index>(j)) = predict(models[j], features[static_cast<std::size_t>(models[j].archetype)]);
  }
  std::vector<double> out(texts.size());
  for (Eigen::Index i = 0; i < preds.rows(); ++i) {
    const Eigen::RowVectorXd row = preds.row(i);
    out[static_cast<std::size_t>(i)] = aggregate_mean(std::span<const double>(row.data(), row.size()));
  }
  return out;
}

int stage_rank(Setting s) {
  switch (s) {
    case Setting::baseline: return 0;
    case Setting::pseudo_only: return 1;
    case Setting::ensemble_mean:
    case Setting::ensemble_stacker: return 2;
  }
  return 0;
}

}  // namespace

EvalReport cross_validate(Setting setting, std::span<const LabeledSentence> labeled, const FoldPlan& plan,
                          const FoldPredictor& predictor, std::size_t workers) {
  if (plan.size() != labeled.size()) throw ValidationError("fold plan does not cover the labeled set");
  std::vector<double> predictions(labeled.size(), 0.0);
  parallel_for(plan.n_folds, workers, [&](std::size_t f) {
    const auto train = plan.rows_out(f);
    const auto eval = plan.rows_in(f);
    const auto p = predictor(train, eval, f);
    if (p.size() != eval.size()) throw ValidationError("fold predictor returned the wrong number of predictions");
    for (std::size_t i = 0; i < eval.size(); ++i) predictions[eval[i]] = p[i];
  });
  return assemble_report(setting, labeled, plan, std::move(predictions));
}

void PipelineResources::validate() const {
  if (!store || !index) throw ValidationError("pipeline needs a corpus store and an index");
  check_archetype_ids(archetypes);
  if (archetypes.empty()) throw ValidationError("at least one archetype is required");
  if (feature_stats.size() != archetypes.size()) throw ValidationError("feature stats needed for every archetype");
  for (std::size_t a = 0; a < archetypes.size(); ++a) {
    if (feature_stats[a].config != archetypes[a].features) {
      throw ConfigMismatchError("feature stats for archetype " + std::to_string(a) + " use another config");
    }
  }
  if (index->fingerprint() != feature_stats[0].fingerprint) {
    throw ConfigMismatchError("index was built with features " + fingerprint_hex(index->fingerprint()) +
                              ", archetype 0 uses " + fingerprint_hex(feature_stats[0].fingerprint));
  }
  if (seeds.empty()) throw ValidationError("at least one seed is required");
  if (std::unordered_set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ValidationError("seeds must be distinct");
  }
  if (pseudo_config.k == 0) throw ValidationError("k must be positive");
  pseudo_hyper.validate();
  fine_tune_hyper.validate();
}

ScorerModel train_baseline(const PipelineResources& res, std::span<const LabeledSentence> train) {
  std::vector<std::string> texts;
  std::vector<double> mos;
  for (const auto& s : train) {
    texts.push_back(s.text);
    mos.push_back(s.mos);
  }
  ScorerModel m = train_ridge(embed_batch(texts, res.feature_stats[0], res.workers), mos, res.baseline_lambda);
  m.archetype = 0;
  m.stage = Stage::baseline;
  return m;
}

PipelineRun run_pipeline(const PipelineResources& res, std::span<const LabeledSentence> train, Setting setting,
                         std::uint64_t plan_seed) {
  res.validate();
  PipelineRun run;
  run.baseline = train_baseline(res, train);
  if (setting == Setting::baseline) return run;

  if (res.shared_pseudo) {
    run.pseudo = *res.shared_pseudo;
  } else {
    run.pseudo = generate_pseudo_labels(train, *res.index, *res.store, run.baseline, res.feature_stats[0],
                                        res.labeled_texts, res.pseudo_config, res.workers);
    std::unordered_set<std::uint64_t> train_ids;
    for (const auto& s : train) train_ids.insert(s.id);
    for (const auto& l : run.pseudo.labels) {
      if (!train_ids.contains(l.anchor_id)) {
        throw Error("leakage: pseudo-label anchor " + std::to_string(l.anchor_id) + " is not a training sentence");
      }
    }
  }
  run.base_models = train_pseudo_stage(run.pseudo, res.archetypes, res.feature_stats, res.seeds, res.pseudo_hyper,
                                       res.workers);
  if (setting == Setting::pseudo_only) return run;

  const FoldPlan inner = make_fold_plan(train.size(), res.inner_folds, plan_seed);
  run.cv = cv_fine_tune(run.base_models, res.archetypes, res.feature_stats, train, inner, res.fine_tune_hyper,
                        res.stacker_columns, res.workers);
  const OofAudit audit = audit_oof(*run.cv, inner);
  if (!audit.ok) throw Error("out-of-fold audit failed: " + audit.first_violation);

  std::vector<double> mos;
  for (const auto& s : train) mos.push_back(s.mos);
  EnsembleBundle bundle;
  bundle.archetypes = res.archetypes;
  bundle.feature_stats = res.feature_stats;
  bundle.seeds = res.seeds;
  bundle.base_models = run.base_models;
  bundle.models = run.cv->models;
  bundle.plan = inner;
  bundle.aggregation.mode = setting == Setting::ensemble_stacker ? AggregationMode::stacker : AggregationMode::mean;
  bundle.aggregation.columns = res.stacker_columns;
  bundle.aggregation.stacker = fit_stacker(run.cv->oof, mos);
  bundle.validate();
  run.bundle = std::move(bundle);
  return run;
}

std::vector<double> predict_setting(const PipelineRun& run, const PipelineResources& res, Setting setting,
                                    std::span<const std::string> texts) {
  switch (setting) {
    case Setting::baseline: {
      const Eigen::VectorXd p = predict(run.baseline, embed_batch(texts, res.feature_stats[0], res.workers));
      return {p.data(), p.data() + p.size()};
    }
    case Setting::pseudo_only:
      if (run.base_models.empty()) throw ValidationError("pipeline run has no pseudo-stage models");
      return mean_of_models(run.base_models, res.feature_stats, texts, res.workers);
    case Setting::ensemble_mean:
    case Setting::ensemble_stacker: {
      if (!run.bundle) throw ValidationError("pipeline run has no ensemble bundle");
      EnsembleBundle b = *run.bundle;
      b.aggregation.mode = setting == Setting::ensemble_stacker ? AggregationMode::stacker : AggregationMode::mean;
      return predict_ensemble(b, texts, res.workers);
    }
  }
  return {};
}

std::vector<EvalReport> cross_validate(std::span<const Setting> settings, std::span<const LabeledSentence> labeled,
                                       const PipelineResources& res, const FoldPlan& plan) {
  res.validate();
  if (settings.empty()) return {};
  if (plan.size() != labeled.size()) throw ValidationError("fold plan does not cover the labeled set");
  Setting deepest = settings.front();
  for (Setting s : settings) {
    if (stage_rank(s) > stage_rank(deepest)) deepest = s;
  }

  std::vector<std::vector<double>> predictions(settings.size(), std::vector<double>(labeled.size(), 0.0));
  PipelineResources inner = res;
  const std::size_t fold_workers = std::min(res.workers, plan.n_folds);
  inner.workers = std::max<std::size_t>(1, res.workers / std::max<std::size_t>(1, fold_workers));

  parallel_for(plan.n_folds, fold_workers, [&](std::size_t f) {
    const auto train_rows = plan.rows_out(f);
    const auto eval_rows = plan.rows_in(f);
    const auto train = subset(labeled, train_rows);
    const auto eval = subset(labeled, eval_rows);
    const PipelineRun run = run_pipeline(inner, train, deepest, derive_seed(plan.seed, f + 1));

    // Leakage guard: no anchor of this fold's pseudo-labels may be evaluated.
    if (!inner.shared_pseudo) {
      std::unordered_set<std::uint64_t> eval_ids;
      for (const auto& s : eval) eval_ids.insert(s.id);
      for (const auto& l : run.pseudo.labels) {
        if (eval_ids.contains(l.anchor_id)) {
          throw Error("leakage: anchor " + std::to_string(l.anchor_id) + " belongs to evaluation fold " +
                      std::to_string(f));
        }
      }
    }
    std::vector<std::string> texts;
    for (const auto& s : eval) texts.push_back(s.text);
    for (std::size_t k = 0; k < settings.size(); ++k) {
      const auto p = predict_setting(run, inner, settings[k], texts);
      for (std::size_t i = 0; i < eval_rows.size(); ++i) predictions[k][eval_rows[i]] = p[i];
    }
  });

  std::vector<EvalReport> reports;
  for (std::size_t k = 0; k < settings.size(); ++k) {
    reports.push_back(assemble_report(settings[k], labeled, plan, std::move(predictions[k])));
  }
  return reports;
}

}  // namespace sentcx
