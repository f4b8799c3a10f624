#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sentcx/corpus.hpp"
#include "sentcx/ensemble.hpp"
#include "sentcx/metrics.hpp"
#include "sentcx/pseudolabel.hpp"
#include "sentcx/scorer.hpp"
#include "sentcx/simindex.hpp"

namespace sentcx {

enum class Setting : std::uint8_t { baseline, pseudo_only, ensemble_mean, ensemble_stacker };

inline constexpr std::array<Setting, 4> kAllSettings = {Setting::baseline, Setting::pseudo_only,
                                                        Setting::ensemble_mean, Setting::ensemble_stacker};

std::string_view to_string(Setting s);
std::string_view display_name(Setting s);
Setting parse_setting(std::string_view name);

struct EvalReport {
  Setting setting = Setting::baseline;
  std::vector<double> per_fold_rmse;
  double mean_fold_rmse = 0.0;
  // Pooled over all out-of-fold predictions.
  double rmse_raw = 0.0;
  double rmse_mapped = 0.0;
  MappingCoeffs mapping;
  // Out-of-fold prediction for every labeled row, in input order.
  std::vector<double> predictions;

  std::string to_json() const;
};

// Rows mirror a cross-validation table: per-fold columns and the mean.
std::string render_cv_table(std::span<const EvalReport> reports);

// Produces predictions for eval_rows after training on train_rows.
using FoldPredictor = std::function<std::vector<double>(std::span<const std::size_t> train_rows,
                                                        std::span<const std::size_t> eval_rows, std::size_t fold)>;

// Generic k-fold driver; also the hook for injecting custom predictors.
EvalReport cross_validate(Setting setting, std::span<const LabeledSentence> labeled, const FoldPlan& plan,
                          const FoldPredictor& predictor, std::size_t workers = 1);

// Everything the pipeline needs besides the labeled training subset.
struct PipelineResources {
  const CorpusStore* store = nullptr;
  const VectorIndex* index = nullptr;
  std::vector<Archetype> archetypes;
  // Indexed by archetype id; archetype 0 is the retrieval/baseline featurizer.
  std::vector<FeatureStats> feature_stats;
  std::vector<std::uint64_t> seeds;
  // Normalized texts of every labeled sentence (train and test).
  std::vector<std::string> labeled_texts;
  PseudoLabelConfig pseudo_config;
  double baseline_lambda = 1.0;
  HyperParams pseudo_hyper = HyperParams::pseudo_defaults();
  HyperParams fine_tune_hyper = HyperParams::fine_tune_defaults();
  std::size_t inner_folds = 5;
  StackerColumns stacker_columns = StackerColumns::per_model;
  // When set, these pseudo-labels (generated once from the whole labeled
  // set) are reused in every fold instead of regenerating per fold.
  const PseudoLabelSet* shared_pseudo = nullptr;
  std::size_t workers = 1;

  void validate() const;
};

// Baseline scorer: closed-form ridge on the retrieval featurizer.
ScorerModel train_baseline(const PipelineResources& res, std::span<const LabeledSentence> train);

struct PipelineRun {
  ScorerModel baseline;
  PseudoLabelSet pseudo;
  std::vector<ScorerModel> base_models;
  std::optional<CvFineTuneResult> cv;
  std::optional<EnsembleBundle> bundle;
};

// Runs the stages needed for `setting` on one training set. Pseudo-labels are
// generated from `train` anchors only unless res.shared_pseudo is set.
PipelineRun run_pipeline(const PipelineResources& res, std::span<const LabeledSentence> train, Setting setting,
                         std::uint64_t plan_seed);

// Predictions of a finished pipeline run for the given setting.
std::vector<double> predict_setting(const PipelineRun& run, const PipelineResources& res, Setting setting,
                                    std::span<const std::string> texts);

// Evaluates several settings on the same folds, sharing the trained
// pipeline between settings where possible.
std::vector<EvalReport> cross_validate(std::span<const Setting> settings, std::span<const LabeledSentence> labeled,
                                       const PipelineResources& res, const FoldPlan& plan);

inline EvalReport cross_validate(Setting setting, std::span<const LabeledSentence> labeled,
                                 const PipelineResources& res, const FoldPlan& plan) {
  const Setting one[] = {setting};
  return cross_validate(one, labeled, res, plan).front();
}

}  // namespace sentcx
