#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sentcx/corpus.hpp"
#include "sentcx/featurize.hpp"
#include "sentcx/pseudolabel.hpp"
#include "sentcx/scorer.hpp"

namespace sentcx {

namespace fs = std::filesystem;

// One base-model configuration. Archetypes differ in their featurizer so that
// models trained with the same seed still disagree.
struct Archetype {
  int id = 0;
  FeatureConfig features;
  std::size_t batch_size = 32;

  bool operator==(const Archetype&) const = default;
};

// Three archetypes: 2048 buckets / 3-5-grams, 1024 / 2-4, 4096 / 3-6 with a
// smaller batch.
std::vector<Archetype> default_archetypes();

// Throws ValidationError unless archetypes[i].id == i for all i.
void check_archetype_ids(std::span<const Archetype> archetypes);

struct FoldPlan {
  std::size_t n_folds = 0;
  std::vector<std::size_t> assignment;
  std::uint64_t seed = 0;

  std::size_t size() const { return assignment.size(); }
  std::vector<std::size_t> rows_in(std::size_t fold) const;
  std::vector<std::size_t> rows_out(std::size_t fold) const;

  bool operator==(const FoldPlan&) const = default;
};

// Seed-shuffled indices dealt round-robin into folds. Throws ValidationError
// when n < n_folds or n_folds == 0.
FoldPlan make_fold_plan(std::size_t n, std::size_t n_folds, std::uint64_t seed);

// How the out-of-fold matrix is laid out.
//   per_model: one column per base model; row i holds the prediction of that
//     model's variant whose fine-tuning excluded i's fold. Leak-free.
//   per_fold: one column per fine-tuned model, every row filled. Only the
//     entries where the column's fold matches the row's fold are out-of-fold.
enum class StackerColumns : std::uint8_t { per_model, per_fold };

std::string_view to_string(StackerColumns c);
StackerColumns parse_stacker_columns(std::string_view name);

struct OofColumn {
  int archetype = 0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> fold;

  std::string name() const;
  bool operator==(const OofColumn&) const = default;
};

struct OofMatrix {
  Eigen::MatrixXd values;
  std::vector<OofColumn> columns;
  StackerColumns construction = StackerColumns::per_model;
  // Index of the fine-tuned model that produced each entry.
  Eigen::MatrixXi producer;

  std::string to_csv(std::span<const LabeledSentence> labeled) const;
};

// 9 base models (archetype-major, then seed) trained on pseudo-labels.
std::vector<ScorerModel> train_pseudo_stage(const PseudoLabelSet& pseudo, std::span<const Archetype> archetypes,
                                            std::span<const FeatureStats> feature_stats,
                                            std::span<const std::uint64_t> seeds, const HyperParams& hyper,
                                            std::size_t workers = 1);

struct CvFineTuneResult {
  // models[b * n_folds + f] is base model b fine-tuned without fold f.
  std::vector<ScorerModel> models;
  std::vector<std::vector<std::size_t>> training_rows;
  std::vector<std::size_t> base_of;
  std::vector<std::size_t> fold_of;
  OofMatrix oof;
};

// Warm-starts every base model on every fold's complement and collects the
// out-of-fold predictions.
CvFineTuneResult cv_fine_tune(std::span<const ScorerModel> base_models, std::span<const Archetype> archetypes,
                              std::span<const FeatureStats> feature_stats, std::span<const LabeledSentence> labeled,
                              const FoldPlan& plan, const HyperParams& hyper, StackerColumns columns,
                              std::size_t workers = 1);

struct OofAudit {
  bool ok = true;
  std::size_t entries_checked = 0;
  // Out-of-fold entries audited as leak-free; for per_fold layouts the
  // remaining entries are counted as in-fold.
  std::size_t in_fold_entries = 0;
  std::string first_violation;
};

// Verifies from the fold bookkeeping that every entry the construction
// declares out-of-fold came from a model that never trained on that row.
OofAudit audit_oof(const CvFineTuneResult& result, const FoldPlan& plan);

// Mean then clamp. Throws ValidationError on an empty row.
double aggregate_mean(std::span<const double> row);

struct StackerFit {
  std::vector<double> weights;
  double intercept = 0.0;
  bool ridge_fallback = false;
  double condition = 1.0;

  bool operator==(const StackerFit&) const = default;
};

inline constexpr double kStackerConditionLimit = 1e12;
inline constexpr double kStackerFallbackLambda = 1e-6;

// Ordinary least squares with intercept; refits with a small ridge penalty if
// the centered normal matrix has condition number above the limit.
StackerFit fit_stacker(const Eigen::MatrixXd& oof, std::span<const double> y);
inline StackerFit fit_stacker(const OofMatrix& oof, std::span<const double> y) { return fit_stacker(oof.values, y); }

// intercept + weights . row, clamped.
double apply_stacker(const StackerFit& fit, std::span<const double> row);

enum class AggregationMode : std::uint8_t { mean, stacker };

struct Aggregation {
  AggregationMode mode = AggregationMode::mean;
  StackerColumns columns = StackerColumns::per_model;
  StackerFit stacker;
};

struct EnsembleBundle {
  std::vector<Archetype> archetypes;
  std::vector<FeatureStats> feature_stats;
  std::vector<std::uint64_t> seeds;
  std::vector<ScorerModel> base_models;
  std::vector<ScorerModel> models;
  FoldPlan plan;
  Aggregation aggregation;

  // Throws ValidationError on cardinality or dimension violations.
  void validate() const;

  // Directory layout: manifest.json, features/, base/, models/, and oof.csv
  // when an OOF matrix is supplied. Written next to `dir` and renamed into
  // place.
  void save(const fs::path& dir, const OofMatrix* oof = nullptr,
            std::span<const LabeledSentence> labeled = {}) const;
  static EnsembleBundle load(const fs::path& dir);
};

// Per-model clamped predictions, one column per fine-tuned model.
Eigen::MatrixXd model_predictions(const EnsembleBundle& bundle, std::span<const std::string> texts,
                                  std::size_t workers = 1);

// Collapses per-model predictions into the stacker's input columns.
Eigen::MatrixXd stacker_inputs(const EnsembleBundle& bundle, const Eigen::MatrixXd& per_model);

std::vector<double> predict_ensemble(const EnsembleBundle& bundle, std::span<const std::string> texts,
                                     std::size_t workers = 1);
double predict_ensemble(const EnsembleBundle& bundle, std::string_view text);

// Mean of the pseudo-stage models only.
std::vector<double> predict_base_mean(const EnsembleBundle& bundle, std::span<const std::string> texts,
                                      std::size_t workers = 1);

}  // namespace sentcx
