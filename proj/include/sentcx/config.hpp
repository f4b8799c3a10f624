#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sentcx/corpus.hpp"
#include "sentcx/ensemble.hpp"
#include "sentcx/evaluation.hpp"
#include "sentcx/scorer.hpp"

namespace sentcx {

// Declarative run configuration, one JSON document. Relative paths resolve
// against the directory holding the config file.
//
// {
//   "output_dir": "run",
//   "corpora": [{"path": "wiki.txt", "source": "wikipedia", "format": "plain-lines"}],
//   "labeled": {"train": "train.tsv", "test": "test.tsv", "default_rating_std": 0.5},
//   "archetypes": [{"hashed_dim": 2048, "ngram_min": 3, "ngram_max": 5,
//                   "max_tokens": 128, "batch_size": 32, "surface": [...]}],
//   "retrieval": {"k": 500},
//   "hyper": {"baseline_lambda": 10, "pseudo": {...}, "fine_tune": {...}},
//   "seeds": [1, 2, 3],
//   "cv": {"n_folds": 5, "fold_seed": 2024},
//   "setting": "ensemble_stacker",
//   "flags": {"exclude_labeled": true, "shared_pseudo_labels": false,
//             "stacker_columns": "per_model"}
// }
//
// Every key except corpora and labeled.train has a default.
struct RunConfig {
  std::filesystem::path output_dir;
  std::vector<CorpusSpec> corpora;
  std::filesystem::path labeled_train;
  std::optional<std::filesystem::path> labeled_test;
  double default_rating_std = kDefaultRatingStd;
  std::vector<Archetype> archetypes = default_archetypes();
  std::size_t k = 500;
  double baseline_lambda = 1.0;
  HyperParams pseudo_hyper = HyperParams::pseudo_defaults();
  HyperParams fine_tune_hyper = HyperParams::fine_tune_defaults();
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::size_t n_folds = 5;
  std::uint64_t fold_seed = 2024;
  Setting setting = Setting::ensemble_stacker;
  bool exclude_labeled = true;
  // evaluate reuses the pseudolabel stage's set (anchored on every training
  // sentence) in all folds instead of regenerating it per fold.
  bool shared_pseudo_labels = false;
  StackerColumns stacker_columns = StackerColumns::per_model;

  // Exact bytes the config was parsed from.
  std::string source_text;

  // Parses and validates field values; throws ParseError or ValidationError.
  static RunConfig parse(std::string_view json_text, const std::filesystem::path& base_dir);
  // parse() plus a check that every referenced input file exists.
  static RunConfig load(const std::filesystem::path& path);

  void validate() const;
  void check_paths() const;

  // Canonical JSON of the fields one pipeline stage depends on; used to
  // detect configuration drift between stages.
  std::string section(std::string_view stage) const;
};

}  // namespace sentcx
