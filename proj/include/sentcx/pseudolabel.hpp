#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sentcx/corpus.hpp"
#include "sentcx/featurize.hpp"
#include "sentcx/scorer.hpp"
#include "sentcx/simindex.hpp"

namespace sentcx {

struct PseudoLabel {
  std::uint64_t sentence_id = 0;
  std::string text;
  Source source = Source::other;
  double predicted_score = 1.0;
  std::uint64_t anchor_id = 0;
  double anchor_mos = 1.0;
  double anchor_std = 0.0;

  bool operator==(const PseudoLabel&) const = default;
};

// Admission rule: the candidate's predicted score lies within one rating
// standard deviation of the anchor's mean opinion score.
inline bool admits(double predicted_score, double anchor_mos, double anchor_std) {
  return std::abs(predicted_score - anchor_mos) <= anchor_std;
}

struct PseudoLabelConfig {
  std::size_t k = 500;
  // Drop corpus sentences whose text equals a labeled sentence.
  bool exclude_labeled = true;
  std::uint64_t baseline_seed = 0;

  bool operator==(const PseudoLabelConfig&) const = default;
};

struct SourceStats {
  Source source = Source::other;
  std::size_t count = 0;
  double mean_char_len = 0.0;
  double mean_predicted_score = 0.0;

  bool operator==(const SourceStats&) const = default;
};

struct PseudoLabelSet {
  std::vector<PseudoLabel> labels;
  PseudoLabelConfig config;
  std::vector<SourceStats> stats;

  std::string labels_to_jsonl() const;
  std::string stats_to_json() const;
  static PseudoLabelSet from_jsonl(std::string_view labels, std::string_view stats_json);
};

// Anchors are processed in ascending id. Each anchor retrieves its k nearest
// corpus sentences, the baseline scores them, and candidates within the
// anchor's rating std are admitted. A sentence admitted for an earlier anchor
// is skipped for later ones. `labeled_texts` lists every normalized labeled
// text (train and test) used for exclusion.
PseudoLabelSet generate_pseudo_labels(std::span<const LabeledSentence> anchors, const VectorIndex& index,
                                      const CorpusStore& store, const ScorerModel& baseline,
                                      const FeatureStats& features, std::span<const std::string> labeled_texts,
                                      const PseudoLabelConfig& config, std::size_t workers = 1);

// Per-source count, mean length in characters and mean predicted score,
// sorted by count descending (source tag order on ties).
std::vector<SourceStats> pseudo_label_stats(std::span<const PseudoLabel> labels);

// Aligned text table with the columns Data Source, #Sentences, Length, MOS.
std::string render_stats_table(std::span<const SourceStats> rows);

}  // namespace sentcx
