#include "sentcx/pseudolabel.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <map>
#include <nlohmann/json.hpp>
#include <unordered_map>
#include <unordered_set>

#include "sentcx/errors.hpp"
#include "sentcx/io.hpp"
#include "sentcx/unicode.hpp"

namespace sentcx {

using json = nlohmann::json;

PseudoLabelSet generate_pseudo_labels(std::span<const LabeledSentence> anchors, const VectorIndex& index,
                                      const CorpusStore& store, const ScorerModel& baseline,
                                      const FeatureStats& features, std::span<const std::string> labeled_texts,
                                      const PseudoLabelConfig& config, std::size_t workers) {
  if (config.k == 0) throw ValidationError("k must be positive");
  if (anchors.empty()) throw ValidationError("pseudo-labeling needs at least one anchor");
  if (index.fingerprint() != baseline.fingerprint) {
    throw ConfigMismatchError("index fingerprint " + fingerprint_hex(index.fingerprint()) +
                              " does not match baseline " + fingerprint_hex(baseline.fingerprint));
  }
  if (features.fingerprint != baseline.fingerprint) {
    throw ConfigMismatchError("feature stats fingerprint " + fingerprint_hex(features.fingerprint) +
                              " does not match baseline " + fingerprint_hex(baseline.fingerprint));
  }

  std::vector<const LabeledSentence*> ordered;
  ordered.reserve(anchors.size());
  for (const auto& a : anchors) ordered.push_back(&a);
  std::stable_sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->id < b->id; });

  IdSet excluded;
  if (config.exclude_labeled) {
    const std::unordered_set<std::string_view> texts(labeled_texts.begin(), labeled_texts.end());
    for (const auto& rec : store.records()) {
      if (texts.contains(rec.text)) excluded.insert(rec.id);
    }
  }

  std::vector<std::vector<double>> queries(ordered.size());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    queries[i] = embed(ordered[i]->text, features, baseline.fingerprint);
  }
  const auto retrieved = index.top_k_batch(queries, config.k, &excluded, workers);

  // Every distinct candidate is scored once; a prediction does not depend on
  // which anchor retrieved the sentence.
  std::vector<std::uint64_t> candidates;
  std::unordered_map<std::uint64_t, std::size_t> slot;
  for (const auto& hits : retrieved) {
    for (const auto& h : hits) {
      if (slot.emplace(h.id, candidates.size()).second) candidates.push_back(h.id);
    }
  }
  std::vector<std::string> texts(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const SentenceRecord* rec = store.find(candidates[i]);
    if (!rec) throw ValidationError("index id " + std::to_string(candidates[i]) + " is missing from the corpus store");
    texts[i] = rec->text;
  }
  const Eigen::VectorXd scores = predict(baseline, embed_batch(texts, features, workers));

  PseudoLabelSet set;
  set.config = config;
  std::unordered_set<std::uint64_t> admitted;
  for (std::size_t a = 0; a < ordered.size(); ++a) {
    const LabeledSentence& anchor = *ordered[a];
    for (const auto& h : retrieved[a]) {
      if (admitted.contains(h.id)) continue;
      const double score = scores(static_cast<Eigen::Index>(slot.at(h.id)));
      if (!admits(score, anchor.mos, anchor.rating_std)) continue;
      const SentenceRecord* rec = store.find(h.id);
      admitted.insert(h.id);
      set.labels.push_back(PseudoLabel{
          .sentence_id = h.id,
          .text = rec->text,
          .source = rec->source,
          .predicted_score = score,
          .anchor_id = anchor.id,
          .anchor_mos = anchor.mos,
          .anchor_std = anchor.rating_std,
      });
    }
  }
  set.stats = pseudo_label_stats(set.labels);
  return set;
}

std::vector<SourceStats> pseudo_label_stats(std::span<const PseudoLabel> labels) {
  struct Acc {
    std::size_t count = 0;
    std::size_t chars = 0;
    double score = 0.0;
  };
  std::map<Source, Acc> acc;
  for (const auto& l : labels) {
    auto& a = acc[l.source];
    ++a.count;
    a.chars += utf8::length(l.text);
    a.score += l.predicted_score;
  }
  std::vector<SourceStats> rows;
  rows.reserve(acc.size());
  for (const auto& [source, a] : acc) {
    const auto n = static_cast<double>(a.count);
    rows.push_back({source, a.count, static_cast<double>(a.chars) / n, a.score / n});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.count > b.count; });
  return rows;
}

std::string render_stats_table(std::span<const SourceStats> rows) {
  auto grouped = [](std::size_t v) {
    std::string digits = std::to_string(v);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
      if (i > 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
      out.push_back(digits[i]);
    }
    return out;
  };
  std::size_t name_w = std::string_view("Data Source").size();
  for (const auto& r : rows) name_w = std::max(name_w, display_name(r.source).size());

  std::string out = fmt::format("{:<{}}  {:>10}  {:>10}  {:>7}\n", "Data Source", name_w, "#Sentences",
                                "Avg Length", "Avg MOS");
  for (const auto& r : rows) {
    out += fmt::format("{:<{}}  {:>10}  {:>10.0f}  {:>7.1f}\n", display_name(r.source), name_w, grouped(r.count),
                       r.mean_char_len, r.mean_predicted_score);
  }
  return out;
}

std::string PseudoLabelSet::labels_to_jsonl() const {
  std::string out;
  for (const auto& l : labels) {
    const json obj = {
        {"sentence_id", l.sentence_id}, {"text", l.text},           {"source", to_string(l.source)},
        {"predicted_score", l.predicted_score}, {"anchor_id", l.anchor_id}, {"anchor_mos", l.anchor_mos},
        {"anchor_std", l.anchor_std},
    };
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::string PseudoLabelSet::stats_to_json() const {
  json rows = json::array();
  for (const auto& s : stats) {
    rows.push_back({{"source", to_string(s.source)},
                    {"count", s.count},
                    {"mean_char_len", s.mean_char_len},
                    {"mean_predicted_score", s.mean_predicted_score}});
  }
  const json doc = {
      {"config",
       {{"k", config.k}, {"exclude_labeled", config.exclude_labeled}, {"baseline_seed", config.baseline_seed}}},
      {"total", labels.size()},
      {"per_source", rows},
  };
  return doc.dump(2) + "\n";
}

PseudoLabelSet PseudoLabelSet::from_jsonl(std::string_view labels_text, std::string_view stats_json) {
  PseudoLabelSet set;
  const auto lines = io::split_lines(labels_text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      const json o = json::parse(lines[i]);
      set.labels.push_back(PseudoLabel{
          .sentence_id = o.at("sentence_id").get<std::uint64_t>(),
          .text = o.at("text").get<std::string>(),
          .source = parse_source(o.at("source").get<std::string>()),
          .predicted_score = o.at("predicted_score").get<double>(),
          .anchor_id = o.at("anchor_id").get<std::uint64_t>(),
          .anchor_mos = o.at("anchor_mos").get<double>(),
          .anchor_std = o.at("anchor_std").get<double>(),
      });
    } catch (const json::exception& e) {
      throw ParseError(std::string("pseudo-labels: ") + e.what(), i + 1);
    }
  }
  try {
    const json doc = json::parse(stats_json);
    const json& c = doc.at("config");
    set.config.k = c.at("k").get<std::size_t>();
    set.config.exclude_labeled = c.at("exclude_labeled").get<bool>();
    set.config.baseline_seed = c.at("baseline_seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("pseudo-label stats: ") + e.what());
  }
  set.stats = pseudo_label_stats(set.labels);
  return set;
}

}  // namespace sentcx
