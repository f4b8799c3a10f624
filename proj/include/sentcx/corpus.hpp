#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sentcx {

namespace fs = std::filesystem;

// Origin of an unlabeled sentence.
enum class Source : std::uint8_t {
  wikipedia,
  zeit_online,
  news,
  geo_tagesschau,
  simple_german,
  klexikon,
  hurraki,
  other,
};

inline constexpr std::array<Source, 8> kAllSources = {
    Source::wikipedia,     Source::zeit_online, Source::news,    Source::geo_tagesschau,
    Source::simple_german, Source::klexikon,    Source::hurraki, Source::other,
};

// Tag used in files and configs, e.g. "simple-german".
std::string_view to_string(Source source);
// Human-readable name used in stats tables.
std::string_view display_name(Source source);
// Throws ValidationError for unknown tags.
Source parse_source(std::string_view tag);

struct SentenceRecord {
  std::uint64_t id = 0;
  std::string text;
  Source source = Source::other;
  std::size_t char_len = 0;

  bool operator==(const SentenceRecord&) const = default;
};

struct LabeledSentence {
  std::uint64_t id = 0;
  std::string text;
  double mos = 1.0;
  double rating_std = 0.0;
};

struct CorpusStats {
  std::size_t total_sentences = 0;
  std::size_t distinct_sentences = 0;
  std::map<Source, std::size_t> per_source_counts;

  bool operator==(const CorpusStats&) const = default;
};

enum class CorpusFormat { plain_lines, jsonl };

CorpusFormat parse_corpus_format(std::string_view name);
std::string_view to_string(CorpusFormat format);

inline constexpr double kDefaultRatingStd = 0.5;

// NFC, trimmed, whitespace runs collapsed to one ASCII space. Throws
// ParseError on invalid UTF-8.
std::string normalize_sentence(std::string_view raw);

SentenceRecord make_record(std::uint64_t id, std::string_view raw, Source source);

// One record per non-empty normalized line (plain-lines) or per object's
// "text" field (jsonl). Ids start at first_id. A jsonl "source" key, when
// present, overrides `source`; a jsonl "id" key is accepted but not used.
std::vector<SentenceRecord> ingest_corpus(const fs::path& path, Source source, CorpusFormat format,
                                          std::uint64_t first_id = 0);

struct DedupResult {
  std::vector<SentenceRecord> records;
  CorpusStats stats;
};

// Keeps the first occurrence of each exact text, preserving order.
DedupResult deduplicate(std::vector<SentenceRecord> records);

// Tab-separated file with a header naming at least id, text and mos;
// rating_std is optional and falls back to `default_rating_std`.
std::vector<LabeledSentence> load_labeled(const fs::path& path, double default_rating_std = kDefaultRatingStd);

// Immutable, id-addressable collection of normalized sentences.
class CorpusStore {
 public:
  CorpusStore() = default;
  // Throws ValidationError on duplicate ids.
  explicit CorpusStore(std::vector<SentenceRecord> records);

  std::span<const SentenceRecord> records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  // nullptr when absent.
  const SentenceRecord* find(std::uint64_t id) const;
  // Next id after the current maximum (0 for an empty store).
  std::uint64_t next_id() const;

  std::string to_jsonl() const;
  static CorpusStore from_jsonl(std::string_view text);

 private:
  std::vector<SentenceRecord> records_;
  std::unordered_map<std::uint64_t, std::size_t> by_id_;
};

struct CorpusSpec {
  fs::path path;
  Source source = Source::other;
  CorpusFormat format = CorpusFormat::plain_lines;
};

struct IngestResult {
  CorpusStore store;
  CorpusStats stats;
};

// Reads all files (concurrently up to `workers`), assigns ids in the order of `specs`,
// then deduplicates. Output does not depend on `workers`.
IngestResult ingest_all(std::span<const CorpusSpec> specs, std::size_t workers = 1);

std::string stats_to_json(const CorpusStats& stats);
CorpusStats stats_from_json(std::string_view text);

}  // namespace sentcx
