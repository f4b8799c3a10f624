#include "sentcx/corpus.hpp"

#include <charconv>
#include <cmath>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "sentcx/errors.hpp"
#include "sentcx/io.hpp"
#include "sentcx/parallel.hpp"
#include "sentcx/unicode.hpp"

namespace sentcx {

using json = nlohmann::json;

namespace {

struct SourceName {
  Source source;
  std::string_view tag;
  std::string_view display;
};

constexpr std::array<SourceName, 8> kSourceNames = {{
    {Source::wikipedia, "wikipedia", "German Wikipedia"},
    {Source::zeit_online, "zeit-online", "Zeit Online"},
    {Source::news, "news", "3 Million News Sentences"},
    {Source::geo_tagesschau, "geo-tagesschau", "GEO/GEOlino/Tagesschau/Logo"},
    {Source::simple_german, "simple-german", "Corpus Simple German"},
    {Source::klexikon, "klexikon", "Klexikon"},
    {Source::hurraki, "hurraki", "Hurraki"},
    {Source::other, "other", "Other"},
}};

const SourceName& lookup(Source s) { return kSourceNames[static_cast<std::size_t>(s)]; }

double parse_double(std::string_view field, std::string_view column, std::size_t line) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError("non-numeric " + std::string(column) + " '" + std::string(field) + "'", line);
  }
  return v;
}

std::uint64_t parse_id(std::string_view field, std::size_t line) {
  std::uint64_t v = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError("id must be a non-negative integer, got '" + std::string(field) + "'", line);
  }
  return v;
}

}  // namespace

std::string_view to_string(Source source) { return lookup(source).tag; }
std::string_view display_name(Source source) { return lookup(source).display; }

Source parse_source(std::string_view tag) {
  for (const auto& s : kSourceNames) {
    if (s.tag == tag) return s.source;
  }
  throw ValidationError("unknown source tag '" + std::string(tag) + "'");
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "plain-lines") return CorpusFormat::plain_lines;
  if (name == "jsonl") return CorpusFormat::jsonl;
  throw ValidationError("unknown corpus format '" + std::string(name) + "' (expected plain-lines or jsonl)");
}

std::string_view to_string(CorpusFormat format) {
  return format == CorpusFormat::jsonl ? "jsonl" : "plain-lines";
}

std::string normalize_sentence(std::string_view raw) {
  if (const auto bad = utf8::find_invalid(raw)) {
    throw ParseError("invalid UTF-8 at byte offset " + std::to_string(*bad));
  }
  const std::vector<char32_t> cps = utf8::decode(utf8::nfc(raw));
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char32_t cp : cps) {
    if (utf8::is_whitespace(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    utf8::append(out, cp);
  }
  return out;
}

SentenceRecord make_record(std::uint64_t id, std::string_view raw, Source source) {
  SentenceRecord r;
  r.id = id;
  r.text = normalize_sentence(raw);
  r.source = source;
  r.char_len = utf8::length(r.text);
  return r;
}

std::vector<SentenceRecord> ingest_corpus(const fs::path& path, Source source, CorpusFormat format,
                                          std::uint64_t first_id) {
  const std::string content = io::read_file(path);
  if (const auto bad = utf8::find_invalid(content)) {
    throw ParseError(path.string() + ": invalid UTF-8 at byte offset " + std::to_string(*bad));
  }
  std::vector<SentenceRecord> out;
  std::uint64_t next = first_id;
  const auto lines = io::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (format == CorpusFormat::plain_lines) {
      auto rec = make_record(next, line, source);
      if (rec.text.empty()) continue;
      out.push_back(std::move(rec));
      ++next;
      continue;
    }
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ": malformed JSON: " + e.what(), i + 1);
    }
    if (!obj.is_object()) throw ParseError(path.string() + ": expected a JSON object", i + 1);
    const auto text = obj.find("text");
    if (text == obj.end() || !text->is_string()) {
      throw ParseError(path.string() + ": missing string field \"text\"", i + 1);
    }
    Source rec_source = source;
    if (const auto s = obj.find("source"); s != obj.end()) {
      if (!s->is_string()) throw ParseError(path.string() + ": \"source\" must be a string", i + 1);
      try {
        rec_source = parse_source(s->get<std::string>());
      } catch (const ValidationError& e) {
        throw ParseError(path.string() + ": " + e.what(), i + 1);
      }
    }
    auto rec = make_record(next, text->get<std::string>(), rec_source);
    if (rec.text.empty()) continue;
    out.push_back(std::move(rec));
    ++next;
  }
  return out;
}

DedupResult deduplicate(std::vector<SentenceRecord> records) {
  DedupResult result;
  result.stats.total_sentences = records.size();
  for (const auto& r : records) ++result.stats.per_source_counts[r.source];
  std::unordered_set<std::string_view> seen;
  seen.reserve(records.size());
  std::vector<bool> keep(records.size(), false);
  for (std::size_t i = 0; i < records.size(); ++i) {
    keep[i] = seen.insert(records[i].text).second;
  }
  result.records.reserve(seen.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (keep[i]) result.records.push_back(std::move(records[i]));
  }
  result.stats.distinct_sentences = result.records.size();
  return result;
}

std::vector<LabeledSentence> load_labeled(const fs::path& path, double default_rating_std) {
  const std::string content = io::read_file(path);
  if (const auto bad = utf8::find_invalid(content)) {
    throw ParseError(path.string() + ": invalid UTF-8 at byte offset " + std::to_string(*bad));
  }
  const auto lines = io::split_lines(content);
  if (lines.empty()) throw ParseError(path.string() + ": missing header row", 1);

  const auto header = io::split(lines[0], '\t');
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t col_id = npos, col_text = npos, col_mos = npos, col_std = npos;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string_view h = header[c];
    if (h == "id") col_id = c;
    else if (h == "text") col_text = c;
    else if (h == "mos") col_mos = c;
    else if (h == "rating_std") col_std = c;
  }
  if (col_id == npos || col_text == npos || col_mos == npos) {
    throw ParseError(path.string() + ": header must name columns id, text, mos", 1);
  }

  std::vector<LabeledSentence> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line = i + 1;
    if (lines[i].empty()) continue;
    const auto fields = io::split(lines[i], '\t');
    if (fields.size() != header.size()) {
      throw ParseError(path.string() + ": expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line);
    }
    LabeledSentence s;
    s.id = parse_id(fields[col_id], line);
    s.text = normalize_sentence(fields[col_text]);
    s.mos = parse_double(fields[col_mos], "mos", line);
    if (!(s.mos >= 1.0 && s.mos <= 7.0)) {
      throw ValidationError(path.string() + ": row at line " + std::to_string(line) + ": mos " +
                            std::string(fields[col_mos]) + " outside [1, 7]");
    }
    s.rating_std = col_std == npos ? default_rating_std : parse_double(fields[col_std], "rating_std", line);
    if (!(s.rating_std >= 0.0) || !std::isfinite(s.rating_std)) {
      throw ValidationError(path.string() + ": row at line " + std::to_string(line) +
                            ": rating_std must be a finite value >= 0");
    }
    out.push_back(std::move(s));
  }
  return out;
}

CorpusStore::CorpusStore(std::vector<SentenceRecord> records) : records_(std::move(records)) {
  by_id_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!by_id_.emplace(records_[i].id, i).second) {
      throw ValidationError("duplicate sentence id " + std::to_string(records_[i].id));
    }
  }
}

const SentenceRecord* CorpusStore::find(std::uint64_t id) const {
  const auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

std::uint64_t CorpusStore::next_id() const {
  std::uint64_t next = 0;
  for (const auto& r : records_) next = std::max(next, r.id + 1);
  return next;
}

std::string CorpusStore::to_jsonl() const {
  std::string out;
  for (const auto& r : records_) {
    json obj = {{"id", r.id}, {"text", r.text}, {"source", to_string(r.source)}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

CorpusStore CorpusStore::from_jsonl(std::string_view text) {
  std::vector<SentenceRecord> records;
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      const json obj = json::parse(lines[i]);
      SentenceRecord r;
      r.id = obj.at("id").get<std::uint64_t>();
      r.text = obj.at("text").get<std::string>();
      r.source = parse_source(obj.at("source").get<std::string>());
      r.char_len = utf8::length(r.text);
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(std::string("corpus store: ") + e.what(), i + 1);
    }
  }
  return CorpusStore(std::move(records));
}

IngestResult ingest_all(std::span<const CorpusSpec> specs, std::size_t workers) {
  std::vector<std::vector<SentenceRecord>> parts(specs.size());
  parallel_for(specs.size(), workers, [&](std::size_t i) {
    parts[i] = ingest_corpus(specs[i].path, specs[i].source, specs[i].format, 0);
  });
  // Single commit point: ids follow the order of `specs` regardless of read order.
  std::vector<SentenceRecord> all;
  std::uint64_t next = 0;
  for (auto& part : parts) {
    for (auto& r : part) {
      r.id = next++;
      all.push_back(std::move(r));
    }
  }
  auto dedup = deduplicate(std::move(all));
  return {CorpusStore(std::move(dedup.records)), std::move(dedup.stats)};
}

std::string stats_to_json(const CorpusStats& stats) {
  json per_source = json::object();
  for (const auto& [source, count] : stats.per_source_counts) per_source[std::string(to_string(source))] = count;
  const json doc = {
      {"total_sentences", stats.total_sentences},
      {"distinct_sentences", stats.distinct_sentences},
      {"per_source_counts", per_source},
  };
  return doc.dump(2) + "\n";
}

CorpusStats stats_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    CorpusStats s;
    s.total_sentences = doc.at("total_sentences").get<std::size_t>();
    s.distinct_sentences = doc.at("distinct_sentences").get<std::size_t>();
    for (const auto& [tag, count] : doc.at("per_source_counts").items()) {
      s.per_source_counts[parse_source(tag)] = count.get<std::size_t>();
    }
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("corpus stats: ") + e.what());
  }
}

}  // namespace sentcx
