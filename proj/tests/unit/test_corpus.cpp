#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>
#include <unordered_set>

#include "sentcx/corpus.hpp"
#include "sentcx/errors.hpp"
#include "sentcx/rng.hpp"
#include "sentcx/unicode.hpp"
#include "support/support.hpp"

using namespace sentcx;
using testsupport::TempDir;
using testsupport::write_text;

TEST_CASE("normalize_sentence trims and collapses whitespace") {
  CHECK(normalize_sentence("  Der  Hund läuft.\t") == "Der Hund läuft.");
  CHECK(normalize_sentence("") == "");
  CHECK(normalize_sentence(" \t \n ") == "");
}

TEST_CASE("normalize_sentence matches reference NFC and whitespace handling") {
  const auto doc = nlohmann::json::parse(testsupport::read_text(testsupport::data_dir() / "reference_vectors.json"));
  for (const auto& c : doc["nfc"]) {
    const auto input = c["input"].get<std::string>();
    CAPTURE(input);
    CHECK(utf8::nfc(input) == c["nfc"].get<std::string>());
    const std::string norm = normalize_sentence(input);
    CHECK(norm == c["normalized"].get<std::string>());
    CHECK(utf8::length(norm) == c["length"].get<std::size_t>());
  }
}

TEST_CASE("normalize_sentence composes a decomposed umlaut") {
  CHECK(normalize_sentence("a\xCC\x88") == "\xC3\xA4");
}

TEST_CASE("normalize_sentence is idempotent on random mixed input") {
  Engine rng(7);
  const std::vector<std::string> pieces = {"a", "\xCC\x88", " ", "\t", "\xC2\xA0", "\xC3\x9F", "O", "\xE2\x80\x83",
                                           "x", "\xCC\x81", "\xCC\xA7", ",", "1", "\xE5\x9C\x8B"};
  for (int t = 0; t < 500; ++t) {
    std::string s;
    const auto n = uniform_below(rng, 20);
    for (std::uint64_t i = 0; i < n; ++i) s += pieces[uniform_below(rng, pieces.size())];
    const std::string once = normalize_sentence(s);
    CHECK(normalize_sentence(once) == once);
    CHECK((once.empty() || (once.front() != ' ' && once.back() != ' ')));
    CHECK(once.find("  ") == std::string::npos);
  }
}

TEST_CASE("invalid UTF-8 is a hard error") {
  CHECK_THROWS_AS(normalize_sentence("ab\xFF"), ParseError);
  CHECK_THROWS_AS(normalize_sentence("\xC0\xAF"), ParseError);       // overlong
  CHECK_THROWS_AS(normalize_sentence("\xED\xA0\x80"), ParseError);   // surrogate
  TempDir dir;
  write_text(dir / "bad.txt", "gut\nschlecht \xC3\n");
  CHECK_THROWS_AS(ingest_corpus(dir / "bad.txt", Source::news, CorpusFormat::plain_lines), ParseError);
}

TEST_CASE("make_record counts scalar values") {
  const auto r = make_record(4, " Größe  ", Source::klexikon);
  CHECK(r.id == 4);
  CHECK(r.text == "Größe");
  CHECK(r.char_len == 5);
  CHECK(r.source == Source::klexikon);
}

TEST_CASE("ingest_corpus: empty file and blank lines") {
  TempDir dir;
  write_text(dir / "empty.txt", "");
  CHECK(ingest_corpus(dir / "empty.txt", Source::wikipedia, CorpusFormat::plain_lines).empty());

  write_text(dir / "five.txt", "Eins.\n\nZwei.\n   \nDrei.\n");
  const auto recs = ingest_corpus(dir / "five.txt", Source::wikipedia, CorpusFormat::plain_lines, 10);
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].id == 10);
  CHECK(recs[1].id == 11);
  CHECK(recs[2].id == 12);
  CHECK(recs[2].text == "Drei.");
}

TEST_CASE("ingest_corpus: jsonl with whitespace-only records") {
  TempDir dir;
  std::string content;
  std::size_t expected = 0;
  for (int i = 0; i < 100; ++i) {
    const bool blank = i % 10 == 3;
    nlohmann::json o = {{"text", blank ? std::string(" \t ") : "Satz Nummer " + std::to_string(i) + "."}};
    if (i % 4 == 0) o["id"] = 5000 + i;
    content += o.dump() + "\n";
    expected += blank ? 0 : 1;
  }
  write_text(dir / "c.jsonl", content);
  const auto recs = ingest_corpus(dir / "c.jsonl", Source::news, CorpusFormat::jsonl);
  CHECK(recs.size() == expected);
  CHECK(expected == 90);
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(recs[i].id == i);
}

TEST_CASE("ingest_corpus: jsonl source override and errors name the line") {
  TempDir dir;
  write_text(dir / "s.jsonl", "{\"text\": \"A.\", \"source\": \"hurraki\"}\n{\"text\": \"B.\"}\n");
  const auto recs = ingest_corpus(dir / "s.jsonl", Source::news, CorpusFormat::jsonl);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].source == Source::hurraki);
  CHECK(recs[1].source == Source::news);

  write_text(dir / "m.jsonl", "{\"text\": \"A.\"}\n{\"text\": \"B.\"}\n{\"text\": oops}\n");
  try {
    (void)ingest_corpus(dir / "m.jsonl", Source::news, CorpusFormat::jsonl);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  write_text(dir / "n.jsonl", "{\"txt\": \"A.\"}\n");
  CHECK_THROWS_AS(ingest_corpus(dir / "n.jsonl", Source::news, CorpusFormat::jsonl), ParseError);
  CHECK_THROWS_AS(ingest_corpus(dir / "missing.jsonl", Source::news, CorpusFormat::jsonl), IoError);
}

TEST_CASE("deduplicate keeps first occurrences in order") {
  std::vector<SentenceRecord> in = {make_record(0, "a", Source::news), make_record(1, "b", Source::wikipedia),
                                    make_record(2, "a", Source::hurraki)};
  const auto out = deduplicate(in);
  REQUIRE(out.records.size() == 2);
  CHECK(out.records[0].text == "a");
  CHECK(out.records[0].source == Source::news);
  CHECK(out.records[1].text == "b");
  CHECK(out.stats.total_sentences == 3);
  CHECK(out.stats.distinct_sentences == 2);
}

TEST_CASE("deduplicate: 1000 records with 100 planted copies") {
  Engine rng(99);
  std::vector<SentenceRecord> in;
  for (int i = 0; i < 900; ++i) in.push_back(make_record(in.size(), "Satz " + std::to_string(i), Source::news));
  for (int i = 0; i < 100; ++i) {
    const auto src = in[uniform_below(rng, in.size())].text;
    const auto pos = uniform_below(rng, in.size() + 1);
    in.insert(in.begin() + static_cast<std::ptrdiff_t>(pos), make_record(0, src, Source::other));
  }
  for (std::size_t i = 0; i < in.size(); ++i) in[i].id = i;
  const auto out = deduplicate(in);
  CHECK(out.records.size() == 900);

  // Order oracle: first occurrence positions are increasing.
  std::unordered_set<std::string> seen;
  std::vector<std::uint64_t> first_ids;
  for (const auto& r : in) {
    if (seen.insert(r.text).second) first_ids.push_back(r.id);
  }
  REQUIRE(first_ids.size() == out.records.size());
  for (std::size_t i = 0; i < first_ids.size(); ++i) CHECK(out.records[i].id == first_ids[i]);

  const auto again = deduplicate(out.records);
  CHECK(again.records == out.records);
}

TEST_CASE("load_labeled parses rows and validates the scale") {
  TempDir dir;
  write_text(dir / "ok.tsv",
             "id\ttext\tmos\trating_std\n1\tAls Versauerung der Meere wird die Abnahme bezeichnet.\t2.13\t0.4\n"
             "2\tGrenze.\t7.0\t0\n");
  const auto rows = load_labeled(dir / "ok.tsv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].mos == 2.13);
  CHECK(rows[0].rating_std == 0.4);
  CHECK(rows[1].mos == 7.0);

  write_text(dir / "nostd.tsv", "id\ttext\tmos\n1\tEin Satz.\t3.5\n");
  CHECK(load_labeled(dir / "nostd.tsv")[0].rating_std == kDefaultRatingStd);
  CHECK(load_labeled(dir / "nostd.tsv", 0.8)[0].rating_std == 0.8);

  write_text(dir / "high.tsv", "id\ttext\tmos\trating_std\n1\tA.\t3\t0.5\n2\tB.\t7.5\t0.5\n");
  try {
    (void)load_labeled(dir / "high.tsv");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  write_text(dir / "nan.tsv", "id\ttext\tmos\trating_std\n1\tA.\tdrei\t0.5\n");
  CHECK_THROWS_AS(load_labeled(dir / "nan.tsv"), ParseError);
  write_text(dir / "badid.tsv", "id\ttext\tmos\n-x\tA.\t3\n");
  CHECK_THROWS_AS(load_labeled(dir / "badid.tsv"), ParseError);
  write_text(dir / "low.tsv", "id\ttext\tmos\n1\tA.\t0.99\n");
  CHECK_THROWS_AS(load_labeled(dir / "low.tsv"), ValidationError);
}

TEST_CASE("corpus store round-trips through jsonl") {
  CorpusStore store({make_record(3, "Erster Satz.", Source::zeit_online), make_record(7, "Zweiter Satz.", Source::other)});
  const auto text = store.to_jsonl();
  const auto back = CorpusStore::from_jsonl(text);
  REQUIRE(back.size() == 2);
  CHECK(back.records()[0] == store.records()[0]);
  CHECK(back.records()[1] == store.records()[1]);
  CHECK(back.find(7)->text == "Zweiter Satz.");
  CHECK(back.find(4) == nullptr);
  CHECK(back.next_id() == 8);
  CHECK(back.to_jsonl() == text);
  CHECK_THROWS_AS(CorpusStore({make_record(1, "a", Source::news), make_record(1, "b", Source::news)}),
                  ValidationError);
}

TEST_CASE("stats round-trip through JSON") {
  CorpusStats s;
  s.total_sentences = 12;
  s.distinct_sentences = 10;
  s.per_source_counts = {{Source::news, 5}, {Source::hurraki, 7}};
  CHECK(stats_from_json(stats_to_json(s)) == s);
}

TEST_CASE("fixture ingestion matches an independent recount") {
  const auto expected = nlohmann::json::parse(testsupport::read_text(testsupport::fixture_dir() / "expected.json"));
  const auto cfg = nlohmann::json::parse(testsupport::read_text(testsupport::fixture_dir() / "config.json"));
  std::vector<CorpusSpec> specs;
  for (const auto& c : cfg["corpora"]) {
    specs.push_back({testsupport::fixture_dir() / c["path"].get<std::string>(), parse_source(c["source"].get<std::string>()),
                     parse_corpus_format(c["format"].get<std::string>())});
  }
  const auto a = ingest_all(specs, 1);
  const auto b = ingest_all(specs, 4);
  CHECK(a.stats.total_sentences == expected["total_sentences"].get<std::size_t>());
  CHECK(a.stats.distinct_sentences == expected["distinct_sentences"].get<std::size_t>());
  std::size_t sum = 0;
  for (const auto& [tag, count] : expected["per_source_counts"].items()) {
    CHECK(a.stats.per_source_counts.at(parse_source(tag)) == count.get<std::size_t>());
  }
  for (const auto& [src, count] : a.stats.per_source_counts) sum += count;
  CHECK(sum == a.stats.total_sentences);

  std::unordered_set<std::string> texts;
  for (const auto& r : a.store.records()) texts.insert(r.text);
  CHECK(texts.size() == a.store.size());
  CHECK(a.store.size() == a.stats.distinct_sentences);

  // Determinism, independent of worker count.
  CHECK(a.store.to_jsonl() == b.store.to_jsonl());
  CHECK(stats_to_json(a.stats) == stats_to_json(b.stats));

  // Idempotence of dedup on the result.
  std::vector<SentenceRecord> recs(a.store.records().begin(), a.store.records().end());
  CHECK(deduplicate(recs).records == recs);
}
