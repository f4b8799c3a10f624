#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include "sentcx/errors.hpp"
#include "sentcx/featurize.hpp"
#include "sentcx/rng.hpp"
#include "support/support.hpp"

using namespace sentcx;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
}

double block_norm(const std::vector<double>& v, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

const std::vector<std::string> kWords = {"der",   "Hund",    "läuft",  "schnell", "über",  "die",   "Straße",
                                         "Stadt", "Berlin",  "baut",   "eine",    "neue",  "Brücke", "2024",
                                         "weil",  "Wasser",  "Meer",   "Größe",   "Kind",  "liest", "Buch",
                                         "und",   "Zeitung", "heute",  "gestern", "Wald",  "grüne", "Ärztin"};

std::string random_sentence(Engine& rng, std::size_t min_words, std::size_t max_words) {
  const std::size_t n = min_words + uniform_below(rng, max_words - min_words + 1);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += uniform_below(rng, 6) == 0 ? ", " : " ";
    s += kWords[uniform_below(rng, kWords.size())];
  }
  return s + ".";
}

std::vector<SentenceRecord> random_corpus(Engine& rng, std::size_t n) {
  std::vector<SentenceRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(make_record(i, random_sentence(rng, 2, 20), Source::news));
  return out;
}

}  // namespace

TEST_CASE("fnv1a64 matches reference vectors") {
  const auto doc = nlohmann::json::parse(testsupport::read_text(testsupport::data_dir() / "reference_vectors.json"));
  REQUIRE(doc["fnv1a64"].size() >= 5);
  for (const auto& c : doc["fnv1a64"]) {
    const auto input = c["input"].get<std::string>();
    CAPTURE(input);
    CHECK(fingerprint_hex(fnv1a64(input)) == c["hash"].get<std::string>());
    CHECK(parse_fingerprint_hex(c["hash"].get<std::string>()) == fnv1a64(input));
  }
  CHECK_THROWS_AS(parse_fingerprint_hex("12"), ParseError);
  CHECK_THROWS_AS(parse_fingerprint_hex("zzzzzzzzzzzzzzzz"), ParseError);
}

TEST_CASE("feature config validation and fingerprint") {
  FeatureConfig c;
  CHECK(c.dimension() == 2054);
  CHECK_NOTHROW(c.validate());
  FeatureConfig d = c;
  CHECK(c.fingerprint() == d.fingerprint());
  d.hashed_dim = 1024;
  CHECK(c.fingerprint() != d.fingerprint());
  d = c;
  d.ngram_max = 6;
  CHECK(c.fingerprint() != d.fingerprint());
  d = c;
  d.surface.pop_back();
  CHECK(c.fingerprint() != d.fingerprint());

  FeatureConfig bad = c;
  bad.ngram_min = 4;
  bad.ngram_max = 3;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = c;
  bad.hashed_dim = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = c;
  bad.surface.push_back(SurfaceFeature::char_count);
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("surface values on a hand-counted sentence") {
  FeatureConfig c;
  const auto v = surface_values("die Stadt, und die Stadt 12.", c.surface);
  REQUIRE(v.size() == 6);
  CHECK(v[0] == 28.0);  // characters
  CHECK(v[1] == 6.0);   // tokens
  CHECK(v[2] == doctest::Approx(23.0 / 6.0));
  CHECK(v[3] == 1.0);  // commas
  CHECK(v[4] == doctest::Approx(2.0 / 28.0));
  CHECK(v[5] == doctest::Approx(5.0 / 6.0));  // "die" repeats; "Stadt," and "Stadt" differ
  const auto e = surface_values("", c.surface);
  for (double x : e) CHECK(x == 0.0);
}

TEST_CASE("truncate_tokens keeps the first tokens") {
  CHECK(truncate_tokens("a b c d", 2) == "a b");
  CHECK(truncate_tokens("a b", 5) == "a b");
  CHECK(truncate_tokens("", 3) == "");
}

TEST_CASE("fit_feature_stats examples") {
  FeatureConfig c;
  std::vector<SentenceRecord> same(5, make_record(0, "Der Hund läuft.", Source::news));
  const auto s = fit_feature_stats(same, c);
  for (double sd : s.stddev) CHECK(sd == kStdFloor);

  const std::vector<SentenceRecord> two = {make_record(0, std::string(10, 'a'), Source::news),
                                           make_record(1, std::string(30, 'b'), Source::news)};
  CHECK(fit_feature_stats(two, c).mean[0] == doctest::Approx(20.0).epsilon(1e-15));

  CHECK_THROWS_AS(fit_feature_stats(std::vector<SentenceRecord>{}, c), ValidationError);
}

TEST_CASE("fit_feature_stats matches a two-pass oracle") {
  Engine rng(11);
  const auto corpus = random_corpus(rng, 1000);
  FeatureConfig c;
  const auto stats = fit_feature_stats(corpus, c);
  for (std::size_t j = 0; j < c.surface_dim(); ++j) {
    std::vector<double> col;
    for (const auto& r : corpus) col.push_back(surface_values(truncate_tokens(r.text, c.max_tokens), c.surface)[j]);
    CHECK(testsupport::rel_diff(stats.mean[j], testsupport::two_pass_mean(col)) <= 1e-12);
    CHECK(testsupport::rel_diff(stats.stddev[j], std::max(testsupport::two_pass_std(col), kStdFloor)) <= 1e-12);
  }
  CHECK(stats.fingerprint == c.fingerprint());
}

TEST_CASE("embed: empty input, determinism and self-cosine") {
  Engine rng(3);
  const auto stats = fit_feature_stats(random_corpus(rng, 200), FeatureConfig{});
  const auto e = embed("", stats);
  REQUIRE(e.size() == stats.config.dimension());
  CHECK(block_norm(e, stats.config.hashed_dim) == 0.0);
  const double scale = 1.0 / std::sqrt(6.0);
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(e[stats.config.hashed_dim + j] == doctest::Approx((0.0 - stats.mean[j]) / stats.stddev[j] * scale));
  }
  for (int t = 0; t < 50; ++t) {
    const auto s = random_sentence(rng, 1, 30);
    const auto a = embed(s, stats);
    CHECK(a == embed(s, stats));
    CHECK(cosine(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("hashed block has unit norm regardless of length") {
  Engine rng(5);
  for (const FeatureConfig& c : {FeatureConfig{}, FeatureConfig{64, 2, 4, 128, FeatureConfig{}.surface},
                                 FeatureConfig{16, 3, 6, 4, FeatureConfig{}.surface}}) {
    std::vector<double> out(c.hashed_dim);
    for (const std::string s : {"a", "ab", "äöü", "x y"}) {
      hashed_ngrams(s, c, out);
      CHECK(block_norm(out, out.size()) == doctest::Approx(1.0).epsilon(1e-14));
    }
    for (int t = 0; t < 200; ++t) {
      hashed_ngrams(truncate_tokens(random_sentence(rng, 1, 200), c.max_tokens), c, out);
      CHECK(block_norm(out, out.size()) == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("fingerprint mismatch is detected") {
  Engine rng(9);
  const auto corpus = random_corpus(rng, 50);
  const auto a = fit_feature_stats(corpus, FeatureConfig{});
  FeatureConfig other;
  other.hashed_dim = 1024;
  const auto b = fit_feature_stats(corpus, other);
  CHECK_THROWS_AS(embed("Der Hund.", b, a.fingerprint), ConfigMismatchError);
  CHECK_NOTHROW(embed("Der Hund.", a, a.fingerprint));

  FeatureStats tampered = a;
  tampered.fingerprint ^= 1;
  CHECK_THROWS_AS(embed("Der Hund.", tampered), ConfigMismatchError);
  CHECK_THROWS_AS(tampered.check_consistent(), ConfigMismatchError);
  FeatureStats short_stats = a;
  short_stats.mean.pop_back();
  CHECK_THROWS_AS(embed("Der Hund.", short_stats), ConfigMismatchError);
}

TEST_CASE("feature stats JSON round-trip") {
  Engine rng(13);
  const auto a = fit_feature_stats(random_corpus(rng, 100), FeatureConfig{1024, 2, 4, 64, FeatureConfig{}.surface});
  const auto b = FeatureStats::from_json(a.to_json());
  CHECK(b.config == a.config);
  CHECK(b.mean == a.mean);
  CHECK(b.stddev == a.stddev);
  CHECK(b.fingerprint == a.fingerprint);
  CHECK_THROWS_AS(FeatureStats::from_json("{"), ParseError);
}

TEST_CASE("embed_batch equals per-sentence embed for any worker count") {
  Engine rng(17);
  const auto stats = fit_feature_stats(random_corpus(rng, 100), FeatureConfig{});
  std::vector<std::string> texts;
  for (int i = 0; i < 40; ++i) texts.push_back(random_sentence(rng, 1, 25));
  const auto m1 = embed_batch(texts, stats, 1);
  const auto m4 = embed_batch(texts, stats, 4);
  CHECK(m1.values == m4.values);
  CHECK(m1.fingerprint == stats.fingerprint);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto v = embed(texts[i], stats);
    for (std::size_t j = 0; j < v.size(); ++j) REQUIRE(m1.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == v[j]);
  }
}

TEST_CASE("similar sentences are closer than unrelated ones") {
  Engine rng(23);
  const auto stats = fit_feature_stats(random_corpus(rng, 500), FeatureConfig{});
  int wins = 0, trials = 0;
  while (trials < 1000) {
    const std::string s = random_sentence(rng, 3, 15);
    const std::string r = random_sentence(rng, 3, 15);
    if (r.size() == s.size() + 1 || r == s) continue;
    const std::string s2 = s + "x";
    const auto es = embed(s, stats);
    wins += cosine(es, embed(s2, stats)) > cosine(es, embed(r, stats)) ? 1 : 0;
    ++trials;
  }
  CHECK(wins >= 950);
}
