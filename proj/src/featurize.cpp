#include "sentcx/featurize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "sentcx/errors.hpp"
#include "sentcx/parallel.hpp"
#include "sentcx/unicode.hpp"

namespace sentcx {

using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, 6> kSurfaceNames = {
    "char_count", "token_count", "mean_token_length", "comma_count", "digit_ratio", "type_token_ratio",
};

// Boundary markers wrapped around a sentence before n-gram extraction, so that
// every non-empty sentence yields at least one trigram.
constexpr char32_t kBegin = 0x0002;
constexpr char32_t kEnd = 0x0003;

}  // namespace

std::string_view to_string(SurfaceFeature f) { return kSurfaceNames[static_cast<std::size_t>(f)]; }

SurfaceFeature parse_surface_feature(std::string_view name) {
  for (std::size_t i = 0; i < kSurfaceNames.size(); ++i) {
    if (kSurfaceNames[i] == name) return static_cast<SurfaceFeature>(i);
  }
  throw ValidationError("unknown surface feature '" + std::string(name) + "'");
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fingerprint_hex(std::uint64_t fp) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[fp & 0xF];
    fp >>= 4;
  }
  return out;
}

std::uint64_t parse_fingerprint_hex(std::string_view hex) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), v, 16);
  if (hex.size() != 16 || ec != std::errc() || ptr != hex.data() + hex.size()) {
    throw ParseError("malformed fingerprint '" + std::string(hex) + "'");
  }
  return v;
}

void FeatureConfig::validate() const {
  if (hashed_dim == 0) throw ValidationError("hashed_dim must be positive");
  if (ngram_min == 0 || ngram_max < ngram_min) throw ValidationError("n-gram range must satisfy 1 <= min <= max");
  if (max_tokens == 0) throw ValidationError("max_tokens must be positive");
  if (surface.empty()) throw ValidationError("at least one surface feature is required");
  std::unordered_set<SurfaceFeature> seen;
  for (auto f : surface) {
    if (!seen.insert(f).second) throw ValidationError("duplicate surface feature " + std::string(to_string(f)));
  }
}

std::string FeatureConfig::canonical() const {
  std::string s = "sentcx-features/v1;hash=fnv1a64,bucket=mod,sign=bit63;pad=U+0002/U+0003";
  s += ";hashed_dim=" + std::to_string(hashed_dim);
  s += ";ngram=" + std::to_string(ngram_min) + "-" + std::to_string(ngram_max);
  s += ";max_tokens=" + std::to_string(max_tokens);
  s += ";surface=";
  for (std::size_t i = 0; i < surface.size(); ++i) {
    if (i) s += ',';
    s += to_string(surface[i]);
  }
  return s;
}

void FeatureStats::check_consistent() const {
  if (config.fingerprint() != fingerprint) {
    throw ConfigMismatchError("feature stats fingerprint " + fingerprint_hex(fingerprint) +
                              " does not match its config (" + fingerprint_hex(config.fingerprint()) + ")");
  }
  if (mean.size() != config.surface_dim() || stddev.size() != config.surface_dim()) {
    throw ConfigMismatchError("feature stats hold " + std::to_string(mean.size()) + " means for " +
                              std::to_string(config.surface_dim()) + " surface features");
  }
}

std::string FeatureStats::to_json() const {
  json features = json::array();
  for (auto f : config.surface) features.push_back(to_string(f));
  const json doc = {
      {"fingerprint", fingerprint_hex(fingerprint)},
      {"config",
       {{"hashed_dim", config.hashed_dim},
        {"ngram_min", config.ngram_min},
        {"ngram_max", config.ngram_max},
        {"max_tokens", config.max_tokens},
        {"surface", features}}},
      {"mean", mean},
      {"std", stddev},
  };
  return doc.dump(2) + "\n";
}

FeatureStats FeatureStats::from_json(std::string_view text) {
  FeatureStats stats;
  try {
    const json doc = json::parse(text);
    const json& c = doc.at("config");
    stats.config.hashed_dim = c.at("hashed_dim").get<std::size_t>();
    stats.config.ngram_min = c.at("ngram_min").get<std::size_t>();
    stats.config.ngram_max = c.at("ngram_max").get<std::size_t>();
    stats.config.max_tokens = c.at("max_tokens").get<std::size_t>();
    stats.config.surface.clear();
    for (const auto& f : c.at("surface")) stats.config.surface.push_back(parse_surface_feature(f.get<std::string>()));
    stats.mean = doc.at("mean").get<std::vector<double>>();
    stats.stddev = doc.at("std").get<std::vector<double>>();
    stats.fingerprint = parse_fingerprint_hex(doc.at("fingerprint").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("feature stats: ") + e.what());
  }
  stats.config.validate();
  stats.check_consistent();
  return stats;
}

std::string_view truncate_tokens(std::string_view text, std::size_t max_tokens) {
  std::size_t tokens = 0;
  bool in_token = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const bool space = text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\n' || text[pos] == '\r';
    if (!space && !in_token) {
      if (tokens == max_tokens) {
        std::size_t end = pos;
        while (end > 0 && (text[end - 1] == ' ' || text[end - 1] == '\t' || text[end - 1] == '\n' ||
                           text[end - 1] == '\r')) {
          --end;
        }
        return text.substr(0, end);
      }
      ++tokens;
    }
    in_token = !space;
    ++pos;
  }
  return text;
}

std::vector<double> surface_values(std::string_view text, std::span<const SurfaceFeature> features) {
  const std::vector<char32_t> cps = utf8::decode(text);
  std::vector<std::u32string_view> tokens;
  std::size_t token_chars = 0;
  std::size_t commas = 0;
  std::size_t digits = 0;
  const std::u32string_view all(cps.data(), cps.size());
  std::size_t start = 0;
  bool in_token = false;
  for (std::size_t i = 0; i <= cps.size(); ++i) {
    const bool boundary = i == cps.size() || utf8::is_whitespace(cps[i]);
    if (i < cps.size()) {
      if (cps[i] == U',') ++commas;
      if (utf8::is_digit(cps[i])) ++digits;
    }
    if (boundary) {
      if (in_token) {
        tokens.push_back(all.substr(start, i - start));
        token_chars += i - start;
      }
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      start = i;
    }
  }
  std::unordered_set<std::u32string_view> types(tokens.begin(), tokens.end());

  const double n_chars = static_cast<double>(cps.size());
  const double n_tokens = static_cast<double>(tokens.size());
  std::vector<double> out;
  out.reserve(features.size());
  for (auto f : features) {
    switch (f) {
      case SurfaceFeature::char_count: out.push_back(n_chars); break;
      case SurfaceFeature::token_count: out.push_back(n_tokens); break;
      case SurfaceFeature::mean_token_length:
        out.push_back(tokens.empty() ? 0.0 : static_cast<double>(token_chars) / n_tokens);
        break;
      case SurfaceFeature::comma_count: out.push_back(static_cast<double>(commas)); break;
      case SurfaceFeature::digit_ratio: out.push_back(cps.empty() ? 0.0 : static_cast<double>(digits) / n_chars); break;
      case SurfaceFeature::type_token_ratio:
        out.push_back(tokens.empty() ? 0.0 : static_cast<double>(types.size()) / n_tokens);
        break;
    }
  }
  return out;
}

void hashed_ngrams(std::string_view text, const FeatureConfig& config, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (text.empty()) return;

  // Padded sentence as UTF-8 plus the byte offset of every code point.
  std::string padded;
  padded.reserve(text.size() + 2);
  std::vector<std::size_t> offsets;
  offsets.reserve(text.size() + 3);
  offsets.push_back(0);
  utf8::append(padded, kBegin);
  for (char32_t cp : utf8::decode(text)) {
    offsets.push_back(padded.size());
    utf8::append(padded, cp);
  }
  offsets.push_back(padded.size());
  utf8::append(padded, kEnd);
  offsets.push_back(padded.size());
  const std::size_t len = offsets.size() - 1;

  const std::string_view bytes = padded;
  const std::uint64_t dim = config.hashed_dim;
  for (std::size_t n = config.ngram_min; n <= config.ngram_max && n <= len; ++n) {
    for (std::size_t i = 0; i + n <= len; ++i) {
      const std::uint64_t h = fnv1a64(bytes.substr(offsets[i], offsets[i + n] - offsets[i]));
      out[h % dim] += (h >> 63) ? -1.0 : 1.0;
    }
  }
  double norm2 = 0.0;
  for (double v : out) norm2 += v * v;
  if (norm2 == 0.0) {
    // Either no n-gram fits or all signed counts cancelled; fall back to a
    // single bucket keyed by the whole sentence.
    const std::uint64_t h = fnv1a64(text);
    out[h % dim] = 1.0;
    return;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : out) v *= inv;
}

FeatureStats fit_feature_stats(std::span<const SentenceRecord> corpus, const FeatureConfig& config) {
  config.validate();
  if (corpus.empty()) throw ValidationError("cannot fit feature stats on an empty corpus");
  const std::size_t k = config.surface_dim();
  std::vector<double> mean(k, 0.0);
  std::vector<double> m2(k, 0.0);
  // Welford, in corpus order.
  double count = 0.0;
  for (const auto& rec : corpus) {
    const auto values = surface_values(truncate_tokens(rec.text, config.max_tokens), config.surface);
    count += 1.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double delta = values[j] - mean[j];
      mean[j] += delta / count;
      m2[j] += delta * (values[j] - mean[j]);
    }
  }
  FeatureStats stats;
  stats.config = config;
  stats.mean = std::move(mean);
  stats.stddev.resize(k);
  for (std::size_t j = 0; j < k; ++j) stats.stddev[j] = std::max(std::sqrt(m2[j] / count), kStdFloor);
  stats.fingerprint = config.fingerprint();
  return stats;
}

namespace {

void embed_into(std::string_view text, const FeatureStats& stats, std::span<double> out) {
  const FeatureConfig& cfg = stats.config;
  const std::string_view cut = truncate_tokens(text, cfg.max_tokens);
  hashed_ngrams(cut, cfg, out.subspan(0, cfg.hashed_dim));
  const auto raw = surface_values(cut, cfg.surface);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.surface_dim()));
  for (std::size_t j = 0; j < raw.size(); ++j) {
    out[cfg.hashed_dim + j] = (raw[j] - stats.mean[j]) / stats.stddev[j] * scale;
  }
}

}  // namespace

FeatureVector embed(std::string_view text, const FeatureStats& stats) {
  stats.check_consistent();
  FeatureVector v(stats.config.dimension());
  embed_into(text, stats, v);
  return v;
}

FeatureVector embed(std::string_view text, const FeatureStats& stats, std::uint64_t expected_fingerprint) {
  if (stats.fingerprint != expected_fingerprint) {
    throw ConfigMismatchError("feature config " + fingerprint_hex(stats.fingerprint) + " used where " +
                              fingerprint_hex(expected_fingerprint) + " is expected");
  }
  return embed(text, stats);
}

FeatureMatrix embed_batch(std::span<const std::string> texts, const FeatureStats& stats, std::size_t workers) {
  stats.check_consistent();
  FeatureMatrix m;
  m.fingerprint = stats.fingerprint;
  const auto dim = static_cast<Eigen::Index>(stats.config.dimension());
  m.values.resize(static_cast<Eigen::Index>(texts.size()), dim);
  parallel_for(texts.size(), workers, [&](std::size_t i) {
    embed_into(texts[i], stats, std::span<double>(m.values.row(static_cast<Eigen::Index>(i)).data(),
                                                  static_cast<std::size_t>(dim)));
  });
  return m;
}

}  // namespace sentcx
