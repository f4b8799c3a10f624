#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sentcx/corpus.hpp"

namespace sentcx {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FeatureVector = std::vector<double>;

enum class SurfaceFeature : std::uint8_t {
  char_count,
  token_count,
  mean_token_length,
  comma_count,
  digit_ratio,
  type_token_ratio,
};

std::string_view to_string(SurfaceFeature f);
SurfaceFeature parse_surface_feature(std::string_view name);

// 64-bit FNV-1a over the raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);

std::string fingerprint_hex(std::uint64_t fp);
std::uint64_t parse_fingerprint_hex(std::string_view hex);

struct FeatureConfig {
  std::size_t hashed_dim = 2048;
  std::size_t ngram_min = 3;
  std::size_t ngram_max = 5;
  // Sentences are cut to this many whitespace tokens before featurization.
  std::size_t max_tokens = 128;
  std::vector<SurfaceFeature> surface = {
      SurfaceFeature::char_count,  SurfaceFeature::token_count, SurfaceFeature::mean_token_length,
      SurfaceFeature::comma_count, SurfaceFeature::digit_ratio, SurfaceFeature::type_token_ratio,
  };

  std::size_t surface_dim() const { return surface.size(); }
  std::size_t dimension() const { return hashed_dim + surface.size(); }
  // Throws ValidationError.
  void validate() const;
  // Canonical text form; the fingerprint is its FNV-1a hash.
  std::string canonical() const;
  std::uint64_t fingerprint() const { return fnv1a64(canonical()); }

  bool operator==(const FeatureConfig&) const = default;
};

struct FeatureStats {
  FeatureConfig config;
  std::vector<double> mean;
  std::vector<double> stddev;
  std::uint64_t fingerprint = 0;

  // Throws ConfigMismatchError if sizes or fingerprint disagree with config.
  void check_consistent() const;
  std::string to_json() const;
  static FeatureStats from_json(std::string_view text);
};

// Rows are embedded sentences; fingerprint names the producing config.
struct FeatureMatrix {
  std::uint64_t fingerprint = 0;
  RowMatrix values;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

inline constexpr double kStdFloor = 1e-9;

// First max_tokens whitespace-separated tokens of a normalized sentence.
std::string_view truncate_tokens(std::string_view text, std::size_t max_tokens);

// Unscaled surface feature values for an already-truncated sentence.
std::vector<double> surface_values(std::string_view text, std::span<const SurfaceFeature> features);

// Accumulates signed hashed character n-grams into `out` (size hashed_dim),
// L2-normalized. `text` must already be truncated.
void hashed_ngrams(std::string_view text, const FeatureConfig& config, std::span<double> out);

FeatureStats fit_feature_stats(std::span<const SentenceRecord> corpus, const FeatureConfig& config);

FeatureVector embed(std::string_view text, const FeatureStats& stats);
// Also checks the stats against the fingerprint the caller expects.
FeatureVector embed(std::string_view text, const FeatureStats& stats, std::uint64_t expected_fingerprint);

FeatureMatrix embed_batch(std::span<const std::string> texts, const FeatureStats& stats, std::size_t workers = 1);

}  // namespace sentcx
