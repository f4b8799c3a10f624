#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace sentcx {

namespace fs = std::filesystem;

struct Hit {
  std::uint64_t id = 0;
  double similarity = 0.0;

  bool operator==(const Hit&) const = default;
};

// Descending similarity, ascending id on ties.
inline bool hit_before(const Hit& a, const Hit& b) {
  return a.similarity != b.similarity ? a.similarity > b.similarity : a.id < b.id;
}

using IdSet = std::unordered_set<std::uint64_t>;

// Immutable exact cosine-similarity index. Vectors are stored as 32-bit floats;
// queries are rounded to float before scoring, so a stored vector queried with
// itself scores 1.
class VectorIndex {
 public:
  VectorIndex() = default;

  // `vectors` is row-major, ids.size() * dimension entries. Throws
  // ValidationError on size mismatch or duplicate ids.
  static VectorIndex build(std::vector<std::uint64_t> ids, std::vector<float> vectors, std::size_t dimension,
                           std::uint64_t fingerprint);
  static VectorIndex build(std::span<const std::pair<std::uint64_t, std::vector<double>>> entries,
                           std::size_t dimension, std::uint64_t fingerprint);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return ids_.size(); }
  std::uint64_t fingerprint() const { return fingerprint_; }
  std::span<const std::uint64_t> ids() const { return ids_; }
  std::span<const float> vector(std::size_t row) const {
    return std::span<const float>(data_).subspan(row * dimension_, dimension_);
  }

  // Highest-cosine hits, at most k, ids in `exclude` skipped. A zero query
  // yields no hits. Throws ValidationError for k == 0 or a dimension mismatch.
  std::vector<Hit> top_k(std::span<const double> query, std::size_t k, const IdSet* exclude = nullptr) const;

  std::vector<std::vector<Hit>> top_k_batch(std::span<const std::vector<double>> queries, std::size_t k,
                                            const IdSet* exclude = nullptr, std::size_t workers = 1) const;

  // Little-endian binary layout:
  //   magic "SCXINDEX" | u32 version | u32 dimension | u64 count | u64 fingerprint
  //   | u64 ids[count] | f32 vectors[count * dimension] | u64 fnv1a64(everything before)
  std::string serialize() const;
  static VectorIndex deserialize(std::string_view bytes);

 private:
  std::size_t dimension_ = 0;
  std::uint64_t fingerprint_ = 0;
  std::vector<std::uint64_t> ids_;
  std::vector<float> data_;
  std::vector<double> norms_;
};

struct IndexCheck {
  bool ok = false;
  std::string message;
  std::uint32_t version = 0;
  std::size_t dimension = 0;
  std::size_t count = 0;
  std::uint64_t fingerprint = 0;
};

// Header, size and checksum validation without building the index.
IndexCheck verify_index_bytes(std::string_view bytes);

}  // namespace sentcx
