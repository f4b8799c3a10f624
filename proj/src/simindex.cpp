#include "sentcx/simindex.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "sentcx/errors.hpp"
#include "sentcx/featurize.hpp"
#include "sentcx/parallel.hpp"

namespace sentcx {

namespace {

constexpr char kMagic[8] = {'S', 'C', 'X', 'I', 'N', 'D', 'E', 'X'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderSize = 8 + 4 + 4 + 8 + 8;

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::string_view in, std::size_t offset) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<U>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return std::bit_cast<T>(bits);
}

double norm_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

}  // namespace

VectorIndex VectorIndex::build(std::vector<std::uint64_t> ids, std::vector<float> vectors, std::size_t dimension,
                               std::uint64_t fingerprint) {
  if (dimension == 0 && !ids.empty()) throw ValidationError("index dimension must be positive");
  if (vectors.size() != ids.size() * dimension) {
    throw ValidationError("index expects " + std::to_string(ids.size() * dimension) + " values, got " +
                          std::to_string(vectors.size()));
  }
  IdSet seen;
  seen.reserve(ids.size());
  for (auto id : ids) {
    if (!seen.insert(id).second) throw ValidationError("duplicate id " + std::to_string(id) + " in index input");
  }
  VectorIndex idx;
  idx.dimension_ = dimension;
  idx.fingerprint_ = fingerprint;
  idx.ids_ = std::move(ids);
  idx.data_ = std::move(vectors);
  idx.norms_.resize(idx.ids_.size());
  for (std::size_t r = 0; r < idx.ids_.size(); ++r) idx.norms_[r] = norm_of(idx.vector(r));
  return idx;
}

VectorIndex VectorIndex::build(std::span<const std::pair<std::uint64_t, std::vector<double>>> entries,
                               std::size_t dimension, std::uint64_t fingerprint) {
  std::vector<std::uint64_t> ids;
  std::vector<float> data;
  ids.reserve(entries.size());
  data.reserve(entries.size() * dimension);
  for (const auto& [id, v] : entries) {
    if (v.size() != dimension) {
      throw ValidationError("vector for id " + std::to_string(id) + " has dimension " + std::to_string(v.size()) +
                            ", expected " + std::to_string(dimension));
    }
    ids.push_back(id);
    for (double x : v) data.push_back(static_cast<float>(x));
  }
  return build(std::move(ids), std::move(data), dimension, fingerprint);
}

std::vector<Hit> VectorIndex::top_k(std::span<const double> query, std::size_t k, const IdSet* exclude) const {
  if (k == 0) throw ValidationError("k must be positive");
  if (query.size() != dimension_) {
    throw ValidationError("query dimension " + std::to_string(query.size()) + " does not match index dimension " +
                          std::to_string(dimension_));
  }
  std::vector<float> q(query.size());
  for (std::size_t j = 0; j < query.size(); ++j) q[j] = static_cast<float>(query[j]);
  const double qnorm = norm_of(q);
  if (qnorm == 0.0) return {};

  std::vector<Hit> hits;
  hits.reserve(ids_.size());
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (exclude && exclude->contains(ids_[r])) continue;
    double sim = 0.0;
    if (norms_[r] > 0.0) {
      const float* v = data_.data() + r * dimension_;
      double dot = 0.0;
      for (std::size_t j = 0; j < dimension_; ++j) dot += static_cast<double>(q[j]) * static_cast<double>(v[j]);
      sim = std::clamp(dot / (qnorm * norms_[r]), -1.0, 1.0);
    }
    hits.push_back({ids_[r], sim});
  }
  const std::size_t take = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take), hits.end(), hit_before);
  hits.resize(take);
  return hits;
}

std::vector<std::vector<Hit>> VectorIndex::top_k_batch(std::span<const std::vector<double>> queries, std::size_t k,
                                                       const IdSet* exclude, std::size_t workers) const {
  if (k == 0) throw ValidationError("k must be positive");
  std::vector<std::vector<Hit>> out(queries.size());
  parallel_for(queries.size(), workers, [&](std::size_t i) { out[i] = top_k(queries[i], k, exclude); });
  return out;
}

std::string VectorIndex::serialize() const {
  std::string out;
  out.reserve(kHeaderSize + ids_.size() * 8 + data_.size() * 4 + 8);
  out.append(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dimension_));
  put_le<std::uint64_t>(out, ids_.size());
  put_le<std::uint64_t>(out, fingerprint_);
  for (auto id : ids_) put_le<std::uint64_t>(out, id);
  for (float x : data_) put_le<float>(out, x);
  put_le<std::uint64_t>(out, fnv1a64(out));
  return out;
}

IndexCheck verify_index_bytes(std::string_view bytes) {
  IndexCheck check;
  if (bytes.size() < kHeaderSize + 8) {
    check.message = "file too short for an index header";
    return check;
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    check.message = "bad magic";
    return check;
  }
  check.version = get_le<std::uint32_t>(bytes, 8);
  check.dimension = get_le<std::uint32_t>(bytes, 12);
  check.count = get_le<std::uint64_t>(bytes, 16);
  check.fingerprint = get_le<std::uint64_t>(bytes, 24);
  if (check.version != kVersion) {
    check.message = "unsupported version " + std::to_string(check.version);
    return check;
  }
  const std::size_t expected = kHeaderSize + check.count * 8 + check.count * check.dimension * 4 + 8;
  if (bytes.size() != expected) {
    check.message = "size " + std::to_string(bytes.size()) + " does not match header (expected " +
                    std::to_string(expected) + ")";
    return check;
  }
  const auto stored = get_le<std::uint64_t>(bytes, bytes.size() - 8);
  if (stored != fnv1a64(bytes.substr(0, bytes.size() - 8))) {
    check.message = "checksum mismatch";
    return check;
  }
  check.ok = true;
  check.message = "ok";
  return check;
}

VectorIndex VectorIndex::deserialize(std::string_view bytes) {
  const IndexCheck check = verify_index_bytes(bytes);
  if (!check.ok) throw ParseError("corrupt index: " + check.message);
  std::vector<std::uint64_t> ids(check.count);
  std::size_t off = kHeaderSize;
  for (auto& id : ids) {
    id = get_le<std::uint64_t>(bytes, off);
    off += 8;
  }
  std::vector<float> data(check.count * check.dimension);
  for (auto& x : data) {
    x = get_le<float>(bytes, off);
    off += 4;
  }
  return build(std::move(ids), std::move(data), check.dimension, check.fingerprint);
}

}  // namespace sentcx
