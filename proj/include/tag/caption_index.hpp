#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tag/tensor_store.hpp"

namespace tag {

/// Caption records with unit-length text embeddings. Zero-norm rows are kept
/// in place (ids stay aligned) but excluded from every search.
struct CaptionDatabase {
  std::vector<TextRecord> records;
  std::size_t dim = 0;
  std::vector<float> embeddings;   // N x dim, rows normalized at build time
  std::vector<bool> excluded;      // zero-norm rows
  bool normalized = true;
  std::vector<std::string> warnings;

  std::size_t size() const { return records.size(); }
  std::size_t searchable() const;
  std::span<const float> row(std::size_t i) const {
    return {embeddings.data() + i * dim, dim};
  }
};

CaptionDatabase build_database(AlignedTextTable table);

enum class IndexKind { kExact, kInvertedLists };

IndexKind parse_index_kind(const std::string& name);  // "exact" | "ivf"
std::string to_string(IndexKind kind);

struct IndexOptions {
  IndexKind kind = IndexKind::kExact;
  std::size_t lists = 0;  // 0: ceil(sqrt(N))
  std::size_t probe = 0;  // 0: ceil(lists / 8)
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct Hit {
  std::uint32_t row = 0;
  std::string text;
  double score = 0.0;
};

struct RetrievalResult {
  std::vector<Hit> hits;  // score descending, ties by ascending row id
  bool degenerate = false;  // zero query
};

/// Exact or inverted-lists index over a shared, immutable database.
class CaptionIndex {
 public:
  CaptionIndex(std::shared_ptr<const CaptionDatabase> db, const IndexOptions& options);

  /// Reassembles a persisted inverted-lists index without retraining.
  CaptionIndex(std::shared_ptr<const CaptionDatabase> db, std::uint64_t seed,
               std::vector<float> centroids, std::vector<std::vector<std::uint32_t>> postings,
               std::size_t probe);

  IndexKind kind() const { return kind_; }
  const CaptionDatabase& database() const { return *db_; }
  std::shared_ptr<const CaptionDatabase> database_ptr() const { return db_; }
  std::uint64_t seed() const { return seed_; }

  std::size_t lists() const { return postings_.size(); }
  std::size_t probe_count() const { return probe_; }
  void set_probe_count(std::size_t probe);
  const std::vector<float>& centroids() const { return centroids_; }
  const std::vector<std::vector<std::uint32_t>>& postings() const { return postings_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Top-n rows by cosine to `query`; inverted lists only score rows in the
  /// probe_count lists whose centroids are nearest to the normalized query.
  RetrievalResult top_n(std::span<const float> query, std::size_t n) const;

 private:
  std::vector<std::uint32_t> probed_lists(std::span<const double> query) const;

  std::shared_ptr<const CaptionDatabase> db_;
  IndexKind kind_ = IndexKind::kExact;
  std::uint64_t seed_ = 0;
  std::vector<float> centroids_;  // lists x dim
  std::vector<std::vector<std::uint32_t>> postings_;
  std::size_t probe_ = 1;
  std::vector<std::string> warnings_;
};

/// Posting-list file: "TAGPOST1", u32 list count, then per list a u32 length
/// followed by ascending ids, the first absolute and the rest as deltas.
std::vector<std::uint8_t> encode_postings(const std::vector<std::vector<std::uint32_t>>& lists);
std::vector<std::vector<std::uint32_t>> decode_postings(std::span<const std::uint8_t> bytes);

/// Writes database.tens, records.jsonl, index.json and for inverted lists
/// centroids.tens plus postings.bin into `dir`.
void save_index(const CaptionIndex& index, const std::filesystem::path& dir);
CaptionIndex load_index(const std::filesystem::path& dir);

}  // namespace tag
