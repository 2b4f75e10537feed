#include "tag/embedding_table.hpp"

#include <cmath>

#include "tag/dense_features.hpp"
#include "tag/error.hpp"
#include "tag/word_pipeline.hpp"

namespace tag {

EmbeddingTable::EmbeddingTable(AlignedTextTable table)
    : dim_(table.dim), rows_(std::move(table.embeddings)) {
  keys_.reserve(table.size());
  for (auto& r : table.records) {
    if (!index_.emplace(r.text, keys_.size()).second) {
      throw FormatError("text", "duplicate embedding key '" + r.text + "'");
    }
    keys_.push_back(std::move(r.text));
  }
  for (float v : rows_) {
    if (!std::isfinite(v)) throw FormatError("payload", "non-finite embedding value");
  }
  const auto zero = l2_normalize_rows(rows_, dim_);
  if (!zero.empty()) {
    throw FormatError("payload", "zero embedding for '" + keys_[zero.front()] + "'");
  }
}

std::optional<std::span<const float>> EmbeddingTable::find(std::string_view key) const {
  const auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return std::span<const float>(rows_.data() + it->second * dim_, dim_);
}

WordEmbeddingTable::WordEmbeddingTable(AlignedTextTable table)
    : EmbeddingTable(std::move(table)) {
  for (const auto& key : keys()) {
    if (!is_normalized_word(key)) {
      throw FormatError("text", "word table key '" + key + "' is not a normalized word");
    }
  }
}

}  // namespace tag
