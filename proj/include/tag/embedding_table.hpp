#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tag/tensor_store.hpp"

namespace tag {

/// Key -> unit-norm embedding lookup built from an aligned text table, where
/// each record's text is the key. Rows are normalized on construction.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(AlignedTextTable table);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }
  bool contains(std::string_view key) const { return find(key).has_value(); }
  std::optional<std::span<const float>> find(std::string_view key) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> keys_;
  std::vector<float> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// CLIP text embeddings of normalized vocabulary words. Every key must
/// already be in the form produced by the word pipeline's standardize stage.
class WordEmbeddingTable : public EmbeddingTable {
 public:
  WordEmbeddingTable() = default;
  explicit WordEmbeddingTable(AlignedTextTable table);
};

/// Sentence embeddings of predicted words and ground-truth class names.
class SentenceEmbeddingTable : public EmbeddingTable {
 public:
  using EmbeddingTable::EmbeddingTable;
};

}  // namespace tag
