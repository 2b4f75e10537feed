#pragma once

// Binary tensor container shared with the feature extractor.
//
// Layout (all integers little-endian):
//   offset 0   8 bytes   magic "TAGTENS1"
//   offset 8   u8        dtype (0 = f32 little-endian)
//   offset 9   u8        ndim, 1..3
//   offset 10  ndim x u64 dims, each >= 1
//   then       prod(dims) x 4 bytes row-major payload
// Nothing may follow the payload.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tag {

inline constexpr char kTensorMagic[8] = {'T', 'A', 'G', 'T', 'E', 'N', 'S', '1'};
inline constexpr std::uint8_t kDtypeF32 = 0;
inline constexpr std::size_t kMaxTensorRank = 3;

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> values;

  Tensor() = default;
  Tensor(std::vector<std::uint64_t> dims, std::vector<float> values);

  std::size_t rank() const { return dims.size(); }
  std::uint64_t dim(std::size_t i) const { return dims.at(i); }
  std::size_t size() const { return values.size(); }

  /// Row `r` of a rank-2 tensor.
  std::span<const float> row(std::size_t r) const;

  bool operator==(const Tensor&) const = default;
};

/// Throws FormatError naming the field ("magic", "dtype", "ndim", "dims",
/// "payload") when the bytes do not follow the layout above.
Tensor decode_tensor(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);

Tensor load_tensor(const std::filesystem::path& path);
void save_tensor(const Tensor& tensor, const std::filesystem::path& path);

struct TextRecord {
  std::uint64_t id = 0;
  std::string text;
  std::string source;

  bool operator==(const TextRecord&) const = default;
};

/// Records paired with an N x D embedding matrix; row i belongs to record i.
struct AlignedTextTable {
  std::vector<TextRecord> records;
  std::size_t dim = 0;
  std::vector<float> embeddings;  // N x dim, row-major

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  std::span<const float> embedding(std::size_t i) const {
    return {embeddings.data() + i * dim, dim};
  }
};

/// Records file: one JSON object per line, {"id":..,"text":..,"source":..}.
/// Ids must run 0..N-1 in file order. An empty records file yields an empty
/// table and the embeddings file is not consulted.
AlignedTextTable load_text_table(const std::filesystem::path& records_path,
                                 const std::filesystem::path& embeddings_path);
void save_text_table(const AlignedTextTable& table,
                     const std::filesystem::path& records_path,
                     const std::filesystem::path& embeddings_path);

std::vector<TextRecord> load_records(const std::filesystem::path& path);
void save_records(std::span<const TextRecord> records,
                  const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);

}  // namespace tag
