#include "tag/tensor_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "tag/error.hpp"

namespace tag {
namespace {

constexpr std::size_t kHeaderFixed = sizeof(kTensorMagic) + 2;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

float get_f32(const std::uint8_t* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

// Product of dims, or throws if it does not fit the address space.
std::size_t element_count(std::span<const std::uint64_t> dims) {
  std::uint64_t n = 1;
  for (auto d : dims) {
    if (d == 0) throw FormatError("dims", "zero-length dimension");
    if (n > std::numeric_limits<std::uint64_t>::max() / d ||
        n * d > std::numeric_limits<std::size_t>::max() / sizeof(float)) {
      throw FormatError("dims", "element count overflows");
    }
    n *= d;
  }
  return static_cast<std::size_t>(n);
}

}  // namespace

Tensor::Tensor(std::vector<std::uint64_t> d, std::vector<float> v)
    : dims(std::move(d)), values(std::move(v)) {
  if (dims.empty() || dims.size() > kMaxTensorRank) {
    throw FormatError("ndim", "rank " + std::to_string(dims.size()) + " not in 1..3");
  }
  if (element_count(dims) != values.size()) {
    throw FormatError("payload", "value count does not match dims");
  }
}

std::span<const float> Tensor::row(std::size_t r) const {
  const std::size_t cols = static_cast<std::size_t>(dims.at(1));
  return {values.data() + r * cols, cols};
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kTensorMagic) ||
      std::memcmp(bytes.data(), kTensorMagic, sizeof(kTensorMagic)) != 0) {
    throw FormatError("magic", "expected TAGTENS1");
  }
  if (bytes.size() < kHeaderFixed) throw FormatError("dtype", "truncated header");
  const std::uint8_t dtype = bytes[8];
  if (dtype != kDtypeF32) {
    throw FormatError("dtype", "unsupported code " + std::to_string(dtype));
  }
  const std::uint8_t ndim = bytes[9];
  if (ndim < 1 || ndim > kMaxTensorRank) {
    throw FormatError("ndim", "rank " + std::to_string(ndim) + " not in 1..3");
  }
  const std::size_t header = kHeaderFixed + 8u * ndim;
  if (bytes.size() < header) throw FormatError("dims", "truncated header");

  Tensor t;
  t.dims.resize(ndim);
  for (std::size_t i = 0; i < ndim; ++i) t.dims[i] = get_u64(bytes.data() + kHeaderFixed + 8 * i);
  const std::size_t n = element_count(t.dims);

  const std::size_t payload = bytes.size() - header;
  if (payload / sizeof(float) < n) {
    throw FormatError("payload", "truncated: expected " + std::to_string(n * 4) +
                                     " bytes, found " + std::to_string(payload));
  }
  if (payload != n * sizeof(float)) {
    throw FormatError("payload", "trailing bytes after payload");
  }
  t.values.resize(n);
  const std::uint8_t* p = bytes.data() + header;
  for (std::size_t i = 0; i < n; ++i) t.values[i] = get_f32(p + 4 * i);
  return t;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
  if (tensor.dims.empty() || tensor.dims.size() > kMaxTensorRank) {
    throw FormatError("ndim", "rank " + std::to_string(tensor.dims.size()) + " not in 1..3");
  }
  if (element_count(tensor.dims) != tensor.values.size()) {
    throw FormatError("payload", "value count does not match dims");
  }
  std::vector<std::uint8_t> out(std::begin(kTensorMagic), std::end(kTensorMagic));
  out.reserve(kHeaderFixed + 8 * tensor.dims.size() + 4 * tensor.values.size());
  out.push_back(kDtypeF32);
  out.push_back(static_cast<std::uint8_t>(tensor.dims.size()));
  for (auto d : tensor.dims) put_u64(out, d);
  for (float f : tensor.values) put_f32(out, f);
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw InputError("failed reading " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  return decode_tensor(read_file_bytes(path));
}

void save_tensor(const Tensor& tensor, const std::filesystem::path& path) {
  write_file_bytes(path, encode_tensor(tensor));
}

std::vector<TextRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<TextRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError("records", where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_number_unsigned()) {
      throw FormatError("id", where + ": missing unsigned id");
    }
    if (!j.contains("text") || !j["text"].is_string()) {
      throw FormatError("text", where + ": missing text");
    }
    TextRecord r;
    r.id = j["id"].get<std::uint64_t>();
    r.text = j["text"].get<std::string>();
    if (j.contains("source")) {
      if (!j["source"].is_string()) throw FormatError("source", where + ": not a string");
      r.source = j["source"].get<std::string>();
    }
    if (r.text.empty()) throw FormatError("text", where + ": empty text");
    if (r.id != records.size()) {
      throw FormatError("id", where + ": expected id " + std::to_string(records.size()) +
                                  ", found " + std::to_string(r.id));
    }
    records.push_back(std::move(r));
  }
  return records;
}

void save_records(std::span<const TextRecord> records,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["text"] = r.text;
    j["source"] = r.source;
    out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
  if (!out) throw InputError("failed writing " + path.string());
}

AlignedTextTable load_text_table(const std::filesystem::path& records_path,
                                 const std::filesystem::path& embeddings_path) {
  AlignedTextTable table;
  table.records = load_records(records_path);
  if (table.records.empty()) return table;

  Tensor emb = load_tensor(embeddings_path);
  if (emb.rank() != 2) {
    throw FormatError("dims", embeddings_path.filename().string() + " is not a matrix");
  }
  if (emb.dim(0) != table.records.size()) {
    throw AlignmentError(table.records.size(), static_cast<std::size_t>(emb.dim(0)));
  }
  table.dim = static_cast<std::size_t>(emb.dim(1));
  table.embeddings = std::move(emb.values);
  return table;
}

void save_text_table(const AlignedTextTable& table,
                     const std::filesystem::path& records_path,
                     const std::filesystem::path& embeddings_path) {
  save_records(table.records, records_path);
  if (table.empty()) return;
  save_tensor(Tensor({table.size(), table.dim}, table.embeddings), embeddings_path);
}

}  // namespace tag
