#include "tag/caption_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "tag/dense_features.hpp"
#include "tag/error.hpp"
#include "tag/segmenter.hpp"

namespace tag {
namespace {

constexpr char kPostingsMagic[8] = {'T', 'A', 'G', 'P', 'O', 'S', 'T', '1'};
constexpr int kManifestVersion = 1;

bool ranks_before(const Hit& a, const Hit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.row < b.row;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + 4 > bytes.size()) throw FormatError("postings", "truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

std::size_t CaptionDatabase::searchable() const {
  return static_cast<std::size_t>(std::count(excluded.begin(), excluded.end(), false));
}

CaptionDatabase build_database(AlignedTextTable table) {
  if (table.empty()) throw InputError("caption database is empty");
  if (table.dim == 0) throw FormatError("dims", "caption embeddings have zero width");
  CaptionDatabase db;
  db.dim = table.dim;
  db.records = std::move(table.records);
  db.embeddings = std::move(table.embeddings);
  db.excluded.assign(db.records.size(), false);
  for (float v : db.embeddings) {
    if (!std::isfinite(v)) throw InputError("non-finite caption embedding value");
  }
  for (std::size_t r : l2_normalize_rows(db.embeddings, db.dim)) {
    db.excluded[r] = true;
    db.warnings.push_back("caption " + std::to_string(r) +
                          " has a zero embedding; excluded from search");
  }
  if (db.searchable() == 0) throw InputError("every caption embedding is zero");
  return db;
}

IndexKind parse_index_kind(const std::string& name) {
  if (name == "exact") return IndexKind::kExact;
  if (name == "ivf") return IndexKind::kInvertedLists;
  throw ParameterError("unknown index kind '" + name + "' (expected exact or ivf)");
}

std::string to_string(IndexKind kind) {
  return kind == IndexKind::kExact ? "exact" : "ivf";
}

CaptionIndex::CaptionIndex(std::shared_ptr<const CaptionDatabase> db,
                           const IndexOptions& options)
    : db_(std::move(db)), kind_(options.kind), seed_(options.seed) {
  if (!db_) throw InternalError("CaptionIndex: null database");
  if (kind_ == IndexKind::kExact) return;

  std::vector<std::uint32_t> ids;
  for (std::size_t i = 0; i < db_->size(); ++i) {
    if (!db_->excluded[i]) ids.push_back(static_cast<std::uint32_t>(i));
  }
  const std::size_t n = ids.size();
  std::size_t lists = options.lists;
  if (lists == 0) lists = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  if (lists > n) {
    throw ParameterError("index: " + std::to_string(lists) + " lists for " +
                         std::to_string(n) + " searchable rows");
  }

  std::vector<float> rows;
  rows.reserve(n * db_->dim);
  for (auto id : ids) {
    const auto r = db_->row(id);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  KMeansOptions km;
  km.seed = options.seed;
  km.workers = options.workers;
  KMeansResult coarse = kmeans_rows(rows, db_->dim, lists, km);
  for (auto& w : coarse.warnings) warnings_.push_back("coarse quantizer: " + w);

  centroids_.resize(coarse.centers.size());
  std::transform(coarse.centers.begin(), coarse.centers.end(), centroids_.begin(),
                 [](double v) { return static_cast<float>(v); });
  postings_.assign(coarse.k, {});
  for (std::size_t i = 0; i < n; ++i) postings_[coarse.labels[i]].push_back(ids[i]);

  set_probe_count(options.probe == 0 ? (postings_.size() + 7) / 8 : options.probe);
}

CaptionIndex::CaptionIndex(std::shared_ptr<const CaptionDatabase> db, std::uint64_t seed,
                           std::vector<float> centroids,
                           std::vector<std::vector<std::uint32_t>> postings, std::size_t probe)
    : db_(std::move(db)),
      kind_(IndexKind::kInvertedLists),
      seed_(seed),
      centroids_(std::move(centroids)),
      postings_(std::move(postings)) {
  if (!db_) throw InternalError("CaptionIndex: null database");
  if (postings_.empty()) throw FormatError("lists", "inverted index has no lists");
  if (centroids_.size() != postings_.size() * db_->dim) {
    throw FormatError("centroids", "centroid matrix does not match list count and width");
  }
  std::vector<bool> seen(db_->size(), false);
  for (const auto& list : postings_) {
    for (auto id : list) {
      if (id >= db_->size() || seen[id] || db_->excluded[id]) {
        throw FormatError("postings", "posting lists do not partition the searchable rows");
      }
      seen[id] = true;
    }
  }
  for (std::size_t i = 0; i < db_->size(); ++i) {
    if (!db_->excluded[i] && !seen[i]) {
      throw FormatError("postings", "row " + std::to_string(i) + " missing from posting lists");
    }
  }
  set_probe_count(probe);
}

void CaptionIndex::set_probe_count(std::size_t probe) {
  if (kind_ == IndexKind::kExact) return;
  if (probe < 1 || probe > postings_.size()) {
    throw ParameterError("index: probe count " + std::to_string(probe) + " not in 1.." +
                         std::to_string(postings_.size()));
  }
  probe_ = probe;
}

std::vector<std::uint32_t> CaptionIndex::probed_lists(std::span<const double> query) const {
  const std::size_t L = postings_.size(), D = db_->dim;
  std::vector<std::pair<double, std::uint32_t>> order(L);
  for (std::size_t l = 0; l < L; ++l) {
    double d2 = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      const double diff = query[d] - centroids_[l * D + d];
      d2 += diff * diff;
    }
    order[l] = {d2, static_cast<std::uint32_t>(l)};
  }
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(probe_),
                    order.end());
  std::vector<std::uint32_t> out(probe_);
  for (std::size_t i = 0; i < probe_; ++i) out[i] = order[i].second;
  return out;
}

RetrievalResult CaptionIndex::top_n(std::span<const float> query, std::size_t n) const {
  if (n < 1) throw ParameterError("top_n: n must be >= 1");
  if (query.size() != db_->dim) {
    throw InputError("top_n: query has " + std::to_string(query.size()) +
                     " dims, database has " + std::to_string(db_->dim));
  }
  RetrievalResult result;
  const double norm = l2_norm(query);
  if (norm == 0.0 || !std::isfinite(norm)) {
    result.degenerate = true;
    return result;
  }
  std::vector<double> q(query.size());
  for (std::size_t d = 0; d < q.size(); ++d) q[d] = query[d] / norm;

  auto score = [&](std::uint32_t id) {
    const auto r = db_->row(id);
    double s = 0.0;
    for (std::size_t d = 0; d < q.size(); ++d) s += r[d] * q[d];
    return s;
  };

  std::vector<Hit> candidates;
  if (kind_ == IndexKind::kExact) {
    candidates.reserve(db_->searchable());
    for (std::size_t i = 0; i < db_->size(); ++i) {
      if (!db_->excluded[i]) {
        candidates.push_back({static_cast<std::uint32_t>(i), {}, score(static_cast<std::uint32_t>(i))});
      }
    }
  } else {
    for (auto l : probed_lists(q)) {
      for (auto id : postings_[l]) candidates.push_back({id, {}, score(id)});
    }
  }

  const std::size_t keep = std::min(n, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                    candidates.end(), ranks_before);
  candidates.resize(keep);
  for (auto& h : candidates) {
    h.text = db_->records[h.row].text;
    h.score = std::clamp(h.score, -1.0, 1.0);
  }
  result.hits = std::move(candidates);
  return result;
}

std::vector<std::uint8_t> encode_postings(const std::vector<std::vector<std::uint32_t>>& lists) {
  std::vector<std::uint8_t> out(std::begin(kPostingsMagic), std::end(kPostingsMagic));
  put_u32(out, static_cast<std::uint32_t>(lists.size()));
  for (const auto& list : lists) {
    put_u32(out, static_cast<std::uint32_t>(list.size()));
    std::uint32_t prev = 0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (i > 0 && list[i] <= prev) throw InternalError("posting list not strictly ascending");
      put_u32(out, i == 0 ? list[i] : list[i] - prev);
      prev = list[i];
    }
  }
  return out;
}

std::vector<std::vector<std::uint32_t>> decode_postings(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kPostingsMagic) ||
      std::memcmp(bytes.data(), kPostingsMagic, sizeof(kPostingsMagic)) != 0) {
    throw FormatError("magic", "expected TAGPOST1");
  }
  std::size_t pos = sizeof(kPostingsMagic);
  const std::uint32_t count = get_u32(bytes, pos);
  if (count > (bytes.size() - pos) / 4) throw FormatError("postings", "list count exceeds file");
  std::vector<std::vector<std::uint32_t>> lists(count);
  for (auto& list : lists) {
    const std::uint32_t len = get_u32(bytes, pos);
    if (len > (bytes.size() - pos) / 4) throw FormatError("postings", "list length exceeds file");
    list.resize(len);
    std::uint64_t acc = 0;
    for (std::uint32_t i = 0; i < len; ++i) {
      const std::uint32_t v = get_u32(bytes, pos);
      if (i > 0 && v == 0) throw FormatError("postings", "zero delta");
      acc = i == 0 ? v : acc + v;
      if (acc > UINT32_MAX) throw FormatError("postings", "id overflow");
      list[i] = static_cast<std::uint32_t>(acc);
    }
  }
  if (pos != bytes.size()) throw FormatError("postings", "trailing bytes");
  return lists;
}

void save_index(const CaptionIndex& index, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const CaptionDatabase& db = index.database();
  save_tensor(Tensor({db.size(), db.dim}, db.embeddings), dir / "database.tens");
  save_records(db.records, dir / "records.jsonl");

  nlohmann::ordered_json m;
  m["version"] = kManifestVersion;
  m["kind"] = to_string(index.kind());
  m["rows"] = db.size();
  m["dim"] = db.dim;
  m["normalized"] = db.normalized;
  m["database"] = "database.tens";
  m["records"] = "records.jsonl";
  std::vector<std::size_t> excluded;
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (db.excluded[i]) excluded.push_back(i);
  }
  m["excluded"] = excluded;
  m["seed"] = index.seed();
  if (index.kind() == IndexKind::kInvertedLists) {
    m["lists"] = index.lists();
    m["probe"] = index.probe_count();
    m["centroids"] = "centroids.tens";
    m["postings"] = "postings.bin";
    save_tensor(Tensor({index.lists(), db.dim}, index.centroids()), dir / "centroids.tens");
    write_file_bytes(dir / "postings.bin", encode_postings(index.postings()));
  }
  std::ofstream out(dir / "index.json", std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + (dir / "index.json").string());
  out << m.dump(2) << '\n';
}

CaptionIndex load_index(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "index.json";
  std::ifstream in(manifest_path);
  if (!in) throw InputError("no index manifest at " + manifest_path.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest", e.what());
  }

  auto field = [&](const char* key) -> const nlohmann::json& {
    if (!m.contains(key)) throw FormatError(key, "missing from index manifest");
    return m[key];
  };
  try {
    auto db = std::make_shared<CaptionDatabase>();
    db->records = load_records(dir / field("records").get<std::string>());
    Tensor emb = load_tensor(dir / field("database").get<std::string>());
    if (emb.rank() != 2) throw FormatError("database", "not a matrix");
    if (emb.dim(0) != db->records.size()) {
      throw AlignmentError(db->records.size(), static_cast<std::size_t>(emb.dim(0)));
    }
    if (emb.dim(0) != field("rows").get<std::size_t>() ||
        emb.dim(1) != field("dim").get<std::size_t>()) {
      throw FormatError("rows", "database shape disagrees with manifest");
    }
    db->dim = static_cast<std::size_t>(emb.dim(1));
    db->embeddings = std::move(emb.values);
    db->normalized = field("normalized").get<bool>();
    db->excluded.assign(db->records.size(), false);
    for (auto id : field("excluded").get<std::vector<std::size_t>>()) {
      if (id >= db->records.size()) throw FormatError("excluded", "row id out of range");
      db->excluded[id] = true;
    }
    const auto seed = field("seed").get<std::uint64_t>();
    const IndexKind kind = parse_index_kind(field("kind").get<std::string>());
    if (kind == IndexKind::kExact) {
      IndexOptions opt;
      opt.kind = kind;
      opt.seed = seed;
      return CaptionIndex(std::move(db), opt);
    }
    Tensor centroids = load_tensor(dir / field("centroids").get<std::string>());
    auto postings = decode_postings(read_file_bytes(dir / field("postings").get<std::string>()));
    if (postings.size() != field("lists").get<std::size_t>()) {
      throw FormatError("lists", "manifest list count disagrees with postings file");
    }
    return CaptionIndex(std::move(db), seed, std::move(centroids.values), std::move(postings),
                        field("probe").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest", e.what());
  } catch (const ParameterError& e) {
    throw FormatError("manifest", e.what());
  }
}

}  // namespace tag
