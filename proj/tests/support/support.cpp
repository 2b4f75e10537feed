#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "tag/png_io.hpp"

namespace fs = std::filesystem;

namespace tag::testing {

TempDir::TempDir(const std::string& prefix) {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  for (;;) {
    path_ = fs::temp_directory_path() /
            (prefix + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    if (fs::create_directories(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::vector<float> gaussian_rows(std::size_t n, std::size_t dim, std::uint64_t seed, double sigma) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<float> out(n * dim);
  for (auto& v : out) v = static_cast<float>(normal(rng));
  return out;
}

Blobs make_blobs(const std::vector<std::vector<double>>& centres, std::size_t per_blob,
                 double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  Blobs b;
  b.dim = centres.front().size();
  // Interleave blobs so that row order carries no label information.
  for (std::size_t i = 0; i < per_blob; ++i) {
    for (std::size_t c = 0; c < centres.size(); ++c) {
      for (double x : centres[c]) b.rows.push_back(static_cast<float>(x + normal(rng)));
      b.labels.push_back(static_cast<std::uint32_t>(c));
    }
  }
  return b;
}

double adjusted_rand_index(const std::vector<std::uint32_t>& a,
                           const std::vector<std::uint32_t>& b) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> joint;
  std::map<std::uint32_t, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [k, v] : joint) index += c2(v);
  for (const auto& [k, v] : ra) sa += c2(v);
  for (const auto& [k, v] : rb) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  const double max_index = (sa + sb) / 2;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::vector<std::uint32_t> brute_force_top_n(const std::vector<float>& rows, std::size_t dim,
                                             const std::vector<float>& query, std::size_t n) {
  const std::size_t count = rows.size() / dim;
  long double qn = 0;
  for (float q : query) qn += static_cast<long double>(q) * q;
  std::vector<std::pair<long double, std::uint32_t>> scored;
  for (std::size_t r = 0; r < count; ++r) {
    long double d = 0, rn = 0;
    for (std::size_t k = 0; k < dim; ++k) {
      d += static_cast<long double>(rows[r * dim + k]) * query[k];
      rn += static_cast<long double>(rows[r * dim + k]) * rows[r * dim + k];
    }
    scored.emplace_back(d / std::sqrt(rn * qn), static_cast<std::uint32_t>(r));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  std::vector<std::uint32_t> ids;
  for (std::size_t i = 0; i < std::min(n, scored.size()); ++i) ids.push_back(scored[i].second);
  return ids;
}

AlignedTextTable make_table(const std::vector<std::string>& texts, std::size_t dim,
                            std::vector<float> embeddings) {
  AlignedTextTable t;
  for (std::size_t i = 0; i < texts.size(); ++i) t.records.push_back({i, texts[i], ""});
  t.dim = dim;
  t.embeddings = std::move(embeddings);
  return t;
}

std::vector<std::string> word_fixture_captions() {
  return {
      "Two dogs playing on the beach at Swanage.",
      "A dog runs along the beach http://example.com/dog.jpg",
      "beach_day_01.jpg: the dogs and a ball",
      "Swanage beach in summer",
      "A happy dog with a red ball!",
      "www.photos.example/beach sunset over the sea",
      "The dog is sleeping near the sea",
      "Children play with balls on the beach",
      "IMG_2041.PNG sunset",
      "A cat chases the dogs",
  };
}

PosLexicon word_fixture_lexicon() {
  std::istringstream in(
      "a\tdeterminer\nthe\tdeterminer\ntwo\tnumeral\n"
      "on\tpreposition\nat\tpreposition\nalong\tpreposition\nin\tpreposition\n"
      "with\tpreposition\nover\tpreposition\nnear\tpreposition\n"
      "and\tconjunction\nis\tauxiliary\n"
      "playing\tverb\nrun\tverb\nplay\tverb\nsleeping\tverb\nchase\tverb\n"
      "happy\tadjective\nred\tadjective\n"
      "dog\tnoun\nbeach\tnoun\nball\tnoun\nsummer\tnoun\nsunset\tnoun\nsea\tnoun\n"
      "child\tnoun\ncat\tnoun\n");
  return PosLexicon::parse(in, "fixture");
}

std::vector<WordCount> word_fixture_expected() {
  return {{"dog", 6}, {"beach", 4}, {"ball", 3}, {"sea", 2}, {"sunset", 2}, {"swanage", 2}};
}

// ---- synthetic scene

namespace {

constexpr std::size_t kGrid = 32;
constexpr std::size_t kDinoDim = 8;
constexpr std::size_t kClipDim = 16;
constexpr std::size_t kRegions = 5;
constexpr std::size_t kBoundaries[kRegions + 1] = {0, 7, 13, 19, 26, 32};

const char* const kTemplates[10] = {
    "a photo of a {w}",   "the {w} in the morning", "close up of a {w}",
    "{p} seen from above", "a {w} near a wall",      "my favourite {w}",
    "an old {w} at noon", "{w} picture taken today", "stock image of a {w}",
    "a {w} and a bench"};

std::string fill(std::string t, const std::string& w, const std::string& p) {
  for (auto [key, value] : {std::pair<std::string, std::string>{"{w}", w}, {"{p}", p}}) {
    for (auto pos = t.find(key); pos != std::string::npos; pos = t.find(key)) {
      t.replace(pos, key.size(), value);
    }
  }
  return t;
}

}  // namespace

std::size_t SyntheticScene::region_of_column(std::size_t patch_col) const {
  for (std::size_t r = 0; r < kRegions; ++r) {
    if (patch_col < kBoundaries[r + 1]) return r;
  }
  return kRegions - 1;
}

SyntheticScene make_scene() {
  SyntheticScene s;
  s.region_words = {"dog", "grass", "sky", "car", "tree"};
  const std::vector<std::string> plurals = {"dogs", "grass", "skies", "cars", "trees"};
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<float> dino(kDinoDim * kGrid * kGrid), clip(kClipDim * kGrid * kGrid);
  for (std::size_t i = 0; i < kGrid; ++i) {
    for (std::size_t j = 0; j < kGrid; ++j) {
      const std::size_t r = s.region_of_column(j);
      for (std::size_t c = 0; c < kDinoDim; ++c) {
        dino[(c * kGrid + i) * kGrid + j] =
            static_cast<float>((c == r ? 1.0 : 0.0) + 0.01 * normal(rng));
      }
      for (std::size_t c = 0; c < kClipDim; ++c) {
        const double base = c == r ? 1.0 : 0.0;
        const double noise = c >= kRegions ? 0.01 * normal(rng) : 0.0;
        clip[(c * kGrid + i) * kGrid + j] = static_cast<float>(base + noise);
      }
    }
  }
  s.dino = Tensor({kDinoDim, kGrid, kGrid}, std::move(dino));
  s.clip = Tensor({kClipDim, kGrid, kGrid}, std::move(clip));

  for (std::size_t r = 0; r < kRegions; ++r) {
    for (const char* t : kTemplates) {
      s.captions.push_back(fill(t, s.region_words[r], plurals[r]));
      for (std::size_t c = 0; c < kClipDim; ++c) {
        const double base = c == r ? 1.0 : 0.0;
        const double noise = c >= kRegions ? 0.05 * normal(rng) : 0.0;
        s.caption_embeddings.push_back(static_cast<float>(base + noise));
      }
    }
  }

  const std::vector<std::string> vocab = build_vocabulary(s.captions);
  std::vector<float> word_emb;
  for (const auto& w : vocab) {
    const auto it = std::find(s.region_words.begin(), s.region_words.end(), w);
    for (std::size_t c = 0; c < kClipDim; ++c) {
      if (it != s.region_words.end()) {
        word_emb.push_back(c == static_cast<std::size_t>(it - s.region_words.begin()) ? 1.0f : 0.0f);
      } else {
        word_emb.push_back(c >= kRegions ? static_cast<float>(normal(rng)) : 0.0f);
      }
    }
  }
  s.words = make_table(vocab, kClipDim, std::move(word_emb));

  std::vector<float> sent;
  std::vector<ClassEntry> classes;
  for (std::size_t r = 0; r < kRegions; ++r) {
    for (std::size_t c = 0; c < kRegions; ++c) sent.push_back(c == r ? 1.0f : 0.0f);
    classes.push_back({static_cast<std::uint32_t>(r + 1), s.region_words[r]});
  }
  s.sentences = make_table(s.region_words, kRegions, std::move(sent));
  s.classes = ClassList(classes);

  s.gt.height = s.height;
  s.gt.width = s.width;
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < s.width; ++x) {
      s.gt.ids.push_back(static_cast<std::uint32_t>(s.region_of_column(x / s.patch) + 1));
    }
  }

  std::ostringstream lex;
  for (const char* w : {"a", "an", "the", "my"}) lex << w << "\tdeterminer\n";
  for (const char* w : {"of", "in", "from", "above", "near", "at"}) lex << w << "\tpreposition\n";
  for (const char* w : {"close", "old", "favourite"}) lex << w << "\tadjective\n";
  for (const char* w : {"up", "today"}) lex << w << "\tadverb\n";
  for (const char* w : {"seen", "taken"}) lex << w << "\tverb\n";
  lex << "and\tconjunction\n";
  for (const char* w : {"photo", "morning", "wall", "noon", "picture", "stock", "image", "bench"}) {
    lex << w << "\tnoun\n";
  }
  for (const auto& w : s.region_words) lex << w << "\tnoun\n";
  s.lexicon_tsv = lex.str();
  return s;
}

void write_scene(const SyntheticScene& scene, const fs::path& dir, const std::string& name) {
  fs::create_directories(dir / "features");
  fs::create_directories(dir / "gt");
  save_tensor(scene.dino, dir / "features" / (name + ".dino.tens"));
  save_tensor(scene.clip, dir / "features" / (name + ".clip.tens"));
  save_text_table(make_table(scene.captions, 16, scene.caption_embeddings),
                  dir / "captions.jsonl", dir / "captions.tens");
  save_text_table(scene.words, dir / "words.jsonl", dir / "words.tens");
  save_text_table(scene.sentences, dir / "sentences.jsonl", dir / "sentences.tens");
  {
    std::ofstream f(dir / "classes.txt");
    for (const auto& c : scene.classes.entries()) f << c.id << "\t" << c.name << "\n";
  }
  {
    std::ofstream f(dir / "lexicon.tsv");
    f << scene.lexicon_tsv;
  }
  write_index_png(dir / "gt" / (name + ".png"), IndexImage{scene.gt.height, scene.gt.width, scene.gt.ids});
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace tag::testing
