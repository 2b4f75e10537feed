#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tag/dense_features.hpp"
#include "tag/evaluator.hpp"
#include "tag/tensor_store.hpp"
#include "tag/word_pipeline.hpp"

namespace tag::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "tag-test");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::vector<float> gaussian_rows(std::size_t n, std::size_t dim, std::uint64_t seed,
                                 double sigma = 1.0);

struct Blobs {
  std::size_t dim = 0;
  std::vector<float> rows;
  std::vector<std::uint32_t> labels;
};

/// `per_blob` samples around each centre (centres given row-major).
Blobs make_blobs(const std::vector<std::vector<double>>& centres, std::size_t per_blob,
                 double sigma, std::uint64_t seed);

double adjusted_rand_index(const std::vector<std::uint32_t>& a,
                           const std::vector<std::uint32_t>& b);

/// Ids of the n rows with highest cosine to `query`, ties by ascending id,
/// computed in long double without any library helpers.
std::vector<std::uint32_t> brute_force_top_n(const std::vector<float>& rows, std::size_t dim,
                                             const std::vector<float>& query, std::size_t n);

AlignedTextTable make_table(const std::vector<std::string>& texts, std::size_t dim,
                            std::vector<float> embeddings);

// Hand-written ten-caption word fixture.
std::vector<std::string> word_fixture_captions();
PosLexicon word_fixture_lexicon();
std::vector<WordCount> word_fixture_expected();  // threshold 2

// Five vertical stripe regions with designed words.
struct SyntheticScene {
  std::size_t height = 448, width = 448, patch = 14;
  std::vector<std::string> region_words;
  Tensor dino;  // 8 x 32 x 32
  Tensor clip;  // 16 x 32 x 32
  std::vector<std::string> captions;
  std::vector<float> caption_embeddings;  // 50 x 16
  AlignedTextTable words;                  // caption vocabulary
  AlignedTextTable sentences;              // designed words as class names
  ClassList classes;                       // ids 1..5
  GroundTruth gt;
  std::string lexicon_tsv;

  std::size_t region_of_column(std::size_t patch_col) const;
};

SyntheticScene make_scene();

/// Writes dino.tens, clip.tens, captions.jsonl/.tens, words.jsonl/.tens,
/// sentences.jsonl/.tens, classes.txt, lexicon.tsv and gt/<name>.png.
void write_scene(const SyntheticScene& scene, const std::filesystem::path& dir,
                 const std::string& name = "scene");

std::string slurp(const std::filesystem::path& path);

}  // namespace tag::testing
