#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tag/embedding_table.hpp"

namespace tag {

inline constexpr std::size_t kDefaultTopN = 10;
inline constexpr std::size_t kDefaultFreqThreshold = 2;
inline constexpr const char* kUnknownWord = "unknown";

/// Tokens of each caption, kept per caption so counts can be taken either
/// per occurrence or per caption.
using TokenizedCaptions = std::vector<std::vector<std::string>>;

/// Splits on whitespace and drops URLs, file names with a known extension,
/// and any token that still holds a non-letter once leading and trailing
/// punctuation is stripped. With `remove == false` only the whitespace split
/// happens.
TokenizedCaptions tokenize_and_remove(std::span<const std::string> captions,
                                      bool remove = true);

/// Lowercase + rule-based singular form. Idempotent.
std::string standardize_word(std::string_view token);
TokenizedCaptions standardize(TokenizedCaptions tokens);

/// True for lowercase ASCII words that standardize_word maps to themselves.
bool is_normalized_word(std::string_view word);

enum PosTag : std::uint16_t {
  kNoun = 1u << 0,
  kVerb = 1u << 1,
  kAdjective = 1u << 2,
  kAdverb = 1u << 3,
  kDeterminer = 1u << 4,
  kPronoun = 1u << 5,
  kPreposition = 1u << 6,
  kConjunction = 1u << 7,
  kNumeral = 1u << 8,
  kInterjection = 1u << 9,
  kParticle = 1u << 10,
  kAuxiliary = 1u << 11,
};

std::uint16_t parse_pos_tag(std::string_view name);

/// word -> tag set, from lines of the form `word<TAB>tag[,tag...]`.
class PosLexicon {
 public:
  static PosLexicon load(const std::filesystem::path& path);
  static PosLexicon parse(std::istream& in, const std::string& origin = "lexicon");

  void add(const std::string& word, std::uint16_t tags) { tags_[word] |= tags; }
  std::optional<std::uint16_t> tags(std::string_view word) const;
  std::size_t size() const { return tags_.size(); }

 private:
  std::unordered_map<std::string, std::uint16_t> tags_;
};

enum class CountMode { kPerOccurrence, kPerCaption };

struct FilterOptions {
  std::size_t freq_threshold = kDefaultFreqThreshold;
  CountMode count_mode = CountMode::kPerOccurrence;
  bool allow_fallback = true;   // lower the threshold until something survives
  bool keep_adjectives = false;
};

struct WordCount {
  std::string word;
  std::size_t count = 0;

  bool operator==(const WordCount&) const = default;
};

struct CandidateWordSet {
  std::size_t segment = 0;
  std::vector<WordCount> words;  // count descending, then word ascending
  std::size_t effective_threshold = 0;
  bool fallback_used = false;
  bool degenerate = false;  // nothing survived

  bool empty() const { return words.empty(); }
};

/// Keeps words that are nouns (or absent from the lexicon) and occur at least
/// `freq_threshold` times. If nothing survives, the threshold is lowered one
/// step at a time down to 1 while `allow_fallback` holds.
CandidateWordSet filter(const TokenizedCaptions& tokens, const FilterOptions& options,
                        const PosLexicon& lexicon);

/// Every word counted once per occurrence, no frequency or POS rule.
CandidateWordSet count_all(const TokenizedCaptions& tokens);

struct WordPipelineOptions {
  bool remove = true;
  bool standardize = true;
  bool filter = true;
  FilterOptions filter_options;
};

CandidateWordSet extract_candidates(std::span<const std::string> captions,
                                    const WordPipelineOptions& options,
                                    const PosLexicon& lexicon);

struct SegmentLabel {
  std::size_t segment = 0;
  std::string word = kUnknownWord;
  double score = 0.0;
  bool degenerate = true;
  std::vector<std::string> warnings;
};

/// Cosine argmax over the candidates; ties go to the higher count, then to
/// the lexicographically smaller word. Candidates missing from the table are
/// dropped with a warning.
SegmentLabel assign_category(const CandidateWordSet& candidates,
                             std::span<const float> segment_embedding,
                             const WordEmbeddingTable& table);

/// Sorted unique normalized words of a caption corpus.
std::vector<std::string> build_vocabulary(std::span<const std::string> captions);

}  // namespace tag
