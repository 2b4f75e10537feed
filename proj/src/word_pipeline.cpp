#include "tag/word_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "tag/dense_features.hpp"
#include "tag/error.hpp"

namespace tag {
namespace {

const std::unordered_set<std::string_view> kFileExtensions = {
    "jpg", "jpeg", "png", "gif", "bmp", "tif", "tiff", "webp", "svg", "ico", "heic",
    "pdf", "doc", "docx", "txt", "rtf", "html", "htm", "php", "asp", "aspx", "jsp",
    "xml", "json", "csv", "js", "css", "mp3", "mp4", "wav", "avi", "mov", "mkv",
    "flv", "wmv", "zip", "rar", "gz", "tar", "exe"};

// Plural forms the suffix rules get wrong.
const std::unordered_map<std::string_view, std::string_view> kIrregular = {
    {"people", "person"},  {"men", "man"},          {"women", "woman"},
    {"children", "child"}, {"feet", "foot"},        {"teeth", "tooth"},
    {"mice", "mouse"},     {"geese", "goose"},      {"oxen", "ox"},
    {"leaves", "leaf"},    {"knives", "knife"},     {"wolves", "wolf"},
    {"shelves", "shelf"},  {"halves", "half"},      {"lives", "life"},
    {"wives", "wife"},     {"calves", "calf"},      {"scarves", "scarf"},
    {"thieves", "thief"},  {"loaves", "loaf"},      {"hooves", "hoof"},
    {"elves", "elf"},      {"buses", "bus"},        {"gases", "gas"},
    {"lenses", "lens"},    {"viruses", "virus"},    {"cactuses", "cactus"},
    {"campuses", "campus"}, {"circuses", "circus"}, {"bonuses", "bonus"},
    {"octopuses", "octopus"}, {"walruses", "walrus"}, {"canvases", "canvas"},
    {"atlases", "atlas"},  {"irises", "iris"},      {"analyses", "analysis"},
    {"crises", "crisis"},  {"axes", "axe"},         {"quizzes", "quiz"},
    {"cookies", "cookie"}, {"movies", "movie"},     {"zombies", "zombie"},
    {"brownies", "brownie"}, {"selfies", "selfie"}, {"smoothies", "smoothie"},
    {"calories", "calorie"}, {"prairies", "prairie"}, {"rookies", "rookie"},
    {"goalies", "goalie"}, {"hippies", "hippie"},   {"niches", "niche"},
    {"caches", "cache"},   {"headaches", "headache"}, {"mustaches", "mustache"},
    {"moustaches", "moustache"}, {"avalanches", "avalanche"}, {"heroes", "hero"},
    {"potatoes", "potato"}, {"tomatoes", "tomato"}, {"echoes", "echo"},
    {"volcanoes", "volcano"}, {"mangoes", "mango"}, {"torpedoes", "torpedo"},
    {"dice", "die"}};

// Words ending in "s" that are not plural.
const std::unordered_set<std::string_view> kNotPlural = {
    "is", "was", "has", "his", "this", "its", "yes", "as", "does", "goes", "whereas",
    "always", "perhaps", "sometimes", "overseas", "news", "series", "species",
    "physics", "mathematics", "athletics", "gymnastics", "economics", "politics",
    "ethics", "electronics", "graphics", "aerobics", "billiards", "tennis", "iris",
    "chassis", "canvas", "atlas", "christmas", "texas", "paris", "lens", "gas",
    "bias", "alias", "chaos", "cosmos", "ethos", "kudos", "pathos", "asbestos",
    "rhinoceros", "pancreas", "diabetes", "herpes", "measles", "mumps", "rabies",
    "analysis", "basis", "crisis", "oasis", "axis", "thesis", "emphasis",
    "diagnosis", "hypothesis", "metropolis", "acropolis", "trellis", "jeans",
    "pants", "trousers", "shorts", "leggings", "pajamas", "pyjamas", "scissors",
    "tongs", "binoculars", "sunglasses", "eyeglasses", "goggles", "clothes",
    "headquarters", "barracks", "gallows", "dais"};

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool is_url(std::string_view token) {
  if (token.find("://") != std::string_view::npos) return true;
  return to_lower(token.substr(0, 4)) == "www.";
}

bool is_file_name(std::string_view token) {
  const auto dot = token.rfind('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == token.size()) return false;
  return kFileExtensions.contains(to_lower(token.substr(dot + 1)));
}

std::string_view strip_punct(std::string_view s) {
  while (!s.empty() && is_punct(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_punct(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

bool is_fixed_point(const std::string& w) {
  if (kNotPlural.contains(w)) return true;
  for (const auto& [plural, singular] : kIrregular) {
    if (singular == w) return true;
  }
  return false;
}

std::string strip_plural_suffix(std::string w) {
  if (w.size() < 3 || w.back() != 's' || is_fixed_point(w)) return w;
  if (ends_with(w, "ss") || ends_with(w, "us")) return w;
  if (ends_with(w, "ies")) {
    if (w.size() <= 4) {
      w.pop_back();  // pies -> pie
    } else {
      w.resize(w.size() - 3);
      w += 'y';
    }
    return w;
  }
  if (ends_with(w, "sses") || ends_with(w, "ches") || ends_with(w, "shes") ||
      ends_with(w, "xes") || ends_with(w, "zzes")) {
    w.resize(w.size() - 2);
    return w;
  }
  w.pop_back();
  return w;
}

// The irregular table is consulted again after the suffix rules so that
// e.g. "mens" -> "men" -> "man" and the result stays a fixed point.
std::string singularize(std::string w) {
  if (const auto it = kIrregular.find(w); it != kIrregular.end()) return std::string(it->second);
  w = strip_plural_suffix(std::move(w));
  if (const auto it = kIrregular.find(w); it != kIrregular.end()) return std::string(it->second);
  return w;
}

void sort_words(std::vector<WordCount>& words) {
  std::sort(words.begin(), words.end(), [](const WordCount& a, const WordCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.word < b.word;
  });
}

std::map<std::string, std::size_t> count_words(const TokenizedCaptions& tokens, CountMode mode) {
  std::map<std::string, std::size_t> counts;
  for (const auto& caption : tokens) {
    if (mode == CountMode::kPerOccurrence) {
      for (const auto& t : caption) ++counts[t];
    } else {
      for (const auto& t : std::set<std::string>(caption.begin(), caption.end())) ++counts[t];
    }
  }
  return counts;
}

}  // namespace

TokenizedCaptions tokenize_and_remove(std::span<const std::string> captions, bool remove) {
  TokenizedCaptions out;
  out.reserve(captions.size());
  for (const auto& caption : captions) {
    std::vector<std::string> tokens;
    for (std::string_view raw : split_whitespace(caption)) {
      if (!remove) {
        tokens.emplace_back(raw);
        continue;
      }
      if (is_url(raw)) continue;
      const std::string_view core = strip_punct(raw);
      if (core.empty() || is_file_name(core)) continue;
      if (!std::all_of(core.begin(), core.end(), is_alpha)) continue;
      tokens.emplace_back(core);
    }
    out.push_back(std::move(tokens));
  }
  return out;
}

std::string standardize_word(std::string_view token) { return singularize(to_lower(token)); }

TokenizedCaptions standardize(TokenizedCaptions tokens) {
  for (auto& caption : tokens) {
    for (auto& t : caption) t = standardize_word(t);
  }
  return tokens;
}

bool is_normalized_word(std::string_view word) {
  if (word.empty()) return false;
  for (char c : word) {
    if (c < 'a' || c > 'z') return false;
  }
  return standardize_word(word) == word;
}

std::uint16_t parse_pos_tag(std::string_view name) {
  static const std::unordered_map<std::string_view, std::uint16_t> kTags = {
      {"noun", kNoun},         {"verb", kVerb},
      {"adjective", kAdjective}, {"adverb", kAdverb},
      {"determiner", kDeterminer}, {"pronoun", kPronoun},
      {"preposition", kPreposition}, {"conjunction", kConjunction},
      {"numeral", kNumeral},   {"interjection", kInterjection},
      {"particle", kParticle}, {"auxiliary", kAuxiliary}};
  const auto it = kTags.find(name);
  if (it == kTags.end()) throw FormatError("tag", "unknown part-of-speech tag '" + std::string(name) + "'");
  return it->second;
}

PosLexicon PosLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open lexicon " + path.string());
  return parse(in, path.filename().string());
}

PosLexicon PosLexicon::parse(std::istream& in, const std::string& origin) {
  PosLexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw FormatError("lexicon", origin + ":" + std::to_string(lineno) +
                                       ": expected word<TAB>tag[,tag...]");
    }
    std::uint16_t tags = 0;
    std::stringstream list(line.substr(tab + 1));
    std::string tag;
    while (std::getline(list, tag, ',')) {
      const auto t = strip_punct(tag);
      if (!t.empty()) tags |= parse_pos_tag(t);
    }
    if (tags == 0) {
      throw FormatError("lexicon", origin + ":" + std::to_string(lineno) + ": no tags");
    }
    lex.add(line.substr(0, tab), tags);
  }
  return lex;
}

std::optional<std::uint16_t> PosLexicon::tags(std::string_view word) const {
  const auto it = tags_.find(std::string(word));
  if (it == tags_.end()) return std::nullopt;
  return it->second;
}

CandidateWordSet filter(const TokenizedCaptions& tokens, const FilterOptions& options,
                        const PosLexicon& lexicon) {
  if (options.freq_threshold < 1) throw ParameterError("frequency threshold must be >= 1");
  CandidateWordSet out;
  out.effective_threshold = options.freq_threshold;

  std::uint16_t keep = kNoun;
  if (options.keep_adjectives) keep |= kAdjective;
  std::vector<WordCount> eligible;
  for (const auto& [word, count] : count_words(tokens, options.count_mode)) {
    const auto tags = lexicon.tags(word);
    if (!tags || (*tags & keep) != 0) eligible.push_back({word, count});
  }

  for (std::size_t t = options.freq_threshold; t >= 1; --t) {
    out.words.clear();
    for (const auto& wc : eligible) {
      if (wc.count >= t) out.words.push_back(wc);
    }
    out.effective_threshold = t;
    if (!out.words.empty() || !options.allow_fallback) break;
  }
  out.fallback_used = out.effective_threshold < options.freq_threshold;
  out.degenerate = out.words.empty();
  sort_words(out.words);
  return out;
}

CandidateWordSet count_all(const TokenizedCaptions& tokens) {
  CandidateWordSet out;
  out.effective_threshold = 1;
  for (const auto& [word, count] : count_words(tokens, CountMode::kPerOccurrence)) {
    out.words.push_back({word, count});
  }
  out.degenerate = out.words.empty();
  sort_words(out.words);
  return out;
}

CandidateWordSet extract_candidates(std::span<const std::string> captions,
                                    const WordPipelineOptions& options,
                                    const PosLexicon& lexicon) {
  TokenizedCaptions tokens = tokenize_and_remove(captions, options.remove);
  if (options.standardize) tokens = standardize(std::move(tokens));
  if (!options.filter) return count_all(tokens);
  return filter(tokens, options.filter_options, lexicon);
}

SegmentLabel assign_category(const CandidateWordSet& candidates,
                             std::span<const float> segment_embedding,
                             const WordEmbeddingTable& table) {
  SegmentLabel label;
  label.segment = candidates.segment;
  if (candidates.empty()) {
    label.warnings.push_back("no candidate words");
    return label;
  }
  if (segment_embedding.size() != table.dim()) {
    throw InputError("segment embedding has " + std::to_string(segment_embedding.size()) +
                     " dims, word table has " + std::to_string(table.dim()));
  }

  const WordCount* best = nullptr;
  double best_score = 0.0;
  for (const auto& wc : candidates.words) {
    const auto emb = table.find(wc.word);
    if (!emb) {
      label.warnings.push_back("candidate '" + wc.word + "' missing from word table");
      continue;
    }
    const CosineResult c = cosine(segment_embedding, *emb);
    if (c.degenerate) {
      label.warnings.push_back("segment embedding is zero");
      return label;
    }
    const bool better = best == nullptr || c.value > best_score ||
                        (c.value == best_score &&
                         (wc.count > best->count ||
                          (wc.count == best->count && wc.word < best->word)));
    if (better) {
      best = &wc;
      best_score = c.value;
    }
  }
  if (best == nullptr) return label;
  label.word = best->word;
  label.score = best_score;
  label.degenerate = false;
  return label;
}

std::vector<std::string> build_vocabulary(std::span<const std::string> captions) {
  std::set<std::string> words;
  for (const auto& caption : standardize(tokenize_and_remove(captions))) {
    words.insert(caption.begin(), caption.end());
  }
  return {words.begin(), words.end()};
}

}  // namespace tag
