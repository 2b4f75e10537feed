#include <sstream>

#include "doctest.h"
#include "support/support.hpp"
#include "tag/embedding_table.hpp"
#include "tag/error.hpp"
#include "tag/word_pipeline.hpp"

using namespace tag;
using tag::testing::make_table;

namespace {

std::vector<std::string> tokens_of(const std::string& caption) {
  const std::vector<std::string> c = {caption};
  return tokenize_and_remove(c).front();
}

TokenizedCaptions repeat(std::initializer_list<std::pair<const char*, int>> counts) {
  TokenizedCaptions t(1);
  for (const auto& [w, n] : counts) {
    for (int i = 0; i < n; ++i) t[0].push_back(w);
  }
  return t;
}

PosLexicon lexicon(const std::string& body) {
  std::istringstream in(body);
  return PosLexicon::parse(in);
}

}  // namespace

TEST_CASE("tokenize and remove") {
  using V = std::vector<std::string>;
  CHECK(tokens_of("A photo of dogs") == V{"A", "photo", "of", "dogs"});
  CHECK(tokens_of("see http://x.com/a.jpg now") == V{"see", "now"});
  CHECK(tokens_of("img_0042.png cat") == V{"cat"});
  CHECK(tokens_of("www.example.org/x, sunny beach!") == V{"sunny", "beach"});
  CHECK(tokens_of("(dogs), cats; 3d \"quoted\" don't") == V{"dogs", "cats", "quoted"});
  CHECK(tokens_of("holiday.JPEG photo.tiff report.pdf") == V{});
  CHECK(tokens_of("   ").empty());
  const std::vector<std::string> raw = {"a b.jpg http://x"};
  CHECK(tokenize_and_remove(raw, false).front() == V{"a", "b.jpg", "http://x"});
}

TEST_CASE("standardize") {
  CHECK(standardize_word("Dogs") == "dog");
  CHECK(standardize_word("churches") == "church");
  CHECK(standardize_word("bus") == "bus");
  CHECK(standardize_word("glass") == "glass");
  CHECK(standardize_word("grass") == "grass");
  CHECK(standardize_word("buses") == "bus");
  CHECK(standardize_word("boxes") == "box");
  CHECK(standardize_word("dishes") == "dish");
  CHECK(standardize_word("glasses") == "glass");
  CHECK(standardize_word("berries") == "berry");
  CHECK(standardize_word("ties") == "tie");
  CHECK(standardize_word("People") == "person");
  CHECK(standardize_word("mice") == "mouse");
  CHECK(standardize_word("leaves") == "leaf");
  CHECK(standardize_word("is") == "is");
  CHECK(standardize_word("was") == "was");
  CHECK(standardize_word("tennis") == "tennis");
}

TEST_CASE("standardize is idempotent") {
  for (const char* w : {"dogs", "churches", "mens", "buses", "skies", "boxes", "Cats", "series",
                        "analyses", "wolves", "cookies", "pies", "xs", "ss", "sss", "aes",
                        "status", "canvases", "quizzes", "potatoes", "iris", "irises"}) {
    const auto once = standardize_word(w);
    CHECK_MESSAGE(standardize_word(once) == once, w);
    CHECK(is_normalized_word(once));
  }
  CHECK_FALSE(is_normalized_word("dogs"));
  CHECK_FALSE(is_normalized_word("Dog"));
  CHECK_FALSE(is_normalized_word(""));
}

TEST_CASE("filter keeps frequent nouns") {
  const auto lex = lexicon("dog\tnoun\nthe\tdeterminer\nrun\tverb\n");
  const auto c = filter(repeat({{"dog", 3}, {"the", 5}, {"run", 2}}), {}, lex);
  CHECK(c.words == std::vector<WordCount>{{"dog", 3}});
  CHECK(c.effective_threshold == 2);
  CHECK_FALSE(c.fallback_used);
}

TEST_CASE("filter falls back to lower thresholds") {
  const PosLexicon lex;
  const auto c = filter(repeat({{"cat", 1}}), {}, lex);
  CHECK(c.words == std::vector<WordCount>{{"cat", 1}});
  CHECK(c.effective_threshold == 1);
  CHECK(c.fallback_used);

  FilterOptions strict;
  strict.allow_fallback = false;
  const auto none = filter(repeat({{"cat", 1}}), strict, lex);
  CHECK(none.empty());
  CHECK(none.degenerate);
}

TEST_CASE("out-of-lexicon words are kept") {
  const auto lex = lexicon("dog\tnoun\n");
  const auto c = filter(repeat({{"swanage", 2}}), {}, lex);
  CHECK(c.words == std::vector<WordCount>{{"swanage", 2}});
}

TEST_CASE("filter options") {
  const auto lex = lexicon("red\tadjective\nball\tnoun\n");
  const TokenizedCaptions t = {{"red", "ball"}, {"red", "red", "ball"}};
  FilterOptions opts;
  CHECK(filter(t, opts, lex).words == std::vector<WordCount>{{"ball", 2}});
  opts.keep_adjectives = true;
  CHECK(filter(t, opts, lex).words == std::vector<WordCount>{{"red", 3}, {"ball", 2}});
  opts.count_mode = CountMode::kPerCaption;
  CHECK(filter(t, opts, lex).words == std::vector<WordCount>{{"ball", 2}, {"red", 2}});
  opts.freq_threshold = 0;
  CHECK_THROWS_AS(filter(t, opts, lex), ParameterError);
}

TEST_CASE("empty token lists give a degenerate candidate set") {
  const auto c = filter(TokenizedCaptions{}, {}, PosLexicon{});
  CHECK(c.empty());
  CHECK(c.degenerate);
}

TEST_CASE("lexicon parsing") {
  const auto lex = lexicon("# comment\n\nfly\tnoun,verb\r\nquick\tadjective\n");
  CHECK(lex.size() == 2);
  CHECK(*lex.tags("fly") == (kNoun | kVerb));
  CHECK_FALSE(lex.tags("slow").has_value());
  CHECK_THROWS_AS(lexicon("fly\tsomething\n"), FormatError);
  CHECK_THROWS_AS(lexicon("no-tab-here\n"), FormatError);
}

TEST_CASE("ten caption fixture") {
  const auto captions = tag::testing::word_fixture_captions();
  const auto lex = tag::testing::word_fixture_lexicon();
  WordPipelineOptions opts;
  const auto c = extract_candidates(captions, opts, lex);
  CHECK(c.words == tag::testing::word_fixture_expected());
  CHECK_FALSE(c.fallback_used);

  opts.filter_options.freq_threshold = 10;
  const auto fb = extract_candidates(captions, opts, lex);
  CHECK(fb.words == std::vector<WordCount>{{"dog", 6}});
  CHECK(fb.fallback_used);
  CHECK(fb.effective_threshold == 6);

  opts.filter_options.allow_fallback = false;
  CHECK(extract_candidates(captions, opts, lex).degenerate);
}

TEST_CASE("disabled stages") {
  const std::vector<std::string> captions = {"Dogs and dogs http://x.org", "dogs"};
  const auto lex = lexicon("and\tconjunction\ndog\tnoun\n");
  WordPipelineOptions opts;
  CHECK(extract_candidates(captions, opts, lex).words == std::vector<WordCount>{{"dog", 3}});
  opts.standardize = false;
  CHECK(extract_candidates(captions, opts, lex).words == std::vector<WordCount>{{"dogs", 2}});
  opts.standardize = true;
  opts.filter = false;
  CHECK(extract_candidates(captions, opts, lex).words == std::vector<WordCount>{{"dog", 3}, {"and", 1}});
  opts.remove = false;
  CHECK(extract_candidates(captions, opts, lex).words ==
        std::vector<WordCount>{{"dog", 3}, {"and", 1}, {"http://x.org", 1}});
}

TEST_CASE("word table validation") {
  CHECK_THROWS_AS(WordEmbeddingTable(make_table({"dog", "dog"}, 2, {1, 0, 0, 1})), FormatError);
  CHECK_THROWS_AS(WordEmbeddingTable(make_table({"dogs"}, 2, {1, 0})), FormatError);
  CHECK_THROWS_AS(WordEmbeddingTable(make_table({"dog"}, 2, {0, 0})), FormatError);
  const WordEmbeddingTable t(make_table({"dog", "cat"}, 2, {3, 4, 0, 2}));
  CHECK((*t.find("dog"))[0] == doctest::Approx(0.6));
  CHECK_FALSE(t.find("bird").has_value());
}

TEST_CASE("assign category") {
  const WordEmbeddingTable t(make_table({"a", "b", "c"}, 3, {1, 0, 0, 0.3f, 0.4f, 0.5f, 0, 0, 1}));
  const std::vector<float> seg = {0.6f, 0.8f, 1.0f};

  CandidateWordSet single;
  single.words = {{"a", 2}};
  const auto one = assign_category(single, seg, t);
  CHECK(one.word == "a");
  CHECK(one.score == doctest::Approx(0.6 / std::sqrt(2.0)));
  CHECK_FALSE(one.degenerate);

  CandidateWordSet three;
  three.words = {{"a", 3}, {"b", 2}, {"c", 1}};
  const auto best = assign_category(three, seg, t);
  CHECK(best.word == "b");
  CHECK(best.score == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("assign category ties and missing words") {
  const WordEmbeddingTable t(make_table({"x", "y", "z"}, 2, {1, 0, 1, 0, 0, 1}));
  const std::vector<float> seg = {1, 0};
  CandidateWordSet c;
  c.words = {{"y", 4}, {"x", 4}, {"z", 9}};
  CHECK(assign_category(c, seg, t).word == "x");
  c.words = {{"y", 5}, {"x", 4}};
  CHECK(assign_category(c, seg, t).word == "y");

  c.words = {{"ghost", 7}, {"z", 1}};
  const auto l = assign_category(c, seg, t);
  CHECK(l.word == "z");
  CHECK(l.warnings.size() == 1);

  c.words = {{"ghost", 7}};
  const auto missing = assign_category(c, seg, t);
  CHECK(missing.word == kUnknownWord);
  CHECK(missing.degenerate);

  const auto empty = assign_category(CandidateWordSet{}, seg, t);
  CHECK(empty.word == kUnknownWord);
  CHECK(empty.degenerate);

  c.words = {{"x", 1}};
  const auto zero = assign_category(c, std::vector<float>{0, 0}, t);
  CHECK(zero.word == kUnknownWord);
  CHECK(zero.degenerate);
}

TEST_CASE("assign category matches a full scan") {
  std::vector<std::string> words;
  for (int i = 0; i < 20; ++i) words.push_back(std::string(1, static_cast<char>('a' + i)) + "word");
  const auto emb = tag::testing::gaussian_rows(20, 24, 77);
  const WordEmbeddingTable t(make_table(words, 24, emb));
  CandidateWordSet c;
  for (const auto& w : words) c.words.push_back({w, 1});
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto seg = tag::testing::gaussian_rows(1, 24, 500 + s);
    std::size_t best = 0;
    long double best_score = -2;
    for (std::size_t i = 0; i < 20; ++i) {
      long double d = 0, a = 0, b = 0;
      for (std::size_t k = 0; k < 24; ++k) {
        d += static_cast<long double>(seg[k]) * emb[i * 24 + k];
        a += static_cast<long double>(seg[k]) * seg[k];
        b += static_cast<long double>(emb[i * 24 + k]) * emb[i * 24 + k];
      }
      const long double cs = d / std::sqrt(a * b);
      if (cs > best_score) {
        best_score = cs;
        best = i;
      }
    }
    const auto l = assign_category(c, seg, t);
    CHECK(l.word == words[best]);
    CHECK(l.score == doctest::Approx(static_cast<double>(best_score)).epsilon(1e-6));
  }
}

TEST_CASE("vocabulary export") {
  const std::vector<std::string> captions = {"Two Dogs!", "a dog, http://x", "cats.png the cats"};
  CHECK(build_vocabulary(captions) == std::vector<std::string>{"a", "cat", "dog", "the", "two"});
  for (const auto& w : build_vocabulary(tag::testing::word_fixture_captions())) {
    CHECK(is_normalized_word(w));
  }
}
