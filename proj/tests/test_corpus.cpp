#include <cstdlib>
#include <map>
#include <string>

#include "doctest.h"
#include "rpd/corpus.hpp"

using namespace rpd;

TEST_CASE("corpus generation is seeded and well-formed") {
  CorpusSpec spec;
  spec.train_size = 200;
  spec.test_size = 50;
  GeneratedCorpus a = generate_corpus(spec);
  GeneratedCorpus b = generate_corpus(spec);

  REQUIRE(a.train.examples.size() == 200);
  REQUIRE(a.test.examples.size() == 50);
  CHECK(a.train.class_count == 2);

  SUBCASE("identical seeds reproduce the corpus bitwise") {
    for (std::size_t i = 0; i < a.train.examples.size(); ++i) {
      CHECK(a.train.examples[i].sentence.tokens == b.train.examples[i].sentence.tokens);
      CHECK(a.train.examples[i].label == b.train.examples[i].label);
    }
  }

  SUBCASE("another seed changes the corpus") {
    CorpusSpec other = spec;
    other.seed = 7;
    GeneratedCorpus c = generate_corpus(other);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.train.examples.size() && !any_diff; ++i) {
      any_diff = c.train.examples[i].sentence.tokens != a.train.examples[i].sentence.tokens;
    }
    CHECK(any_diff);
  }

  SUBCASE("labels are balanced and sentences in bounds") {
    int ones = 0;
    for (const auto& ex : a.train.examples) {
      ones += ex.label;
      CHECK(ex.sentence.tokens.size() >= 8);
      CHECK(ex.sentence.tokens.size() <= 16);
      for (const auto& tok : ex.sentence.tokens) {
        CHECK(!tok.empty());
        CHECK(tokenize(tok).tokens == std::vector<std::string>{tok});
      }
    }
    CHECK(ones == 100);
  }

  SUBCASE("every class word has substitution candidates") {
    // Tokens are either class words (ring + possibly a cross link) or
    // neutral words (ring only); none may dead-end the attackers entirely.
    std::size_t with_syns = 0, total = 0;
    for (const auto& ex : a.train.examples) {
      for (const auto& tok : ex.sentence.tokens) {
        ++total;
        if (!a.lexicon.synonyms(tok).empty()) ++with_syns;
      }
    }
    CHECK(with_syns == total);
  }

  SUBCASE("lexicon links cross the class pools") {
    // Collect words by class via label-conditional frequency.
    std::map<std::string, std::pair<int, int>> freq;
    for (const auto& ex : a.train.examples) {
      for (const auto& tok : ex.sentence.tokens) {
        (ex.label == 0 ? freq[tok].first : freq[tok].second)++;
      }
    }
    auto side = [&](const std::string& w) {
      auto it = freq.find(w);
      if (it == freq.end()) return 2;
      const auto& [c0, c1] = it->second;
      if (c0 + c1 < 4 || std::abs(c0 - c1) <= (c0 + c1) / 3) return 2;  // neutral-ish
      return c0 > c1 ? 0 : 1;
    };
    bool found_cross = false;
    for (const auto& [word, counts] : freq) {
      int s = side(word);
      if (s == 2) continue;
      for (const auto& syn : a.lexicon.synonyms(word)) {
        if (side(syn) == 1 - s) {
          found_cross = true;
          break;
        }
      }
      if (found_cross) break;
    }
    CHECK(found_cross);
  }
}

TEST_CASE("corpus spec validation") {
  CorpusSpec bad;
  bad.vocab_size = 10;
  bad.neutral_count = 60;
  CHECK_THROWS_AS(generate_corpus(bad), std::invalid_argument);

  CorpusSpec negative;
  negative.contamination_prob = -0.5;
  CHECK_THROWS_AS(generate_corpus(negative), std::invalid_argument);

  CorpusSpec lengths;
  lengths.min_len = 10;
  lengths.max_len = 9;
  CHECK_THROWS_AS(generate_corpus(lengths), std::invalid_argument);
}
