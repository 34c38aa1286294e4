#include "rpd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace rpd {

namespace {

double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<std::string> make_vocabulary(int size, std::mt19937_64& rng) {
  static constexpr char kConsonants[] = "bcdfghjklmnprstvz";
  static constexpr char kVowels[] = "aeiou";
  std::unordered_set<std::string> seen;
  std::vector<std::string> words;
  words.reserve(static_cast<std::size_t>(size));
  while (words.size() < static_cast<std::size_t>(size)) {
    std::string w;
    const std::size_t syllables = 2 + rng() % 3;
    for (std::size_t k = 0; k < syllables; ++k) {
      w += kConsonants[rng() % (sizeof(kConsonants) - 1)];
      w += kVowels[rng() % (sizeof(kVowels) - 1)];
    }
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

void add_synonym_rings(SynonymLexicon& lex, const std::vector<std::string>& pool, int group) {
  const std::size_t g = static_cast<std::size_t>(std::max(2, group));
  for (std::size_t start = 0; start < pool.size(); start += g) {
    const std::size_t end = std::min(pool.size(), start + g);
    if (end - start < 2) continue;
    for (std::size_t i = start; i < end; ++i) {
      std::vector<std::string> cands;
      for (std::size_t k = start; k < end; ++k) {
        if (k != i) cands.push_back(pool[k]);
      }
      lex.add(pool[i], cands);
    }
  }
}

}  // namespace

GeneratedCorpus generate_corpus(const CorpusSpec& spec) {
  const int pool_size = (spec.vocab_size - spec.neutral_count) / 2;
  if (spec.vocab_size < spec.neutral_count + 2 || spec.min_len < 1 ||
      spec.max_len < spec.min_len || spec.train_size < 0 || spec.test_size < 0 ||
      spec.confusable_per_class < 1 || spec.confusable_per_class >= pool_size) {
    throw std::invalid_argument("generate_corpus: inconsistent corpus spec");
  }
  if (!(spec.own_prob >= 0 && spec.own_prob <= 1.0) ||
      !(spec.confusable_own_prob >= 0 && spec.confusable_own_prob <= 1.0) ||
      !(spec.contamination_prob >= 0 && spec.contamination_prob <= 1.0)) {
    throw std::invalid_argument("generate_corpus: probabilities out of range");
  }
  std::mt19937_64 rng(spec.seed);

  std::vector<std::string> vocab = make_vocabulary(spec.vocab_size, rng);
  const int common_size = pool_size - spec.confusable_per_class;

  // Per class: a plain tier and a small confusable tier; plus a neutral pool.
  // The confusable words are both where attacks land and the off-class words
  // a natural text occasionally carries.
  std::vector<std::vector<std::string>> commons(2), magnets(2);
  commons[0].assign(vocab.begin(), vocab.begin() + common_size);
  magnets[0].assign(vocab.begin() + common_size, vocab.begin() + pool_size);
  commons[1].assign(vocab.begin() + pool_size, vocab.begin() + pool_size + common_size);
  magnets[1].assign(vocab.begin() + pool_size + common_size, vocab.begin() + 2 * pool_size);
  std::vector<std::string> neutral(vocab.begin() + 2 * pool_size, vocab.end());

  GeneratedCorpus out;
  add_synonym_rings(out.lexicon, commons[0], spec.synonym_group_size);
  add_synonym_rings(out.lexicon, commons[1], spec.synonym_group_size);
  add_synonym_rings(out.lexicon, neutral, spec.synonym_group_size);

  // Cross-class confusable pairs: a plain word of one class paired with a
  // confusable word of the other, linked in both directions.
  for (int cls = 0; cls < 2; ++cls) {
    const auto& targets = magnets[static_cast<std::size_t>(1 - cls)];
    std::size_t next = 0;
    for (const std::string& word : commons[static_cast<std::size_t>(cls)]) {
      if (unit_draw(rng) >= spec.cross_link_fraction) continue;
      const std::string& partner = targets[next++ % targets.size()];
      out.lexicon.add(word, {partner});
      out.lexicon.add(partner, {word});
    }
  }

  // Sentence composition is stratified: the own-class token count is fixed by
  // the length, so class margins are uniform and the substitution budget
  // always exceeds them while plain word deletion never does.
  auto draw_sentence = [&](int label) {
    const std::size_t len = static_cast<std::size_t>(spec.min_len) +
                            rng() % static_cast<std::size_t>(spec.max_len - spec.min_len + 1);
    // One anchor word above the substitution cap: word removal alone can
    // never exhaust a sentence's class evidence, while substitution attacks
    // (which also inject opposite evidence) stay viable at every length.
    const std::size_t n_own = std::min<std::size_t>(
        len,
        static_cast<std::size_t>(std::ceil(spec.own_prob * static_cast<double>(len))) + 1);
    std::vector<std::string> toks;
    toks.reserve(len);
    const auto& own_pool = commons[static_cast<std::size_t>(label)];
    const auto& own_magnets = magnets[static_cast<std::size_t>(label)];
    for (std::size_t t = 0; t < n_own; ++t) {
      toks.push_back(own_pool[rng() % own_pool.size()]);
    }
    // At most one own-class confusable per sentence: enough corpus presence
    // for their class weights to be learned, never enough to tip a single
    // text's margin.
    bool place_magnet = unit_draw(rng) < spec.confusable_own_prob && n_own < len;
    for (std::size_t t = n_own; t < len; ++t) {
      if (place_magnet) {
        toks.push_back(own_magnets[rng() % own_magnets.size()]);
        place_magnet = false;
      } else {
        toks.push_back(neutral[rng() % neutral.size()]);
      }
    }
    // Ambiguous naturals: a burst of opposite-class confusables over the
    // non-class positions.
    if (unit_draw(rng) < spec.contamination_prob && n_own < len) {
      const auto& pool = magnets[static_cast<std::size_t>(1 - label)];
      const std::size_t burst = std::min<std::size_t>(4 + rng() % 2, len - n_own);
      for (std::size_t k = 0; k < burst; ++k) {
        toks[n_own + rng() % (len - n_own)] = pool[rng() % pool.size()];
      }
    }
    // seeded position shuffle
    for (std::size_t i = toks.size(); i > 1; --i) {
      std::swap(toks[i - 1], toks[rng() % i]);
    }
    return Sentence::from_tokens(std::move(toks));
  };

  auto fill = [&](Dataset& data, int count, const std::string& name) {
    data.class_count = 2;
    data.name = name;
    data.examples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      const int label = i % 2;
      data.examples.push_back({draw_sentence(label), label});
    }
  };
  fill(out.train, spec.train_size, "synthetic-train");
  fill(out.test, spec.test_size, "synthetic-test");
  return out;
}

}  // namespace rpd
