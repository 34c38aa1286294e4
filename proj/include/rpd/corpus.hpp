#pragma once

#include <cstdint>

#include "rpd/text.hpp"

namespace rpd {

// Seeded two-class synthetic corpus over a vocabulary of two class pools plus
// a neutral pool. Each class pool carries a small tier of "confusable" words.
//
// Sentence composition (8-16 tokens) is stratified: a sentence holds one more
// plain class word than the default substitution budget (0.4 of its length)
// can replace, at most one own-class confusable, and neutral filler. A small
// fraction of sentences is contaminated with a burst of opposite-class
// confusables; those are the genuinely ambiguous naturals.
//
// The lexicon groups words into within-pool synonym rings and pairs every
// plain class word with one opposite-class confusable. Substitution attacks
// flip labels by landing on those confusables, so off-class confusable counts
// are the signature an adversarial detector can learn, while the class-anchor
// floor keeps plain word corruption from erasing a sentence's evidence.
struct CorpusSpec {
  int train_size = 2000;
  int test_size = 500;
  std::uint64_t seed = 42;

  int vocab_size = 400;
  int neutral_count = 60;            // remainder splits evenly into two class pools
  int confusable_per_class = 14;     // confusable tier inside each class pool
  int synonym_group_size = 4;        // within-pool synonym ring width
  double cross_link_fraction = 1.0;  // plain class words paired with an
                                     // opposite-class confusable
  double own_prob = 0.40;            // class-anchor share of the length
  double confusable_own_prob = 0.8;  // sentences carrying one own confusable
  double contamination_prob = 0.03;  // sentences with an off-class burst
  int min_len = 8;
  int max_len = 16;
};

struct GeneratedCorpus {
  Dataset train;
  Dataset test;
  SynonymLexicon lexicon;
};

GeneratedCorpus generate_corpus(const CorpusSpec& spec);

}  // namespace rpd
