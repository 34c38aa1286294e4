#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rpd/text.hpp"

namespace rpd {

// Hashed bag-of-ngrams configuration, shared by all model heads. Checkpoints
// embed it so featurization is reproducible at load time.
struct FeatureConfig {
  std::uint32_t buckets = 1u << 18;
  std::vector<int> ngram_orders = {1, 2};
  int max_tokens = 80;  // tokens beyond this are ignored

  bool operator==(const FeatureConfig&) const = default;
};

// Sparse feature counts, sorted by bucket index; counts are >= 1.
using FeatureVector = std::vector<std::pair<std::uint32_t, double>>;

std::uint64_t fnv1a64(std::string_view bytes);

// Counts of hashed n-grams over the first max_tokens tokens. The gram string
// of an order-n gram is its tokens joined by single spaces.
FeatureVector featurize(const Sentence& s, const FeatureConfig& cfg);

// As featurize, but every n-gram touching `hole` is omitted. This is the
// out-of-vocabulary probe used by saliency scoring: the token at `hole`
// contributes no features and creates no new adjacencies.
FeatureVector featurize_with_hole(const Sentence& s, const FeatureConfig& cfg, std::size_t hole);

// Only the n-grams touching `position` (a token's own feature footprint).
FeatureVector position_features(const Sentence& s, const FeatureConfig& cfg, std::size_t position);

}  // namespace rpd
