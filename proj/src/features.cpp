#include "rpd/features.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace rpd {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

// Shared loop for the three featurize variants. `hole` marks a position whose
// grams are excluded, `only` restricts output to grams touching a position.
FeatureVector collect(const Sentence& s, const FeatureConfig& cfg, std::size_t hole,
                      std::size_t only) {
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  const std::size_t len = std::min<std::size_t>(
      s.tokens.size(), cfg.max_tokens < 0 ? 0 : static_cast<std::size_t>(cfg.max_tokens));
  std::map<std::uint32_t, double> counts;
  std::string gram;
  for (int order : cfg.ngram_orders) {
    if (order <= 0 || static_cast<std::size_t>(order) > len) continue;
    const std::size_t n = static_cast<std::size_t>(order);
    for (std::size_t i = 0; i + n <= len; ++i) {
      if (hole != kNone && hole >= i && hole < i + n) continue;
      if (only != kNone && !(only >= i && only < i + n)) continue;
      gram.clear();
      for (std::size_t k = 0; k < n; ++k) {
        if (k > 0) gram += ' ';
        gram += s.tokens[i + k];
      }
      std::uint32_t bucket = static_cast<std::uint32_t>(fnv1a64(gram) % cfg.buckets);
      counts[bucket] += 1.0;
    }
  }
  return FeatureVector(counts.begin(), counts.end());
}

}  // namespace

FeatureVector featurize(const Sentence& s, const FeatureConfig& cfg) {
  return collect(s, cfg, static_cast<std::size_t>(-1), static_cast<std::size_t>(-1));
}

FeatureVector featurize_with_hole(const Sentence& s, const FeatureConfig& cfg, std::size_t hole) {
  return collect(s, cfg, hole, static_cast<std::size_t>(-1));
}

FeatureVector position_features(const Sentence& s, const FeatureConfig& cfg, std::size_t position) {
  return collect(s, cfg, static_cast<std::size_t>(-1), position);
}

}  // namespace rpd
