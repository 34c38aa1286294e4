#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "rpd/model.hpp"
#include "rpd/text.hpp"

namespace rpd {

// Lowest index wins ties, so predictions are deterministic.
int argmax(std::span<const double> v);

struct AttackOutcome {
  struct Substitution {
    std::size_t position;
    std::string original;
    std::string replacement;
  };

  Sentence perturbed;
  int predicted_label = 0;
  bool success = false;                     // predicted_label != attacked label
  std::vector<Substitution> substitutions;  // strictly increasing positions
  int queries = 0;                          // model forwards spent
};

struct AttackerConfig {
  double max_sub_ratio = 0.4;  // cap: ceil(ratio * token count) substitutions
  int query_budget = 2000;
  std::shared_ptr<const SynonymLexicon> lexicon;
  std::unordered_set<std::string> stopwords;
  std::uint64_t seed = 0;  // used by charbug's edit draws
};

const std::unordered_set<std::string>& default_stopwords();

// Drop in true-class probability when token i is replaced by the
// out-of-vocabulary probe (a hole contributing no features).
std::vector<double> word_saliency(const JointModelParams& model, const Sentence& s, int label);

// Saliency-weighted greedy substitution: scores every position's best synonym
// on the unperturbed input, then commits substitutions in descending
// softmax(saliency) * delta-probability order until the label flips, the
// query budget runs out or the substitution cap is reached.
AttackOutcome pwws_attack(const JointModelParams& model, const LabeledExample& ex,
                          const AttackerConfig& cfg);

// Greedy substitution visiting tokens by first-order loss impact (gradient of
// the true-class cross-entropy dotted with the token's own features); at each
// visited token the synonym minimizing the true-class probability is committed.
AttackOutcome gradient_importance_attack(const JointModelParams& model, const LabeledExample& ex,
                                         const AttackerConfig& cfg);

// As gradient_importance_attack but ranking tokens by the probability drop
// when the token is deleted.
AttackOutcome deletion_importance_attack(const JointModelParams& model, const LabeledExample& ex,
                                         const AttackerConfig& cfg);

// Character-level probe for unknown-attack experiments: ranks tokens by
// deletion importance and applies one seeded character edit (adjacent swap,
// delete or duplicate) per visited token. Single-character tokens are skipped.
AttackOutcome charbug_attack(const JointModelParams& model, const LabeledExample& ex,
                             const AttackerConfig& cfg);

inline constexpr const char* kAttackerIds[] = {"pwws", "gradimp", "delimp", "charbug"};

// Dispatch by id; throws std::invalid_argument on unknown ids.
AttackOutcome attack(std::string_view attacker_id, const JointModelParams& model,
                     const LabeledExample& ex, const AttackerConfig& cfg);

}  // namespace rpd
