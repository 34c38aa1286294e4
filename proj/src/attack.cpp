#include "rpd/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

namespace rpd {

int argmax(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> kSet = {
      "a",  "an", "the", "and", "or",  "but", "of",  "to", "in",   "on",  "at",  "is",
      "am", "are", "was", "were", "be", "been", "it", "its", "this", "that", "as", "for",
      "with", "by", "from", "not", "no", "so", "if", "then", "than", "too", "very"};
  return kSet;
}

std::vector<double> word_saliency(const JointModelParams& model, const Sentence& s, int label) {
  if (s.tokens.empty()) throw std::invalid_argument("word_saliency: empty sentence");
  const double p0 =
      softmax(head_scores(model.std_head, featurize(s, model.features)))[static_cast<std::size_t>(
          label)];
  std::vector<double> sal(s.tokens.size());
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    const double ph = softmax(head_scores(
        model.std_head, featurize_with_hole(s, model.features, i)))[static_cast<std::size_t>(label)];
    sal[i] = p0 - ph;
  }
  return sal;
}

namespace {

// Counts model forwards against the query budget. probs() returns nullopt
// once the budget is exhausted; callers stop in a consistent state.
class BudgetedScorer {
 public:
  BudgetedScorer(const JointModelParams& model, int budget) : model_(model), budget_(budget) {}

  std::optional<std::vector<double>> probs(const FeatureVector& f) {
    if (used_ >= budget_) return std::nullopt;
    ++used_;
    return softmax(head_scores(model_.std_head, f));
  }

  std::optional<std::vector<double>> probs(const Sentence& s) {
    if (used_ >= budget_) return std::nullopt;
    return probs(featurize(s, model_.features));
  }

  bool can_spend() const { return used_ < budget_; }
  int used() const { return used_; }
  const FeatureConfig& features() const { return model_.features; }

 private:
  const JointModelParams& model_;
  int budget_;
  int used_ = 0;
};

void validate_config(const AttackerConfig& cfg) {
  if (cfg.query_budget < 1) throw std::invalid_argument("attack: query budget must be >= 1");
  if (!(cfg.max_sub_ratio > 0.0 && cfg.max_sub_ratio <= 1.0)) {
    throw std::invalid_argument("attack: max_sub_ratio must be in (0, 1]");
  }
}

void validate_example(const JointModelParams& model, const LabeledExample& ex) {
  if (ex.label < 0 || ex.label >= model.class_count) {
    throw std::invalid_argument("attack: example label " + std::to_string(ex.label) +
                                " outside model class count " +
                                std::to_string(model.class_count));
  }
}

std::size_t substitution_cap(double ratio, std::size_t token_count) {
  // The epsilon absorbs float creep in escalated ratios (0.2 + 0.2*2 != 0.6).
  return static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(token_count) - 1e-9));
}

const std::vector<std::string>& synonyms_of(const AttackerConfig& cfg, const std::string& word) {
  static const std::vector<std::string> kEmpty;
  return cfg.lexicon ? cfg.lexicon->synonyms(word) : kEmpty;
}

bool substitutable(const AttackerConfig& cfg, const std::string& word) {
  return !cfg.stopwords.contains(word) && !synonyms_of(cfg, word).empty();
}

AttackOutcome finalize(Sentence perturbed, int predicted, int true_label,
                       std::vector<AttackOutcome::Substitution> subs, int queries) {
  std::sort(subs.begin(), subs.end(),
            [](const auto& a, const auto& b) { return a.position < b.position; });
  AttackOutcome out;
  out.perturbed = std::move(perturbed);
  out.predicted_label = predicted;
  out.success = predicted != true_label;
  out.substitutions = std::move(subs);
  out.queries = queries;
  return out;
}

// Positions beyond the modeling window cannot change the model output and are
// never attacked.
std::size_t attackable_len(const Sentence& s, const FeatureConfig& features) {
  return std::min<std::size_t>(s.tokens.size(),
                               features.max_tokens < 0
                                   ? 0
                                   : static_cast<std::size_t>(features.max_tokens));
}

struct RankedPosition {
  std::size_t index;
  double score;
};

// Descending score, ties to the lower index.
void rank_descending(std::vector<RankedPosition>& v) {
  std::sort(v.begin(), v.end(), [](const RankedPosition& a, const RankedPosition& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.index < b.index;
  });
}

// Shared commit loop for the importance-ranked attackers: visit positions in
// order, probe every synonym on the committed sentence and commit the one
// minimizing the true-class probability. A position whose best synonym does
// not reduce that probability is restored (the cap is spent on useful
// substitutions only).
AttackOutcome greedy_substitution(BudgetedScorer& scorer, const AttackerConfig& cfg,
                                  const Sentence& input, int true_label, int pred0,
                                  double p0_y, const std::vector<RankedPosition>& order) {
  Sentence committed = input;
  std::vector<AttackOutcome::Substitution> subs;
  int cur_pred = pred0;
  double cur_p = p0_y;
  const std::size_t cap = substitution_cap(cfg.max_sub_ratio, input.tokens.size());

  for (const RankedPosition& rp : order) {
    if (subs.size() >= cap) break;
    const std::string& word = committed.tokens[rp.index];
    const std::vector<std::string>& cands = synonyms_of(cfg, word);
    double best_p = std::numeric_limits<double>::infinity();
    std::size_t best_k = cands.size();
    int best_pred = cur_pred;
    bool exhausted = false;
    for (std::size_t k = 0; k < cands.size(); ++k) {
      auto p = scorer.probs(substitute(committed, rp.index, cands[k]));
      if (!p) {
        exhausted = true;
        break;
      }
      if ((*p)[static_cast<std::size_t>(true_label)] < best_p) {
        best_p = (*p)[static_cast<std::size_t>(true_label)];
        best_k = k;
        best_pred = argmax(*p);
      }
    }
    if (exhausted) break;  // abandon a partially probed position
    if (best_k == cands.size() || best_p >= cur_p) continue;
    subs.push_back({rp.index, word, cands[best_k]});
    committed = substitute(committed, rp.index, cands[best_k]);
    cur_pred = best_pred;
    cur_p = best_p;
    if (cur_pred != true_label) break;
  }
  return finalize(std::move(committed), cur_pred, true_label, std::move(subs), scorer.used());
}

// Deletion importance: P(y|s) - P(y|s without token i). Shared by the
// deletion attacker and charbug. Returns nullopt if the budget dies first.
std::optional<std::vector<double>> deletion_importance(BudgetedScorer& scorer, const Sentence& s,
                                                       int label, double p0_y) {
  std::vector<double> imp(s.tokens.size(), 0.0);
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    auto p = scorer.probs(erase_token(s, i));
    if (!p) return std::nullopt;
    imp[i] = p0_y - (*p)[static_cast<std::size_t>(label)];
  }
  return imp;
}

}  // namespace

AttackOutcome pwws_attack(const JointModelParams& model, const LabeledExample& ex,
                          const AttackerConfig& cfg) {
  validate_config(cfg);
  validate_example(model, ex);
  BudgetedScorer scorer(model, cfg.query_budget);
  const Sentence& s = ex.sentence;

  auto p0 = scorer.probs(s);
  const int pred0 = argmax(*p0);
  if (pred0 != ex.label || s.tokens.empty()) {
    return finalize(s, pred0, ex.label, {}, scorer.used());
  }
  const double p0_y = (*p0)[static_cast<std::size_t>(ex.label)];
  const std::size_t n = attackable_len(s, model.features);

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < n; ++i) {
    if (substitutable(cfg, s.tokens[i])) eligible.push_back(i);
  }
  if (eligible.empty()) return finalize(s, pred0, ex.label, {}, scorer.used());

  // Saliency over all tokens: the probability drop under the OOV hole probe.
  std::vector<double> sal(s.tokens.size(), 0.0);
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    auto p = scorer.probs(featurize_with_hole(s, model.features, i));
    if (!p) return finalize(s, pred0, ex.label, {}, scorer.used());
    sal[i] = p0_y - (*p)[static_cast<std::size_t>(ex.label)];
  }
  std::vector<double> phi = softmax(sal);

  // Best synonym per eligible position, scored on the unperturbed input.
  std::vector<RankedPosition> order;
  std::vector<std::string> best_word(s.tokens.size());
  for (std::size_t i : eligible) {
    const std::vector<std::string>& cands = synonyms_of(cfg, s.tokens[i]);
    double best_p = std::numeric_limits<double>::infinity();
    std::size_t best_k = cands.size();
    for (std::size_t k = 0; k < cands.size(); ++k) {
      auto p = scorer.probs(substitute(s, i, cands[k]));
      if (!p) return finalize(s, pred0, ex.label, {}, scorer.used());
      if ((*p)[static_cast<std::size_t>(ex.label)] < best_p) {
        best_p = (*p)[static_cast<std::size_t>(ex.label)];
        best_k = k;
      }
    }
    best_word[i] = cands[best_k];
    order.push_back({i, phi[i] * (p0_y - best_p)});
  }
  rank_descending(order);

  Sentence committed = s;
  std::vector<AttackOutcome::Substitution> subs;
  int cur_pred = pred0;
  const std::size_t cap = substitution_cap(cfg.max_sub_ratio, s.tokens.size());
  for (const RankedPosition& rp : order) {
    if (subs.size() >= cap || !scorer.can_spend()) break;
    Sentence next = substitute(committed, rp.index, best_word[rp.index]);
    auto p = scorer.probs(next);
    committed = std::move(next);
    subs.push_back({rp.index, s.tokens[rp.index], best_word[rp.index]});
    cur_pred = argmax(*p);
    if (cur_pred != ex.label) break;
  }
  return finalize(std::move(committed), cur_pred, ex.label, std::move(subs), scorer.used());
}

AttackOutcome gradient_importance_attack(const JointModelParams& model, const LabeledExample& ex,
                                         const AttackerConfig& cfg) {
  validate_config(cfg);
  validate_example(model, ex);
  BudgetedScorer scorer(model, cfg.query_budget);
  const Sentence& s = ex.sentence;

  auto p0 = scorer.probs(s);
  const int pred0 = argmax(*p0);
  if (pred0 != ex.label || s.tokens.empty()) {
    return finalize(s, pred0, ex.label, {}, scorer.used());
  }
  const std::size_t n = attackable_len(s, model.features);

  // First-order loss increase when the token's own features are removed:
  // -(dCE/df . f_i), with dCE/dz = p - onehot(y) folded through the weights.
  std::vector<double> dz(static_cast<std::size_t>(model.class_count));
  for (int c = 0; c < model.class_count; ++c) {
    dz[static_cast<std::size_t>(c)] =
        (*p0)[static_cast<std::size_t>(c)] - (c == ex.label ? 1.0 : 0.0);
  }
  const std::size_t buckets = model.features.buckets;
  std::vector<RankedPosition> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (!substitutable(cfg, s.tokens[i])) continue;
    FeatureVector fi = position_features(s, model.features, i);
    double dot = 0.0;
    for (int c = 0; c < model.class_count; ++c) {
      const double* row = model.std_head.w.data() + static_cast<std::size_t>(c) * buckets;
      double acc = 0.0;
      for (const auto& [idx, cnt] : fi) acc += row[idx] * cnt;
      dot += dz[static_cast<std::size_t>(c)] * acc;
    }
    order.push_back({i, -dot});
  }
  rank_descending(order);
  return greedy_substitution(scorer, cfg, s, ex.label, pred0,
                             (*p0)[static_cast<std::size_t>(ex.label)], order);
}

AttackOutcome deletion_importance_attack(const JointModelParams& model, const LabeledExample& ex,
                                         const AttackerConfig& cfg) {
  validate_config(cfg);
  validate_example(model, ex);
  BudgetedScorer scorer(model, cfg.query_budget);
  const Sentence& s = ex.sentence;

  auto p0 = scorer.probs(s);
  const int pred0 = argmax(*p0);
  if (pred0 != ex.label || s.tokens.empty()) {
    return finalize(s, pred0, ex.label, {}, scorer.used());
  }
  auto imp = deletion_importance(scorer, s, ex.label, (*p0)[static_cast<std::size_t>(ex.label)]);
  if (!imp) return finalize(s, pred0, ex.label, {}, scorer.used());

  const std::size_t n = attackable_len(s, model.features);
  std::vector<RankedPosition> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (substitutable(cfg, s.tokens[i])) order.push_back({i, (*imp)[i]});
  }
  rank_descending(order);
  return greedy_substitution(scorer, cfg, s, ex.label, pred0,
                             (*p0)[static_cast<std::size_t>(ex.label)], order);
}

namespace {

// One seeded character edit guaranteed to change the surface form.
std::string char_edit(const std::string& word, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::string out = word;
    switch (rng() % 3) {
      case 0: {  // swap adjacent
        std::size_t p = static_cast<std::size_t>(rng() % (word.size() - 1));
        std::swap(out[p], out[p + 1]);
        break;
      }
      case 1: {  // delete one
        std::size_t p = static_cast<std::size_t>(rng() % word.size());
        out.erase(p, 1);
        break;
      }
      default: {  // duplicate one
        std::size_t p = static_cast<std::size_t>(rng() % word.size());
        out.insert(p, 1, word[p]);
        break;
      }
    }
    if (out != word) return out;
  }
  return word.substr(1);
}

}  // namespace

AttackOutcome charbug_attack(const JointModelParams& model, const LabeledExample& ex,
                             const AttackerConfig& cfg) {
  validate_config(cfg);
  validate_example(model, ex);
  BudgetedScorer scorer(model, cfg.query_budget);
  const Sentence& s = ex.sentence;

  auto p0 = scorer.probs(s);
  const int pred0 = argmax(*p0);
  if (pred0 != ex.label || s.tokens.empty()) {
    return finalize(s, pred0, ex.label, {}, scorer.used());
  }
  auto imp = deletion_importance(scorer, s, ex.label, (*p0)[static_cast<std::size_t>(ex.label)]);
  if (!imp) return finalize(s, pred0, ex.label, {}, scorer.used());

  const std::size_t n = attackable_len(s, model.features);
  std::vector<RankedPosition> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (s.tokens[i].size() >= 2 && !cfg.stopwords.contains(s.tokens[i])) {
      order.push_back({i, (*imp)[i]});
    }
  }
  rank_descending(order);

  std::mt19937_64 rng(cfg.seed);
  Sentence committed = s;
  std::vector<AttackOutcome::Substitution> subs;
  int cur_pred = pred0;
  const std::size_t cap = substitution_cap(cfg.max_sub_ratio, s.tokens.size());
  for (const RankedPosition& rp : order) {
    if (subs.size() >= cap || !scorer.can_spend()) break;
    std::string edited = char_edit(committed.tokens[rp.index], rng);
    Sentence next = substitute(committed, rp.index, edited);
    auto p = scorer.probs(next);
    subs.push_back({rp.index, committed.tokens[rp.index], edited});
    committed = std::move(next);
    cur_pred = argmax(*p);
    if (cur_pred != ex.label) break;
  }
  return finalize(std::move(committed), cur_pred, ex.label, std::move(subs), scorer.used());
}

AttackOutcome attack(std::string_view attacker_id, const JointModelParams& model,
                     const LabeledExample& ex, const AttackerConfig& cfg) {
  if (attacker_id == "pwws") return pwws_attack(model, ex, cfg);
  if (attacker_id == "gradimp") return gradient_importance_attack(model, ex, cfg);
  if (attacker_id == "delimp") return deletion_importance_attack(model, ex, cfg);
  if (attacker_id == "charbug") return charbug_attack(model, ex, cfg);
  throw std::invalid_argument("unknown attacker id: " + std::string(attacker_id));
}

}  // namespace rpd
