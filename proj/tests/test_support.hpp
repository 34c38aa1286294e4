#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <algorithm>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rpd/attack.hpp"
#include "rpd/model.hpp"

namespace rpd_test {

inline rpd::FeatureConfig unigram_features(std::uint32_t buckets = 4096) {
  rpd::FeatureConfig f;
  f.buckets = buckets;
  f.ngram_orders = {1};
  f.max_tokens = 80;
  return f;
}

inline void randomize_params(rpd::JointModelParams& p, std::mt19937_64& rng, double scale = 1.0) {
  auto draw = [&] { return (static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0) * scale; };
  for (rpd::LinearHead* h : {&p.std_head, &p.adv_head, &p.det_head}) {
    for (double& v : h->w) v = draw();
    for (double& v : h->b) v = draw();
  }
}

inline int predict_std(const rpd::JointModelParams& m, const rpd::Sentence& s) {
  return rpd::argmax(rpd::softmax(rpd::head_scores(m.std_head, rpd::featurize(s, m.features))));
}

// A fixed random linear model over a 64-word pool with three synonyms per
// word; instances of six tokens. The exhaustive <=2-substitution search is
// the oracle the attackers are measured against.
struct ParityFixture {
  rpd::JointModelParams model;
  std::shared_ptr<rpd::SynonymLexicon> lexicon;
  std::vector<std::string> pool;
  std::mt19937_64 rng{20240817};

  ParityFixture() : model(rpd::JointModelParams::zeros(unigram_features(), 2)) {
    randomize_params(model, rng);
    static constexpr char kC[] = "bdfgklmnprstvz";
    static constexpr char kV[] = "aeiou";
    while (pool.size() < 64) {
      std::string w;
      for (int s = 0; s < 3; ++s) {
        w += kC[rng() % (sizeof(kC) - 1)];
        w += kV[rng() % (sizeof(kV) - 1)];
      }
      if (std::find(pool.begin(), pool.end(), w) == pool.end()) pool.push_back(w);
    }
    lexicon = std::make_shared<rpd::SynonymLexicon>();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      std::vector<std::string> cands;
      while (cands.size() < 3) {
        const std::string& cand = pool[rng() % pool.size()];
        if (cand != pool[i] && std::find(cands.begin(), cands.end(), cand) == cands.end()) {
          cands.push_back(cand);
        }
      }
      lexicon->add(pool[i], cands);
    }
  }

  rpd::AttackerConfig config() const {
    rpd::AttackerConfig cfg;
    cfg.lexicon = lexicon;
    cfg.query_budget = 2000;
    cfg.max_sub_ratio = 0.4;
    return cfg;
  }

  rpd::LabeledExample draw_instance() {
    std::vector<std::string> toks;
    for (std::size_t i = 0; i < 6; ++i) toks.push_back(pool[rng() % pool.size()]);
    rpd::Sentence s = rpd::Sentence::from_tokens(std::move(toks));
    return {s, predict_std(model, s)};  // attack the model's own prediction
  }

  bool brute_force_flips(const rpd::LabeledExample& ex) const {
    const std::size_t n = ex.sentence.tokens.size();
    std::vector<std::size_t> subst;
    for (std::size_t i = 0; i < n; ++i) {
      if (!lexicon->synonyms(ex.sentence.tokens[i]).empty()) subst.push_back(i);
    }
    for (std::size_t i : subst) {
      for (const std::string& w : lexicon->synonyms(ex.sentence.tokens[i])) {
        if (predict_std(model, rpd::substitute(ex.sentence, i, w)) != ex.label) return true;
      }
    }
    for (std::size_t a = 0; a < subst.size(); ++a) {
      for (std::size_t b = a + 1; b < subst.size(); ++b) {
        for (const std::string& wa : lexicon->synonyms(ex.sentence.tokens[subst[a]])) {
          rpd::Sentence sa = rpd::substitute(ex.sentence, subst[a], wa);
          for (const std::string& wb : lexicon->synonyms(ex.sentence.tokens[subst[b]])) {
            if (predict_std(model, rpd::substitute(sa, subst[b], wb)) != ex.label) return true;
          }
        }
      }
    }
    return false;
  }
};

struct ParityResult {
  int oracle_flips = 0;
  int pwws = 0;
  int gradimp = 0;
  int delimp = 0;
};

inline ParityResult run_parity_trials(int trials = 200) {
  ParityFixture fix;
  rpd::AttackerConfig cfg = fix.config();
  ParityResult r;
  for (int t = 0; t < trials; ++t) {
    rpd::LabeledExample ex = fix.draw_instance();
    if (!fix.brute_force_flips(ex)) continue;
    ++r.oracle_flips;
    if (rpd::pwws_attack(fix.model, ex, cfg).success) ++r.pwws;
    if (rpd::gradient_importance_attack(fix.model, ex, cfg).success) ++r.gradimp;
    if (rpd::deletion_importance_attack(fix.model, ex, cfg).success) ++r.delimp;
  }
  return r;
}

}  // namespace rpd_test
