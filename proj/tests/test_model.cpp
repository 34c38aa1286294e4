#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "rpd/errors.hpp"
#include "rpd/model.hpp"

using namespace rpd;
namespace fs = std::filesystem;

namespace {

FeatureConfig small_features() {
  FeatureConfig f;
  f.buckets = 64;
  f.ngram_orders = {1, 2};
  f.max_tokens = 80;
  return f;
}

Sentence random_sentence(std::mt19937_64& rng, std::size_t min_len = 1, std::size_t max_len = 6) {
  static const std::vector<std::string> kPool = {"alpha", "bravo", "carbon", "delta", "ember",
                                                 "fjord", "gleam", "harbor", "iris",  "jolt"};
  std::size_t len = min_len + rng() % (max_len - min_len + 1);
  std::vector<std::string> toks;
  for (std::size_t i = 0; i < len; ++i) toks.push_back(kPool[rng() % kPool.size()]);
  return Sentence::from_tokens(std::move(toks));
}

void randomize_head(LinearHead& head, std::mt19937_64& rng) {
  auto draw = [&rng] { return (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5); };
  for (double& v : head.w) v = draw();
  for (double& v : head.b) v = draw();
}

double& param_at(JointModelParams& p, std::size_t flat) {
  LinearHead* heads[] = {&p.std_head, &p.adv_head, &p.det_head};
  for (LinearHead* h : heads) {
    if (flat < h->w.size()) return h->w[flat];
    flat -= h->w.size();
    if (flat < h->b.size()) return h->b[flat];
    flat -= h->b.size();
  }
  throw std::out_of_range("param_at");
}

std::size_t param_count(const JointModelParams& p) {
  return p.std_head.w.size() + p.std_head.b.size() + p.adv_head.w.size() + p.adv_head.b.size() +
         p.det_head.w.size() + p.det_head.b.size();
}

}  // namespace

TEST_CASE("featurize basics") {
  FeatureConfig uni;
  uni.buckets = 1u << 16;
  uni.ngram_orders = {1};

  CHECK(featurize(Sentence::from_tokens({}), uni).empty());

  FeatureVector f = featurize(Sentence::from_tokens({"good", "film"}), uni);
  double total = 0;
  for (const auto& [idx, cnt] : f) total += cnt;
  CHECK(total == 2.0);
  CHECK(f.size() >= 1);
  CHECK(f.size() <= 2);

  // bag-of-words symmetry under permutation
  CHECK(featurize(Sentence::from_tokens({"a", "b", "c"}), uni) ==
        featurize(Sentence::from_tokens({"c", "a", "b"}), uni));
}

TEST_CASE("featurize respects max_tokens and hole semantics") {
  FeatureConfig cfg = small_features();
  cfg.max_tokens = 2;
  Sentence s = Sentence::from_tokens({"a", "b", "c"});
  Sentence t = Sentence::from_tokens({"a", "b"});
  CHECK(featurize(s, cfg) == featurize(t, cfg));

  cfg.max_tokens = 80;
  Sentence u = Sentence::from_tokens({"a", "b", "c"});
  // Hole at 1 keeps only the unigrams of a and c: no bigram bridges the hole.
  FeatureVector holed = featurize_with_hole(u, cfg, 1);
  FeatureConfig uni = cfg;
  uni.ngram_orders = {1};
  FeatureVector expect = featurize(Sentence::from_tokens({"a", "c"}), uni);
  CHECK(holed == expect);

  // The hole plus the position's own features recompose the full vector.
  FeatureVector full = featurize(u, cfg);
  for (std::size_t i = 0; i < u.tokens.size(); ++i) {
    FeatureVector parts = featurize_with_hole(u, cfg, i);
    for (const auto& [idx, cnt] : position_features(u, cfg, i)) {
      auto it = std::find_if(parts.begin(), parts.end(),
                             [idx = idx](const auto& kv) { return kv.first == idx; });
      if (it == parts.end()) {
        parts.push_back({idx, cnt});
      } else {
        it->second += cnt;
      }
    }
    std::sort(parts.begin(), parts.end());
    CHECK(parts == full);
  }
}

TEST_CASE("forward yields normalized heads") {
  FeatureConfig cfg = small_features();
  JointModelParams p = JointModelParams::zeros(cfg, 4);

  SUBCASE("zero weights -> uniform") {
    ForwardResult r = forward(p, featurize(Sentence::from_tokens({"alpha", "bravo"}), cfg));
    for (double v : r.p_std) CHECK(v == doctest::Approx(0.25));
    for (double v : r.p_det) CHECK(v == doctest::Approx(0.5));
  }

  SUBCASE("empty feature vector -> softmax of biases") {
    p.std_head.b = {1.0, 0.0, 0.0, 0.0};
    ForwardResult r = forward(p, {});
    CHECK(r.p_std[0] > r.p_std[1]);
    CHECK(r.p_std[1] == doctest::Approx(r.p_std[2]));
  }

  SUBCASE("random params sum to one") {
    std::mt19937_64 rng(3);
    randomize_head(p.std_head, rng);
    randomize_head(p.adv_head, rng);
    randomize_head(p.det_head, rng);
    for (int t = 0; t < 20; ++t) {
      ForwardResult r = forward(p, featurize(random_sentence(rng), cfg));
      for (const auto* probs : {&r.p_std, &r.p_adv, &r.p_det}) {
        double sum = 0;
        for (double v : *probs) {
          CHECK(v > 0.0);
          sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("loss aggregation and masking") {
  FeatureConfig cfg = small_features();
  const int C = 3;
  std::mt19937_64 rng(11);
  JointModelParams p = JointModelParams::zeros(cfg, C);
  randomize_head(p.std_head, rng);
  randomize_head(p.adv_head, rng);
  randomize_head(p.det_head, rng);

  std::vector<AugmentedExample> batch = {
      {random_sentence(rng), 1, kNullLabel, 0},
      {random_sentence(rng), kNullLabel, 2, 1},
      {random_sentence(rng), 0, kNullLabel, 0},
  };
  TrainConfig tc;
  tc.alpha = 5;
  tc.beta = 5;
  tc.lambda = 1e-3;

  LossBreakdown l = loss(p, batch, tc);
  CHECK(l.total == doctest::Approx(l.l_c + 5 * l.l_d + 5 * l.l_a + l.l2).epsilon(1e-12));
  CHECK(l.l_c > 0);
  CHECK(l.l_a > 0);
  CHECK(l.l_d > 0);

  SUBCASE("aggregation weights are alpha and beta exactly") {
    TrainConfig unl = tc;
    unl.lambda = 0;
    LossBreakdown base = loss(p, batch, unl);
    CHECK(base.total == doctest::Approx(base.l_c + 5 * base.l_d + 5 * base.l_a).epsilon(1e-12));
  }

  SUBCASE("natural-only batch contributes no adversarial term") {
    std::vector<AugmentedExample> naturals = {{random_sentence(rng), 1, kNullLabel, 0}};
    LossBreakdown ln = loss(p, naturals, tc);
    CHECK(ln.l_a == 0.0);
  }

  SUBCASE("head isolation per the label masking") {
    TrainConfig unl = tc;
    unl.lambda = 0;
    LossBreakdown before = loss(p, batch, unl);
    JointModelParams q = p;
    q.adv_head.w[5] += 0.7;
    LossBreakdown after = loss(q, batch, unl);
    CHECK(after.l_c == before.l_c);
    CHECK(after.l_d == before.l_d);

    q = p;
    q.std_head.w[9] -= 0.3;
    after = loss(q, batch, unl);
    CHECK(after.l_d == before.l_d);
    CHECK(after.l_a == before.l_a);
  }

  SUBCASE("empty batch is an error") {
    CHECK_THROWS_AS(loss(p, {}, tc), std::invalid_argument);
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  FeatureConfig cfg;
  cfg.buckets = 48;
  cfg.ngram_orders = {1, 2};
  const int C = 3;
  const double step = 1e-6;
  std::mt19937_64 rng(2024);

  double worst = 0.0;
  for (int draw = 0; draw < 10; ++draw) {
    JointModelParams p = JointModelParams::zeros(cfg, C);
    randomize_head(p.std_head, rng);
    randomize_head(p.adv_head, rng);
    randomize_head(p.det_head, rng);

    std::vector<AugmentedExample> batch;
    for (int i = 0; i < 4; ++i) {
      if (i % 2 == 0) {
        batch.push_back({random_sentence(rng), static_cast<int>(rng() % C), kNullLabel, 0});
      } else {
        batch.push_back({random_sentence(rng), kNullLabel, static_cast<int>(rng() % C), 1});
      }
    }
    TrainConfig tc;
    tc.alpha = 5;
    tc.beta = 5;
    tc.lambda = (draw % 2 == 0) ? 1e-4 : 0.0;
    tc.vanilla_adv_objective = draw >= 8;  // also cover the ablation wiring

    JointModelParams grad = JointModelParams::zeros(cfg, C);
    loss(p, batch, tc, &grad);

    const std::size_t n_params = param_count(p);
    for (std::size_t k = 0; k < n_params; ++k) {
      JointModelParams plus = p;
      param_at(plus, k) += step;
      JointModelParams minus = p;
      param_at(minus, k) -= step;
      const double fd =
          (loss(plus, batch, tc).total - loss(minus, batch, tc).total) / (2.0 * step);
      const double an = param_at(grad, k);
      // The denominator floor marks where the central difference's own
      // roundoff (eps * |loss| / step ~ 5e-9) exceeds a 1e-5 band; components
      // below it get the equivalent absolute check.
      const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-3});
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("training is deterministic and respects the no-op contract") {
  FeatureConfig cfg = small_features();
  std::mt19937_64 rng(5);
  std::vector<AugmentedExample> data;
  for (int i = 0; i < 30; ++i) {
    if (i % 3 == 2) {
      data.push_back({random_sentence(rng), kNullLabel, static_cast<int>(rng() % 2), 1});
    } else {
      data.push_back({random_sentence(rng), static_cast<int>(rng() % 2), kNullLabel, 0});
    }
  }
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 99;

  JointModelParams a = train_joint(data, tc, cfg, 2);
  JointModelParams b = train_joint(data, tc, cfg, 2);
  CHECK(a == b);

  TrainConfig zero = tc;
  zero.epochs = 0;
  CHECK(train_joint(data, zero, cfg, 2) == JointModelParams::zeros(cfg, 2));

  // Input order never matters: rows are canonically ordered internally.
  std::vector<AugmentedExample> shuffled(data.rbegin(), data.rend());
  CHECK(train_joint(shuffled, tc, cfg, 2) == a);
}

namespace {

// Two disjoint word pools make the classes linearly separable by construction.
Dataset separable_corpus(int per_class, std::mt19937_64& rng) {
  static const std::vector<std::string> pool0 = {"crimson", "ruby", "scarlet", "garnet", "rose"};
  static const std::vector<std::string> pool1 = {"azure", "cobalt", "navy", "sapphire", "teal"};
  Dataset d;
  d.class_count = 2;
  for (int i = 0; i < 2 * per_class; ++i) {
    const int label = i % 2;
    const auto& pool = label == 0 ? pool0 : pool1;
    std::vector<std::string> toks;
    std::size_t len = 3 + rng() % 4;
    for (std::size_t t = 0; t < len; ++t) toks.push_back(pool[rng() % pool.size()]);
    d.examples.push_back({Sentence::from_tokens(std::move(toks)), label});
  }
  return d;
}

double accuracy(const JointModelParams& m, const Dataset& d) {
  std::size_t ok = 0;
  for (const auto& ex : d.examples) {
    std::vector<double> p = softmax(head_scores(m.std_head, featurize(ex.sentence, m.features)));
    int pred = 0;
    for (std::size_t c = 1; c < p.size(); ++c) {
      if (p[c] > p[static_cast<std::size_t>(pred)]) pred = static_cast<int>(c);
    }
    if (pred == ex.label) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(d.examples.size());
}

}  // namespace

TEST_CASE("victim training separates a separable corpus") {
  std::mt19937_64 rng(17);
  Dataset train = separable_corpus(100, rng);
  Dataset held = separable_corpus(50, rng);
  TrainConfig tc;
  JointModelParams victim = train_victim(train, tc, small_features());

  CHECK(accuracy(victim, train) >= 0.95);
  CHECK(accuracy(victim, held) >= 0.90);
  // The detector and dummy heads stay zero.
  CHECK(victim.det_head == LinearHead{2, victim.det_head.w, victim.det_head.b});
  for (double v : victim.det_head.w) CHECK(v == 0.0);
  for (double v : victim.adv_head.w) CHECK(v == 0.0);

  SUBCASE("joint training with alpha=beta=0 reproduces the victim head") {
    std::vector<AugmentedExample> rows;
    for (const auto& ex : train.examples) rows.push_back({ex.sentence, ex.label, kNullLabel, 0});
    TrainConfig jc = tc;
    jc.alpha = 0;
    jc.beta = 0;
    JointModelParams joint = train_joint(rows, jc, small_features(), 2);
    CHECK(joint.std_head == victim.std_head);
  }

  SUBCASE("one-class dataset trains and predicts that class") {
    Dataset one;
    one.class_count = 2;
    for (int i = 0; i < 20; ++i) one.examples.push_back({random_sentence(rng), 1});
    JointModelParams m = train_victim(one, tc, small_features());
    CHECK(accuracy(m, one) == 1.0);
  }

  SUBCASE("empty dataset is an error") {
    Dataset none;
    none.class_count = 2;
    CHECK_THROWS_AS(train_victim(none, tc, small_features()), std::invalid_argument);
  }
}

TEST_CASE("AT baseline reduces to the victim and ignores input order") {
  std::mt19937_64 rng(23);
  Dataset train = separable_corpus(60, rng);
  TrainConfig tc;

  JointModelParams victim = train_victim(train, tc, small_features());
  CHECK(train_at_baseline(train, {}, tc, small_features()) == victim);

  std::vector<AugmentedExample> advs;
  for (int i = 0; i < 50; ++i) {
    const auto& src = train.examples[static_cast<std::size_t>(i)];
    advs.push_back({random_sentence(rng), src.label, kNullLabel, 0});
  }
  JointModelParams at1 = train_at_baseline(train, advs, tc, small_features());
  std::vector<AugmentedExample> rev(advs.rbegin(), advs.rend());
  CHECK(train_at_baseline(train, rev, tc, small_features()) == at1);

  Dataset unionset = train;
  for (const auto& a : advs) unionset.examples.push_back({a.sentence, a.y1});
  CHECK(accuracy(at1, unionset) >= 0.85);

  std::vector<AugmentedExample> unusable = {{random_sentence(rng), kNullLabel, 1, 1}};
  CHECK_THROWS_AS(train_at_baseline(train, unusable, tc, small_features()),
                  std::invalid_argument);
}

TEST_CASE("checkpoint round-trip is bitwise exact") {
  std::mt19937_64 rng(31);
  FeatureConfig cfg = small_features();
  JointModelParams p = JointModelParams::zeros(cfg, 2);
  randomize_head(p.std_head, rng);
  randomize_head(p.adv_head, rng);
  randomize_head(p.det_head, rng);

  fs::path path = fs::temp_directory_path() / "rpd_model_test.ckpt";
  save_model(p, path);
  CHECK(load_model(path) == p);

  SUBCASE("empty file is a format error") {
    fs::path empty = fs::temp_directory_path() / "rpd_model_empty.ckpt";
    std::ofstream(empty, std::ios::binary).close();
    CHECK_THROWS_AS(load_model(empty), DataError);
  }

  SUBCASE("wrong version magic is rejected") {
    fs::path wrong = fs::temp_directory_path() / "rpd_model_v9.ckpt";
    std::ofstream out(wrong, std::ios::binary);
    out << "RPDJ9junkjunkjunk";
    out.close();
    CHECK_THROWS_WITH_AS(load_model(wrong), doctest::Contains("version"), DataError);
  }

  SUBCASE("truncation is rejected") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    fs::path cut = fs::temp_directory_path() / "rpd_model_cut.ckpt";
    std::ofstream out(cut, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_WITH_AS(load_model(cut), doctest::Contains("truncated"), DataError);
  }

  SUBCASE("trailing bytes are rejected") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    fs::path padded = fs::temp_directory_path() / "rpd_model_pad.ckpt";
    std::ofstream out(padded, std::ios::binary);
    out << bytes << "x";
    out.close();
    CHECK_THROWS_AS(load_model(padded), DataError);
  }
}
