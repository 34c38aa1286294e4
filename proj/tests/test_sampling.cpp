#include <filesystem>
#include <fstream>
#include <memory>
#include <random>

#include "doctest.h"
#include "rpd/errors.hpp"
#include "rpd/sampling.hpp"

using namespace rpd;
namespace fs = std::filesystem;

namespace {

struct SamplingFixture {
  FeatureConfig features;
  JointModelParams victim;
  std::shared_ptr<SynonymLexicon> lexicon = std::make_shared<SynonymLexicon>();
  Dataset data;

  SamplingFixture() : features{4096, {1}, 80}, victim(JointModelParams::zeros(features, 2)) {
    // A hand-built model: "red" words score class 0, "blue" words class 1.
    auto bucket = [&](const char* w) {
      return static_cast<std::uint32_t>(fnv1a64(w) % features.buckets);
    };
    for (const char* w : {"crimson", "ruby", "scarlet"}) victim.std_head.w[bucket(w)] = 1.0;
    for (const char* w : {"azure", "cobalt", "navy"}) {
      victim.std_head.w[features.buckets + bucket(w)] = 1.0;
    }
    lexicon->add("crimson", {"azure"});
    lexicon->add("ruby", {"cobalt"});
    lexicon->add("scarlet", {"navy"});

    data.class_count = 2;
    data.examples.push_back({Sentence::from_tokens({"crimson", "ruby"}), 0});
    data.examples.push_back({Sentence::from_tokens({"azure", "cobalt"}), 1});
    data.examples.push_back({Sentence::from_tokens({"scarlet", "ruby", "crimson"}), 0});
  }

  AttackerConfig config() const {
    AttackerConfig cfg;
    cfg.lexicon = lexicon;
    cfg.max_sub_ratio = 1.0;
    return cfg;
  }
};

}  // namespace

TEST_CASE("sample_adversaries emits one record per (example, attacker) pair") {
  SamplingFixture fix;
  const std::vector<std::string> ids = {"pwws", "gradimp", "delimp"};
  std::vector<AdversaryRecord> records =
      sample_adversaries(fix.victim, fix.data, ids, fix.config());
  REQUIRE(records.size() == 9);
  // dataset order first, attacker order second
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].attacker_id == ids[i % 3]);
    CHECK(records[i].source.sentence.tokens == fix.data.examples[i / 3].sentence.tokens);
  }
  // class-0 sentences have cross-class synonyms everywhere: attacks succeed
  CHECK(records[0].outcome.success);

  SUBCASE("empty attacker list is an error") {
    CHECK_THROWS_AS(sample_adversaries(fix.victim, fix.data, {}, fix.config()),
                    std::invalid_argument);
  }

  SUBCASE("jobs do not change the outcome") {
    std::vector<AdversaryRecord> par =
        sample_adversaries(fix.victim, fix.data, ids, fix.config(), 4);
    REQUIRE(par.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      CHECK(par[i].outcome.perturbed.tokens == records[i].outcome.perturbed.tokens);
      CHECK(par[i].outcome.queries == records[i].outcome.queries);
    }
  }
}

TEST_CASE("zero-weight victim never yields successful flips on tie-break labels") {
  SamplingFixture fix;
  JointModelParams zero = JointModelParams::zeros(fix.features, 2);
  Dataset label0;
  label0.class_count = 2;
  for (int i = 0; i < 4; ++i) {
    label0.examples.push_back({Sentence::from_tokens({"crimson", "ruby"}), 0});
  }
  const std::vector<std::string> ids = {"pwws", "gradimp", "delimp"};
  for (const AdversaryRecord& rec : sample_adversaries(zero, label0, ids, fix.config())) {
    CHECK(!rec.outcome.success);
  }
}

TEST_CASE("detection dataset construction follows the three-row labeling rule") {
  SamplingFixture fix;
  const std::vector<std::string> ids = {"pwws"};
  std::vector<AdversaryRecord> records =
      sample_adversaries(fix.victim, fix.data, ids, fix.config());
  std::vector<AugmentedExample> rows = construct_detection_dataset(fix.data, records);

  REQUIRE(rows.size() == fix.data.examples.size() + records.size());
  // naturals first: (y, null, 0)
  for (std::size_t i = 0; i < fix.data.examples.size(); ++i) {
    CHECK(rows[i].y1 == fix.data.examples[i].label);
    CHECK(rows[i].y2 == kNullLabel);
    CHECK(rows[i].y3 == 0);
  }
  // record rows follow Eq-style exclusivity
  for (std::size_t i = fix.data.examples.size(); i < rows.size(); ++i) {
    const AdversaryRecord& rec = records[i - fix.data.examples.size()];
    CHECK(augmented_valid(rows[i], 2));
    if (rec.outcome.success) {
      CHECK(rows[i].y3 == 1);
      CHECK(rows[i].y2 == rec.outcome.predicted_label);
      CHECK(rows[i].y1 == kNullLabel);
    } else {
      CHECK(rows[i].y3 == 0);
      CHECK(rows[i].y1 == rec.source.label);
      CHECK(rows[i].y2 == kNullLabel);
    }
    CHECK(rows[i].sentence.tokens == rec.outcome.perturbed.tokens);
  }

  SUBCASE("a record from outside the dataset is rejected") {
    std::vector<AdversaryRecord> alien = records;
    alien[0].source.sentence = Sentence::from_tokens({"never", "seen"});
    CHECK_THROWS_AS(construct_detection_dataset(fix.data, alien), std::invalid_argument);
  }

  SUBCASE("single_attack_dataset is the one-attacker composition") {
    std::vector<AugmentedExample> single =
        single_attack_dataset(fix.victim, fix.data, "pwws", fix.config());
    REQUIRE(single.size() == rows.size());
    CHECK(single.size() == 2 * fix.data.examples.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(single[i].sentence.tokens == rows[i].sentence.tokens);
      CHECK(single[i].y1 == rows[i].y1);
      CHECK(single[i].y2 == rows[i].y2);
      CHECK(single[i].y3 == rows[i].y3);
    }
  }
}

TEST_CASE("augmented jsonl round-trips") {
  SamplingFixture fix;
  const std::vector<std::string> ids = {"pwws", "delimp"};
  std::vector<AugmentedRow> rows =
      build_detection_rows(fix.data, sample_adversaries(fix.victim, fix.data, ids, fix.config()));

  fs::path path = fs::temp_directory_path() / "rpd_augmented_test.jsonl";
  save_augmented_jsonl(rows, path);
  std::vector<AugmentedRow> back = load_augmented_jsonl(path, 2);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].example.sentence.tokens == rows[i].example.sentence.tokens);
    CHECK(back[i].example.y1 == rows[i].example.y1);
    CHECK(back[i].example.y2 == rows[i].example.y2);
    CHECK(back[i].example.y3 == rows[i].example.y3);
    CHECK(back[i].origin == rows[i].origin);
    CHECK(back[i].attacker == rows[i].attacker);
  }
  // inference of the class count gives the same validation result
  CHECK(load_augmented_jsonl(path).size() == rows.size());

  SUBCASE("invariant violations are rejected at load") {
    fs::path bad = fs::temp_directory_path() / "rpd_augmented_bad.jsonl";
    std::ofstream out(bad);
    out << R"({"text": "x", "y1": 0, "y2": 1, "y3": 1, "origin": "natural", "attacker": null})"
        << "\n";
    out.close();
    CHECK_THROWS_AS(load_augmented_jsonl(bad, 2), DataError);
  }
}

TEST_CASE("relabel_with_source keeps the truth for baseline training") {
  SamplingFixture fix;
  const std::vector<std::string> ids = {"pwws"};
  std::vector<AdversaryRecord> records =
      sample_adversaries(fix.victim, fix.data, ids, fix.config());
  std::vector<AugmentedExample> rows = relabel_with_source(records);
  REQUIRE(rows.size() == records.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].y1 == records[i].source.label);
    CHECK(rows[i].y3 == 0);
    CHECK(rows[i].sentence.tokens == records[i].outcome.perturbed.tokens);
  }
}
