#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rpd/attack.hpp"
#include "rpd/corpus.hpp"
#include "rpd/features.hpp"
#include "rpd/model.hpp"

namespace rpd {

// Everything a pipeline run needs, with documented defaults. Parsed from an
// INI-style file of `key = value` lines under [section] headers; unknown
// sections or keys are rejected. Command-line flags override file values.
struct RunConfig {
  // [data] -- empty paths resolve inside the output directory
  std::string train_path;    // default <out>/train.jsonl
  std::string test_path;     // default <out>/test.jsonl
  std::string valid_path;    // default: the test split
  std::string lexicon_path;  // default <out>/lexicon.tsv
  std::string data_format = "jsonl";  // jsonl | csv
  std::optional<int> class_count;

  // [features]
  std::uint32_t buckets = 1u << 18;
  std::vector<int> ngram_orders = {1, 2};

  // [train]
  double learning_rate = 0.1;
  int batch_size = 16;
  int epochs = 5;
  double alpha = 5.0;
  double beta = 5.0;
  double lambda = 1e-5;
  int max_tokens = 80;

  // [attack]
  std::vector<std::string> attackers = {"pwws", "gradimp", "delimp"};  // sampling
  std::vector<std::string> eval_attackers = {"pwws"};                  // attack/evaluate
  double max_sub_ratio = 0.4;
  int query_budget = 2000;
  bool use_stopwords = true;
  std::string attack_target = "victim";  // checkpoint attacked by `attack`

  // [defense]
  std::string repair_attacker = "pwws";
  int repair_rounds = 3;

  // [corpus] (gen-corpus; the generator seed is the run seed)
  CorpusSpec corpus;

  // [run]
  std::string out_dir = "out";
  std::uint64_t seed = 42;
  int jobs = 1;
};

RunConfig parse_run_config_text(const std::string& text, const RunConfig& base = {});
RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base = {});

// Canonical `section.key = value` dump of the effective config (sorted keys),
// and its FNV-1a digest recorded in reports.
std::string canonical_config(const RunConfig& cfg);
std::string config_digest(const RunConfig& cfg);

// One line per key: "section.key = default  # description", for --help.
std::string describe_config_keys();

TrainConfig make_train_config(const RunConfig& cfg);
FeatureConfig make_feature_config(const RunConfig& cfg);
AttackerConfig make_attacker_config(const RunConfig& cfg,
                                    std::shared_ptr<const SynonymLexicon> lexicon);

}  // namespace rpd
