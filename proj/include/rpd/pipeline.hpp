#pragma once

#include <filesystem>

#include "rpd/config.hpp"
#include "rpd/eval.hpp"
#include "rpd/sampling.hpp"

namespace rpd {

// Internal pipeline format for the attacked dataset: a header object line
// {"class_count": C} followed by one object per d_att member.
void save_partition_jsonl(const EvalPartition& partition, const std::filesystem::path& path);
EvalPartition load_partition_jsonl(const std::filesystem::path& path);

struct VictimSummary {
  double valid_clean_acc = 0;
  std::filesystem::path checkpoint;
};

struct SampleSummary {
  std::size_t naturals = 0;
  std::size_t records = 0;
  std::size_t successes = 0;
  std::filesystem::path augmented;
};

struct TrainJointSummary {
  std::filesystem::path checkpoint;
  bool vanilla = false;
};

struct AttackSummary {
  double clean_acc = 0;
  double attacked_acc = 0;
  std::size_t adversaries = 0;
  std::filesystem::path attacked;
};

struct DefendSummary {
  std::size_t inputs = 0;
  std::size_t flagged = 0;
  std::size_t repaired = 0;
  std::filesystem::path traces;
};

struct EvaluateSummary {
  MetricsReport report;
  std::filesystem::path report_json;
  std::filesystem::path report_csv;
  std::filesystem::path report_md;
  std::filesystem::path traces;
  std::filesystem::path attacked;
};

struct AnalyzeSummary {
  CosineAnalysis cosine;
  std::filesystem::path cosine_json;
  std::filesystem::path pairs_csv;
  std::filesystem::path vectors_csv;
};

// Each run_* implements one CLI subcommand on an effective RunConfig. All of
// them are reproducible: (config, seed) determines every output byte.
void run_gen_corpus(const RunConfig& cfg);
VictimSummary run_train_victim(const RunConfig& cfg);
SampleSummary run_sample(const RunConfig& cfg);
TrainJointSummary run_train_joint(const RunConfig& cfg, bool vanilla_adv = false);
AttackSummary run_attack(const RunConfig& cfg);
DefendSummary run_defend(const RunConfig& cfg);
EvaluateSummary run_evaluate(const RunConfig& cfg, bool vanilla_adv = false);
AnalyzeSummary run_analyze(const RunConfig& cfg);

}  // namespace rpd
