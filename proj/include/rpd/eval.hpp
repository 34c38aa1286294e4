#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rpd/attack.hpp"
#include "rpd/defense.hpp"
#include "rpd/model.hpp"

namespace rpd {

// One member of the attacked dataset: the successful adversary for its source
// example, or the untouched natural when every attacker failed.
struct EvalEntry {
  std::size_t source_index = 0;
  Sentence text;         // the attacked-dataset member
  int label = 0;         // source truth
  bool is_adversary = false;
  int orig_pred = 0;     // undefended prediction on the original text
  int att_pred = 0;      // undefended prediction on `text`
  std::string attacker;  // id that produced the flip, empty for naturals
};

// d_att in original dataset order; d_adv/d_nat are the is_adversary split.
// |entries| always equals the source dataset size.
struct EvalPartition {
  std::vector<EvalEntry> entries;
  int class_count = 0;

  std::size_t adv_count() const;
  std::size_t nat_count() const { return entries.size() - adv_count(); }
};

// Attacks every example with the given attackers (first success wins).
EvalPartition build_partition(const JointModelParams& model, const Dataset& data,
                              std::span<const std::string> attacker_ids,
                              const AttackerConfig& cfg, int jobs = 1);

// Standard-classification tallies. For binary tasks P/N split on the label;
// otherwise every example counts into P.
struct Tally {
  long tp = 0, tn = 0, p = 0, n = 0;
  double ratio() const;
};

void tally_prediction(Tally& t, int label, int pred, int class_count);

struct MetricsReport {
  double clean_acc = 0, attacked_acc = 0, detection_acc = 0, defense_acc = 0, repaired_acc = 0;
  Tally clean, attacked, defense, repaired;
  Tally detection;      // starred tallies over d_adv (n always 0 there)
  long nat_detect_fp = 0, nat_detect_total = 0;  // detector verdicts on the natural split
  long repair_success = 0, repair_detected = 0;  // repairs among flagged adversaries
  double victim_clean_acc = 0;  // undefended victim on the same split, when known
  Tally victim_clean;
  std::string config_digest;
  std::uint64_t seed = 0;
};

// The five accuracy ratios over d_att and its defense traces (one trace per
// entry, same order). Throws on size mismatch. The natural-split detector
// tallies are not derivable from the traces and stay zero here.
MetricsReport compute_metrics(const EvalPartition& partition,
                              std::span<const DefenseTrace> traces);

// Model-output similarity: texts are encoded as the standard head's
// pre-softmax score vector centered by its mean, then compared by cosine.
std::vector<double> encode_centered_scores(const JointModelParams& model, const Sentence& s);

struct CosineAnalysis {
  double delta_adv = 0;  // mean cosine over adversary-natural pairs
  double delta_rep = 0;  // mean cosine over repaired-natural pairs
  std::vector<double> adv_pairs;
  std::vector<double> rep_pairs;
};

// The three lists are aligned by source example. Byte-equal texts score
// exactly 1.0.
CosineAnalysis cosine_analysis(const JointModelParams& model, std::span<const Sentence> naturals,
                               std::span<const Sentence> adversaries,
                               std::span<const Sentence> repaired);

enum class ReportFormat { json, csv, markdown };
ReportFormat parse_report_format(const std::string& name);

// json is the canonical machine format: fixed schema, sorted keys,
// byte-deterministic. markdown renders a metrics grid; csv flattens tallies.
void emit_report(const MetricsReport& report, const std::filesystem::path& path,
                 ReportFormat format);

MetricsReport parse_report_json(const std::filesystem::path& path);

}  // namespace rpd
