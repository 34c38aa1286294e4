#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rpd/attack.hpp"
#include "rpd/model.hpp"

namespace rpd {

struct AdversaryRecord {
  LabeledExample source;
  AttackOutcome outcome;
  std::string attacker_id;
};

// Runs every attacker against every example of `data` on the victim model.
// Records are ordered by example first, attacker second. `jobs` > 1
// parallelizes across pairs without changing the output.
std::vector<AdversaryRecord> sample_adversaries(const JointModelParams& victim,
                                                const Dataset& data,
                                                std::span<const std::string> attacker_ids,
                                                const AttackerConfig& cfg, int jobs = 1);

// Triple-labeled rows for joint training: every natural example becomes
// (y, null, 0); a failed attack keeps its perturbed text as (y, null, 0); a
// successful attack becomes (perturbed, null, flipped label, 1). Output is
// all naturals followed by all record-derived rows. Throws if a record's
// source is not a member of `natural`.
std::vector<AugmentedExample> construct_detection_dataset(
    const Dataset& natural, const std::vector<AdversaryRecord>& records);

// Convenience composition with a single attacker.
std::vector<AugmentedExample> single_attack_dataset(const JointModelParams& victim,
                                                    const Dataset& data,
                                                    const std::string& attacker_id,
                                                    const AttackerConfig& cfg, int jobs = 1);

// Rows relabeled with the source truth, for the AT/RAT baselines.
std::vector<AugmentedExample> relabel_with_source(const std::vector<AdversaryRecord>& records);

// An augmented example annotated for serialization.
struct AugmentedRow {
  AugmentedExample example;
  std::string origin;    // natural | adversary-success | adversary-fail
  std::string attacker;  // empty when null
};

// construct_detection_dataset plus per-row provenance annotations.
std::vector<AugmentedRow> build_detection_rows(const Dataset& natural,
                                               const std::vector<AdversaryRecord>& records);

std::vector<AugmentedExample> strip_annotations(const std::vector<AugmentedRow>& rows);

// jsonl with fields text, y1, y2 (int or null), y3 (0/1), origin and attacker
// (string or null).
void save_augmented_jsonl(std::span<const AugmentedRow> rows, const std::filesystem::path& path);

// Validates rows against class_count; a negative class_count infers it as
// max(y1, y2) + 1 over the file.
std::vector<AugmentedRow> load_augmented_jsonl(const std::filesystem::path& path,
                                               int class_count = -1);

}  // namespace rpd
