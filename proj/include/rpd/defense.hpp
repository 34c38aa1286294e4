#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rpd/attack.hpp"
#include "rpd/model.hpp"

namespace rpd {

struct DetectResult {
  bool is_adversary = false;
  double prob = 0.0;  // detector's adversary-class probability
};

// Detector head verdict; ties resolve to natural.
DetectResult detect(const JointModelParams& joint, const Sentence& s);

enum class DefenseStatus { passthrough, repaired, unrepaired };
std::string_view to_string(DefenseStatus status);

struct DefenseTrace {
  Sentence input;
  double detector_prob = 0.0;
  bool adversary_verdict = false;
  std::vector<AttackOutcome> repair_attempts;
  int final_label = 0;
  DefenseStatus status = DefenseStatus::passthrough;

  // The text the defense hands downstream: the successful repair's
  // perturbation, or the unmodified input otherwise.
  const Sentence& output_text() const;
};

struct RepairResult {
  std::vector<AttackOutcome> attempts;
  int final_label = 0;
  DefenseStatus status = DefenseStatus::unrepaired;
};

// Searches for a safe perturbation by attacking the joint standard head with
// its own (fake) output as the target. Up to `rounds` attempts, escalating
// max_sub_ratio by +0.2 per round; succeeds as soon as the attack flips the
// fake label. Never consults any true label.
RepairResult repair(const JointModelParams& joint, std::string_view attacker_id, const Sentence& s,
                    int fake_label, const AttackerConfig& cfg, int rounds);

// Reactive defense: inputs the detector calls natural pass through to the
// standard head untouched; flagged inputs are repaired.
DefenseTrace defend(const JointModelParams& joint, const Sentence& s, const AttackerConfig& cfg,
                    std::string_view attacker_id = "pwws", int rounds = 3);

// Reactive-adversarial-training baseline: route by the detector verdict to
// one of two standard classifiers.
int rat_defend(const JointModelParams& detector_joint, const JointModelParams& natural_model,
               const JointModelParams& adversary_model, const Sentence& s);

// jsonl mirror of DefenseTrace for audit and evaluation.
void save_traces_jsonl(std::span<const DefenseTrace> traces, const std::filesystem::path& path);

}  // namespace rpd
