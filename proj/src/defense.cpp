#include "rpd/defense.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "rpd/errors.hpp"

namespace rpd {

DetectResult detect(const JointModelParams& joint, const Sentence& s) {
  std::vector<double> p =
      softmax(head_scores(joint.det_head, featurize(s, joint.features)));
  return {p[1] > p[0], p[1]};
}

std::string_view to_string(DefenseStatus status) {
  switch (status) {
    case DefenseStatus::passthrough: return "passthrough";
    case DefenseStatus::repaired: return "repaired";
    default: return "unrepaired";
  }
}

const Sentence& DefenseTrace::output_text() const {
  if (status == DefenseStatus::repaired) return repair_attempts.back().perturbed;
  return input;
}

RepairResult repair(const JointModelParams& joint, std::string_view attacker_id, const Sentence& s,
                    int fake_label, const AttackerConfig& cfg, int rounds) {
  if (rounds < 1) throw std::invalid_argument("repair: rounds must be >= 1");
  RepairResult result;
  result.final_label = fake_label;
  // The fake label plays the role of the attacked example's truth: flipping
  // it is exactly the attack's success condition.
  LabeledExample target{s, fake_label};
  for (int r = 0; r < rounds; ++r) {
    AttackerConfig round_cfg = cfg;
    round_cfg.max_sub_ratio = std::min(1.0, cfg.max_sub_ratio + 0.2 * r);
    AttackOutcome out = attack(attacker_id, joint, target, round_cfg);
    result.attempts.push_back(std::move(out));
    if (result.attempts.back().success) {
      result.final_label = result.attempts.back().predicted_label;
      result.status = DefenseStatus::repaired;
      return result;
    }
  }
  result.status = DefenseStatus::unrepaired;
  return result;
}

DefenseTrace defend(const JointModelParams& joint, const Sentence& s, const AttackerConfig& cfg,
                    std::string_view attacker_id, int rounds) {
  DefenseTrace trace;
  trace.input = s;
  DetectResult det = detect(joint, s);
  trace.detector_prob = det.prob;
  trace.adversary_verdict = det.is_adversary;

  const int std_pred = argmax(softmax(head_scores(joint.std_head, featurize(s, joint.features))));
  if (!det.is_adversary) {
    trace.final_label = std_pred;
    trace.status = DefenseStatus::passthrough;
    return trace;
  }
  RepairResult rep = repair(joint, attacker_id, s, std_pred, cfg, rounds);
  trace.repair_attempts = std::move(rep.attempts);
  trace.final_label = rep.final_label;
  trace.status = rep.status;
  return trace;
}

int rat_defend(const JointModelParams& detector_joint, const JointModelParams& natural_model,
               const JointModelParams& adversary_model, const Sentence& s) {
  const JointModelParams& routed =
      detect(detector_joint, s).is_adversary ? adversary_model : natural_model;
  return argmax(softmax(head_scores(routed.std_head, featurize(s, routed.features))));
}

namespace {

nlohmann::json outcome_json(const AttackOutcome& out) {
  nlohmann::json j;
  j["perturbed"] = out.perturbed.text();
  j["predicted_label"] = out.predicted_label;
  j["success"] = out.success;
  j["queries"] = out.queries;
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& sub : out.substitutions) {
    subs.push_back({{"position", sub.position},
                    {"original", sub.original},
                    {"replacement", sub.replacement}});
  }
  j["substitutions"] = std::move(subs);
  return j;
}

}  // namespace

void save_traces_jsonl(std::span<const DefenseTrace> traces, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write traces: " + path.string());
  for (const DefenseTrace& trace : traces) {
    nlohmann::json j;
    j["input"] = trace.input.text();
    j["detector_prob"] = trace.detector_prob;
    j["verdict"] = trace.adversary_verdict ? "adversary" : "natural";
    nlohmann::json attempts = nlohmann::json::array();
    for (const AttackOutcome& att : trace.repair_attempts) attempts.push_back(outcome_json(att));
    j["repair_attempts"] = std::move(attempts);
    j["final_label"] = trace.final_label;
    j["status"] = std::string(to_string(trace.status));
    out << j.dump() << '\n';
  }
}

}  // namespace rpd
