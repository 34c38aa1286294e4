#include "rpd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "rpd/errors.hpp"
#include "rpd/parallel.hpp"

namespace rpd {

std::size_t EvalPartition::adv_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const EvalEntry& e) { return e.is_adversary; }));
}

EvalPartition build_partition(const JointModelParams& model, const Dataset& data,
                              std::span<const std::string> attacker_ids,
                              const AttackerConfig& cfg, int jobs) {
  if (attacker_ids.empty()) throw std::invalid_argument("build_partition: no attacker ids given");
  EvalPartition part;
  part.class_count = data.class_count;
  part.entries.resize(data.examples.size());
  parallel_for(data.examples.size(), jobs, [&](std::size_t i) {
    const LabeledExample& ex = data.examples[i];
    EvalEntry& entry = part.entries[i];
    entry.source_index = i;
    entry.label = ex.label;
    entry.orig_pred =
        argmax(softmax(head_scores(model.std_head, featurize(ex.sentence, model.features))));
    entry.text = ex.sentence;
    entry.att_pred = entry.orig_pred;
    for (const std::string& id : attacker_ids) {
      AttackOutcome out = attack(id, model, ex, cfg);
      if (out.success) {
        entry.is_adversary = true;
        entry.attacker = id;
        entry.text = std::move(out.perturbed);
        entry.att_pred = out.predicted_label;
        break;
      }
    }
  });
  return part;
}

double Tally::ratio() const {
  const long denom = p + n;
  return denom == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(denom);
}

void tally_prediction(Tally& t, int label, int pred, int class_count) {
  const bool binary = class_count == 2;
  if (binary && label == 0) {
    ++t.n;
    if (pred == label) ++t.tn;
  } else {
    ++t.p;
    if (pred == label) ++t.tp;
  }
}

MetricsReport compute_metrics(const EvalPartition& partition,
                              std::span<const DefenseTrace> traces) {
  if (traces.size() != partition.entries.size()) {
    throw std::invalid_argument("compute_metrics: one trace per attacked-dataset member required");
  }
  MetricsReport rep;
  const int C = partition.class_count;
  for (std::size_t i = 0; i < partition.entries.size(); ++i) {
    const EvalEntry& e = partition.entries[i];
    const DefenseTrace& tr = traces[i];
    tally_prediction(rep.clean, e.label, e.orig_pred, C);
    tally_prediction(rep.attacked, e.label, e.att_pred, C);
    tally_prediction(rep.repaired, e.label, tr.final_label, C);
    if (e.is_adversary) {
      tally_prediction(rep.defense, e.label, tr.final_label, C);
      ++rep.detection.p;
      if (tr.adversary_verdict) {
        ++rep.detection.tp;
        ++rep.repair_detected;
        if (tr.status == DefenseStatus::repaired) ++rep.repair_success;
      }
    }
  }
  rep.clean_acc = rep.clean.ratio();
  rep.attacked_acc = rep.attacked.ratio();
  rep.detection_acc = rep.detection.ratio();
  rep.defense_acc = rep.defense.ratio();
  rep.repaired_acc = rep.repaired.ratio();
  return rep;
}

std::vector<double> encode_centered_scores(const JointModelParams& model, const Sentence& s) {
  std::vector<double> z = head_scores(model.std_head, featurize(s, model.features));
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(z.size());
  for (double& v : z) v -= mean;
  return z;
}

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  if (std::equal(a.begin(), a.end(), b.begin(), b.end())) return 1.0;
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace

CosineAnalysis cosine_analysis(const JointModelParams& model, std::span<const Sentence> naturals,
                               std::span<const Sentence> adversaries,
                               std::span<const Sentence> repaired) {
  if (naturals.size() != adversaries.size() || naturals.size() != repaired.size()) {
    throw std::invalid_argument("cosine_analysis: misaligned lists");
  }
  CosineAnalysis out;
  for (std::size_t i = 0; i < naturals.size(); ++i) {
    std::vector<double> zn = encode_centered_scores(model, naturals[i]);
    // Byte-equal texts must score exactly 1 even if the centered vector is 0.
    if (adversaries[i].tokens == naturals[i].tokens) {
      out.adv_pairs.push_back(1.0);
    } else {
      out.adv_pairs.push_back(cosine(encode_centered_scores(model, adversaries[i]), zn));
    }
    if (repaired[i].tokens == naturals[i].tokens) {
      out.rep_pairs.push_back(1.0);
    } else {
      out.rep_pairs.push_back(cosine(encode_centered_scores(model, repaired[i]), zn));
    }
  }
  auto mean = [](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  out.delta_adv = mean(out.adv_pairs);
  out.delta_rep = mean(out.rep_pairs);
  return out;
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "json") return ReportFormat::json;
  if (name == "csv") return ReportFormat::csv;
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  throw ConfigError("unknown report format: " + name);
}

namespace {

nlohmann::json tally_json(const Tally& t) {
  return {{"tp", t.tp}, {"tn", t.tn}, {"p", t.p}, {"n", t.n}};
}

Tally tally_from_json(const nlohmann::json& j) {
  return {j.at("tp").get<long>(), j.at("tn").get<long>(), j.at("p").get<long>(),
          j.at("n").get<long>()};
}

nlohmann::json report_json(const MetricsReport& rep) {
  nlohmann::json j;
  j["metrics"] = {{"clean_acc", rep.clean_acc},
                  {"attacked_acc", rep.attacked_acc},
                  {"detection_acc", rep.detection_acc},
                  {"defense_acc", rep.defense_acc},
                  {"repaired_acc", rep.repaired_acc}};
  j["tallies"] = {{"clean", tally_json(rep.clean)},
                  {"attacked", tally_json(rep.attacked)},
                  {"detection", tally_json(rep.detection)},
                  {"defense", tally_json(rep.defense)},
                  {"repaired", tally_json(rep.repaired)},
                  {"nat_detect", {{"fp", rep.nat_detect_fp}, {"total", rep.nat_detect_total}}},
                  {"repair", {{"success", rep.repair_success}, {"detected", rep.repair_detected}}},
                  {"victim_clean", tally_json(rep.victim_clean)}};
  j["metrics"]["victim_clean_acc"] = rep.victim_clean_acc;
  j["config_digest"] = rep.config_digest;
  j["seed"] = rep.seed;
  return j;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void emit_report(const MetricsReport& rep, const std::filesystem::path& path,
                 ReportFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report: " + path.string());
  switch (format) {
    case ReportFormat::json:
      out << report_json(rep).dump(2) << '\n';
      break;
    case ReportFormat::csv: {
      out << "key,value\n";
      nlohmann::json j = report_json(rep);
      out << "metrics.clean_acc," << format_double(rep.clean_acc) << '\n';
      out << "metrics.attacked_acc," << format_double(rep.attacked_acc) << '\n';
      out << "metrics.detection_acc," << format_double(rep.detection_acc) << '\n';
      out << "metrics.defense_acc," << format_double(rep.defense_acc) << '\n';
      out << "metrics.repaired_acc," << format_double(rep.repaired_acc) << '\n';
      out << "metrics.victim_clean_acc," << format_double(rep.victim_clean_acc) << '\n';
      for (const auto& [name, tally] : j["tallies"].items()) {
        for (const auto& [field, value] : tally.items()) {
          out << "tallies." << name << '.' << field << ',' << value.dump() << '\n';
        }
      }
      out << "config_digest," << rep.config_digest << '\n';
      out << "seed," << rep.seed << '\n';
      break;
    }
    case ReportFormat::markdown: {
      auto pct = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", v * 100.0);
        return std::string(buf);
      };
      out << "| Metric | Acc.(%) |\n|---|---|\n";
      out << "| Clean | " << pct(rep.clean_acc) << " |\n";
      out << "| Attacked | " << pct(rep.attacked_acc) << " |\n";
      out << "| Detection | " << pct(rep.detection_acc) << " |\n";
      out << "| Defense | " << pct(rep.defense_acc) << " |\n";
      out << "| Repaired | " << pct(rep.repaired_acc) << " |\n";
      out << "\nseed " << rep.seed << ", config " << rep.config_digest << "\n";
      break;
    }
  }
  if (!out) throw DataError("write failure on report: " + path.string());
}

MetricsReport parse_report_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open report: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("malformed report json: " + std::string(e.what()));
  }
  MetricsReport rep;
  try {
    rep.clean_acc = j.at("metrics").at("clean_acc").get<double>();
    rep.attacked_acc = j.at("metrics").at("attacked_acc").get<double>();
    rep.detection_acc = j.at("metrics").at("detection_acc").get<double>();
    rep.defense_acc = j.at("metrics").at("defense_acc").get<double>();
    rep.repaired_acc = j.at("metrics").at("repaired_acc").get<double>();
    rep.clean = tally_from_json(j.at("tallies").at("clean"));
    rep.attacked = tally_from_json(j.at("tallies").at("attacked"));
    rep.detection = tally_from_json(j.at("tallies").at("detection"));
    rep.defense = tally_from_json(j.at("tallies").at("defense"));
    rep.repaired = tally_from_json(j.at("tallies").at("repaired"));
    rep.nat_detect_fp = j.at("tallies").at("nat_detect").at("fp").get<long>();
    rep.nat_detect_total = j.at("tallies").at("nat_detect").at("total").get<long>();
    rep.repair_success = j.at("tallies").at("repair").at("success").get<long>();
    rep.repair_detected = j.at("tallies").at("repair").at("detected").get<long>();
    rep.victim_clean = tally_from_json(j.at("tallies").at("victim_clean"));
    rep.victim_clean_acc = j.at("metrics").at("victim_clean_acc").get<double>();
    rep.config_digest = j.at("config_digest").get<std::string>();
    rep.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("report json missing fields: " + std::string(e.what()));
  }
  return rep;
}

}  // namespace rpd
