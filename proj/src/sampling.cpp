#include "rpd/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "json.hpp"
#include "rpd/errors.hpp"
#include "rpd/parallel.hpp"

namespace rpd {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  pool.reserve(count);
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<AdversaryRecord> sample_adversaries(const JointModelParams& victim,
                                                const Dataset& data,
                                                std::span<const std::string> attacker_ids,
                                                const AttackerConfig& cfg, int jobs) {
  if (attacker_ids.empty()) {
    throw std::invalid_argument("sample_adversaries: no attacker ids given");
  }
  const std::size_t n_att = attacker_ids.size();
  std::vector<AdversaryRecord> records(data.examples.size() * n_att);
  parallel_for(records.size(), jobs, [&](std::size_t slot) {
    const std::size_t ex_idx = slot / n_att;
    const std::size_t att_idx = slot % n_att;
    const LabeledExample& ex = data.examples[ex_idx];
    AdversaryRecord& rec = records[slot];
    rec.source = ex;
    rec.attacker_id = attacker_ids[att_idx];
    rec.outcome = attack(rec.attacker_id, victim, ex, cfg);
  });
  return records;
}

namespace {

std::string example_key(const Sentence& s, int label) {
  return std::to_string(label) + "\x1f" + s.text();
}

void check_sources(const Dataset& natural, const std::vector<AdversaryRecord>& records) {
  std::unordered_set<std::string> members;
  members.reserve(natural.examples.size());
  for (const LabeledExample& ex : natural.examples) {
    members.insert(example_key(ex.sentence, ex.label));
  }
  for (const AdversaryRecord& rec : records) {
    if (!members.contains(example_key(rec.source.sentence, rec.source.label))) {
      throw std::invalid_argument(
          "construct_detection_dataset: record source is not a member of the natural dataset");
    }
  }
}

}  // namespace

std::vector<AugmentedExample> construct_detection_dataset(
    const Dataset& natural, const std::vector<AdversaryRecord>& records) {
  return strip_annotations(build_detection_rows(natural, records));
}

std::vector<AugmentedRow> build_detection_rows(const Dataset& natural,
                                               const std::vector<AdversaryRecord>& records) {
  check_sources(natural, records);
  std::vector<AugmentedRow> rows;
  rows.reserve(natural.examples.size() + records.size());
  for (const LabeledExample& ex : natural.examples) {
    rows.push_back({{ex.sentence, ex.label, kNullLabel, 0}, "natural", ""});
  }
  for (const AdversaryRecord& rec : records) {
    if (rec.outcome.success) {
      rows.push_back({{rec.outcome.perturbed, kNullLabel, rec.outcome.predicted_label, 1},
                      "adversary-success",
                      rec.attacker_id});
    } else {
      rows.push_back({{rec.outcome.perturbed, rec.source.label, kNullLabel, 0},
                      "adversary-fail",
                      rec.attacker_id});
    }
  }
  return rows;
}

std::vector<AugmentedExample> strip_annotations(const std::vector<AugmentedRow>& rows) {
  std::vector<AugmentedExample> out;
  out.reserve(rows.size());
  for (const AugmentedRow& row : rows) out.push_back(row.example);
  return out;
}

std::vector<AugmentedExample> single_attack_dataset(const JointModelParams& victim,
                                                    const Dataset& data,
                                                    const std::string& attacker_id,
                                                    const AttackerConfig& cfg, int jobs) {
  const std::string ids[] = {attacker_id};
  return construct_detection_dataset(data, sample_adversaries(victim, data, ids, cfg, jobs));
}

std::vector<AugmentedExample> relabel_with_source(const std::vector<AdversaryRecord>& records) {
  std::vector<AugmentedExample> rows;
  rows.reserve(records.size());
  for (const AdversaryRecord& rec : records) {
    rows.push_back({rec.outcome.perturbed, rec.source.label, kNullLabel, 0});
  }
  return rows;
}

void save_augmented_jsonl(std::span<const AugmentedRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write augmented dataset: " + path.string());
  for (const AugmentedRow& row : rows) {
    nlohmann::json obj;
    obj["text"] = row.example.sentence.text();
    obj["y1"] = row.example.y1 == kNullLabel ? nlohmann::json(nullptr)
                                             : nlohmann::json(row.example.y1);
    obj["y2"] = row.example.y2 == kNullLabel ? nlohmann::json(nullptr)
                                             : nlohmann::json(row.example.y2);
    obj["y3"] = row.example.y3;
    obj["origin"] = row.origin;
    obj["attacker"] = row.attacker.empty() ? nlohmann::json(nullptr) : nlohmann::json(row.attacker);
    out << obj.dump() << '\n';
  }
}

std::vector<AugmentedRow> load_augmented_jsonl(const std::filesystem::path& path,
                                               int class_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open augmented dataset: " + path.string());
  std::vector<AugmentedRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": malformed JSON (" +
                      std::string(e.what()) + ")");
    }
    AugmentedRow row;
    try {
      row.example.sentence = tokenize(obj.at("text").get<std::string>());
      row.example.y1 = obj.at("y1").is_null() ? kNullLabel : obj.at("y1").get<int>();
      row.example.y2 = obj.at("y2").is_null() ? kNullLabel : obj.at("y2").get<int>();
      row.example.y3 = obj.at("y3").get<int>();
      row.origin = obj.value("origin", std::string("natural"));
      row.attacker = obj.at("attacker").is_null() ? "" : obj.at("attacker").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": bad record (" +
                      std::string(e.what()) + ")");
    }
    rows.push_back(std::move(row));
  }
  int effective = class_count;
  if (effective < 0) {
    int max_label = -1;
    for (const AugmentedRow& row : rows) {
      max_label = std::max({max_label, row.example.y1, row.example.y2});
    }
    effective = max_label + 1;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!augmented_valid(rows[i].example, effective)) {
      throw DataError(path.string() + ": row " + std::to_string(i + 1) +
                      ": labels violate the augmented-example invariant");
    }
  }
  return rows;
}

}  // namespace rpd
