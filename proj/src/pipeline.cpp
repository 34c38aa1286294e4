#include "rpd/pipeline.hpp"

#include <fstream>

#include "json.hpp"
#include "rpd/defense.hpp"
#include "rpd/errors.hpp"
#include "rpd/parallel.hpp"

namespace rpd {

namespace {

namespace fs = std::filesystem;

std::string resolve_data_path(const RunConfig& cfg, const std::string& explicit_path,
                              const char* fallback_name) {
  if (!explicit_path.empty()) return explicit_path;
  return (fs::path(cfg.out_dir) / fallback_name).string();
}

DataFormat parse_format(const RunConfig& cfg) {
  if (cfg.data_format == "jsonl") return DataFormat::jsonl;
  if (cfg.data_format == "csv") return DataFormat::csv;
  throw ConfigError("data.format must be jsonl or csv, got '" + cfg.data_format + "'");
}

Dataset load_split(const RunConfig& cfg, const std::string& path, const char* fallback) {
  return load_dataset(resolve_data_path(cfg, path, fallback), parse_format(cfg),
                      cfg.class_count);
}

std::shared_ptr<const SynonymLexicon> load_lexicon_shared(const RunConfig& cfg) {
  return std::make_shared<const SynonymLexicon>(
      SynonymLexicon::load(resolve_data_path(cfg, cfg.lexicon_path, "lexicon.tsv")));
}

fs::path out_path(const RunConfig& cfg, const char* name) {
  fs::create_directories(cfg.out_dir);
  return fs::path(cfg.out_dir) / name;
}

int std_prediction(const JointModelParams& model, const Sentence& s) {
  return argmax(softmax(head_scores(model.std_head, featurize(s, model.features))));
}

double split_accuracy(const JointModelParams& model, const Dataset& data) {
  if (data.examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const LabeledExample& ex : data.examples) {
    if (std_prediction(model, ex.sentence) == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.examples.size());
}

std::vector<DefenseTrace> defend_all(const JointModelParams& joint, const EvalPartition& part,
                                     const AttackerConfig& attcfg, const RunConfig& cfg) {
  std::vector<DefenseTrace> traces(part.entries.size());
  parallel_for(part.entries.size(), cfg.jobs, [&](std::size_t i) {
    traces[i] = defend(joint, part.entries[i].text, attcfg, cfg.repair_attacker,
                       cfg.repair_rounds);
  });
  return traces;
}

}  // namespace

void save_partition_jsonl(const EvalPartition& partition, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write attacked dataset: " + path.string());
  out << nlohmann::json{{"class_count", partition.class_count}}.dump() << '\n';
  for (const EvalEntry& e : partition.entries) {
    nlohmann::json j;
    j["source_index"] = e.source_index;
    j["text"] = e.text.text();
    j["label"] = e.label;
    j["is_adversary"] = e.is_adversary;
    j["attacker"] = e.attacker.empty() ? nlohmann::json(nullptr) : nlohmann::json(e.attacker);
    j["orig_pred"] = e.orig_pred;
    j["att_pred"] = e.att_pred;
    out << j.dump() << '\n';
  }
}

EvalPartition load_partition_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open attacked dataset: " + path.string());
  EvalPartition part;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": malformed JSON (" +
                      std::string(e.what()) + ")");
    }
    try {
      if (line_no == 1 && j.contains("class_count")) {
        part.class_count = j.at("class_count").get<int>();
        continue;
      }
      EvalEntry e;
      e.source_index = j.at("source_index").get<std::size_t>();
      e.text = tokenize(j.at("text").get<std::string>());
      e.label = j.at("label").get<int>();
      e.is_adversary = j.at("is_adversary").get<bool>();
      e.attacker = j.at("attacker").is_null() ? "" : j.at("attacker").get<std::string>();
      e.orig_pred = j.at("orig_pred").get<int>();
      e.att_pred = j.at("att_pred").get<int>();
      part.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": bad record (" +
                      std::string(e.what()) + ")");
    }
  }
  if (part.class_count <= 0) {
    throw DataError(path.string() + ": missing class_count header line");
  }
  return part;
}

void run_gen_corpus(const RunConfig& cfg) {
  CorpusSpec spec = cfg.corpus;
  spec.seed = cfg.seed;
  GeneratedCorpus corpus = generate_corpus(spec);
  save_dataset_jsonl(corpus.train, out_path(cfg, "train.jsonl"));
  save_dataset_jsonl(corpus.test, out_path(cfg, "test.jsonl"));
  corpus.lexicon.save(out_path(cfg, "lexicon.tsv"));
}

VictimSummary run_train_victim(const RunConfig& cfg) {
  Dataset train = load_split(cfg, cfg.train_path, "train.jsonl");
  JointModelParams victim = train_victim(train, make_train_config(cfg), make_feature_config(cfg));
  VictimSummary summary;
  summary.checkpoint = out_path(cfg, "victim.ckpt");
  save_model(victim, summary.checkpoint);
  Dataset valid = cfg.valid_path.empty() ? load_split(cfg, cfg.test_path, "test.jsonl")
                                          : load_split(cfg, cfg.valid_path, "test.jsonl");
  summary.valid_clean_acc = split_accuracy(victim, valid);
  return summary;
}

SampleSummary run_sample(const RunConfig& cfg) {
  Dataset train = load_split(cfg, cfg.train_path, "train.jsonl");
  JointModelParams victim = load_model(out_path(cfg, "victim.ckpt"));
  AttackerConfig attcfg = make_attacker_config(cfg, load_lexicon_shared(cfg));
  std::vector<AdversaryRecord> records =
      sample_adversaries(victim, train, cfg.attackers, attcfg, cfg.jobs);
  std::vector<AugmentedRow> rows = build_detection_rows(train, records);
  SampleSummary summary;
  summary.naturals = train.examples.size();
  summary.records = records.size();
  for (const AdversaryRecord& rec : records) {
    if (rec.outcome.success) ++summary.successes;
  }
  summary.augmented = out_path(cfg, "augmented.jsonl");
  save_augmented_jsonl(rows, summary.augmented);
  return summary;
}

TrainJointSummary run_train_joint(const RunConfig& cfg, bool vanilla_adv) {
  std::vector<AugmentedRow> rows =
      load_augmented_jsonl(out_path(cfg, "augmented.jsonl"), cfg.class_count.value_or(-1));
  int class_count = cfg.class_count.value_or(-1);
  if (class_count < 0) {
    for (const AugmentedRow& row : rows) {
      class_count = std::max({class_count, row.example.y1 + 1, row.example.y2 + 1});
    }
  }
  TrainConfig tcfg = make_train_config(cfg);
  tcfg.vanilla_adv_objective = vanilla_adv;
  JointModelParams joint =
      train_joint(strip_annotations(rows), tcfg, make_feature_config(cfg), class_count);
  TrainJointSummary summary;
  summary.vanilla = vanilla_adv;
  summary.checkpoint = out_path(cfg, vanilla_adv ? "joint_vanilla_at.ckpt" : "joint.ckpt");
  save_model(joint, summary.checkpoint);
  return summary;
}

AttackSummary run_attack(const RunConfig& cfg) {
  Dataset test = load_split(cfg, cfg.test_path, "test.jsonl");
  const char* target = cfg.attack_target == "joint" ? "joint.ckpt" : "victim.ckpt";
  if (cfg.attack_target != "joint" && cfg.attack_target != "victim") {
    throw ConfigError("attack.target must be victim or joint, got '" + cfg.attack_target + "'");
  }
  JointModelParams model = load_model(out_path(cfg, target));
  AttackerConfig attcfg = make_attacker_config(cfg, load_lexicon_shared(cfg));
  EvalPartition part = build_partition(model, test, cfg.eval_attackers, attcfg, cfg.jobs);

  AttackSummary summary;
  summary.adversaries = part.adv_count();
  Tally clean, attacked;
  for (const EvalEntry& e : part.entries) {
    tally_prediction(clean, e.label, e.orig_pred, part.class_count);
    tally_prediction(attacked, e.label, e.att_pred, part.class_count);
  }
  summary.clean_acc = clean.ratio();
  summary.attacked_acc = attacked.ratio();
  summary.attacked = out_path(cfg, "attacked.jsonl");
  save_partition_jsonl(part, summary.attacked);
  return summary;
}

DefendSummary run_defend(const RunConfig& cfg) {
  EvalPartition part = load_partition_jsonl(out_path(cfg, "attacked.jsonl"));
  JointModelParams joint = load_model(out_path(cfg, "joint.ckpt"));
  AttackerConfig attcfg = make_attacker_config(cfg, load_lexicon_shared(cfg));
  std::vector<DefenseTrace> traces = defend_all(joint, part, attcfg, cfg);

  DefendSummary summary;
  summary.inputs = traces.size();
  for (const DefenseTrace& tr : traces) {
    if (tr.adversary_verdict) ++summary.flagged;
    if (tr.status == DefenseStatus::repaired) ++summary.repaired;
  }
  summary.traces = out_path(cfg, "traces.jsonl");
  save_traces_jsonl(traces, summary.traces);
  return summary;
}

EvaluateSummary run_evaluate(const RunConfig& cfg, bool vanilla_adv) {
  Dataset test = load_split(cfg, cfg.test_path, "test.jsonl");
  JointModelParams victim = load_model(out_path(cfg, "victim.ckpt"));
  JointModelParams joint = [&] {
    if (!vanilla_adv) return load_model(out_path(cfg, "joint.ckpt"));
    return load_model(run_train_joint(cfg, true).checkpoint);
  }();
  AttackerConfig attcfg = make_attacker_config(cfg, load_lexicon_shared(cfg));

  EvalPartition part = build_partition(joint, test, cfg.eval_attackers, attcfg, cfg.jobs);
  std::vector<DefenseTrace> traces = defend_all(joint, part, attcfg, cfg);

  MetricsReport report = compute_metrics(part, traces);
  for (const LabeledExample& ex : test.examples) {
    ++report.nat_detect_total;
    if (detect(joint, ex.sentence).is_adversary) ++report.nat_detect_fp;
    tally_prediction(report.victim_clean, ex.label, std_prediction(victim, ex.sentence),
                     test.class_count);
  }
  report.victim_clean_acc = report.victim_clean.ratio();
  report.config_digest = config_digest(cfg);
  report.seed = cfg.seed;

  EvaluateSummary summary;
  summary.report = report;
  summary.report_json = out_path(cfg, vanilla_adv ? "report_vanilla_at.json" : "report.json");
  summary.report_csv = out_path(cfg, vanilla_adv ? "report_vanilla_at.csv" : "report.csv");
  summary.report_md = out_path(cfg, vanilla_adv ? "report_vanilla_at.md" : "report.md");
  summary.traces = out_path(cfg, "traces.jsonl");
  summary.attacked = out_path(cfg, "attacked.jsonl");
  emit_report(report, summary.report_json, ReportFormat::json);
  emit_report(report, summary.report_csv, ReportFormat::csv);
  emit_report(report, summary.report_md, ReportFormat::markdown);
  save_traces_jsonl(traces, summary.traces);
  save_partition_jsonl(part, summary.attacked);
  return summary;
}

AnalyzeSummary run_analyze(const RunConfig& cfg) {
  Dataset test = load_split(cfg, cfg.test_path, "test.jsonl");
  JointModelParams joint = load_model(out_path(cfg, "joint.ckpt"));
  AttackerConfig attcfg = make_attacker_config(cfg, load_lexicon_shared(cfg));

  EvalPartition part = build_partition(joint, test, cfg.eval_attackers, attcfg, cfg.jobs);
  std::vector<DefenseTrace> traces = defend_all(joint, part, attcfg, cfg);

  std::vector<Sentence> naturals, adversaries, repaired;
  for (std::size_t i = 0; i < part.entries.size(); ++i) {
    const EvalEntry& e = part.entries[i];
    if (!e.is_adversary) continue;
    naturals.push_back(test.examples[e.source_index].sentence);
    adversaries.push_back(e.text);
    repaired.push_back(traces[i].output_text());
  }
  AnalyzeSummary summary;
  summary.cosine = cosine_analysis(joint, naturals, adversaries, repaired);

  summary.cosine_json = out_path(cfg, "cosine.json");
  {
    std::ofstream out(summary.cosine_json, std::ios::binary);
    if (!out) throw DataError("cannot write cosine report");
    nlohmann::json j;
    j["delta_adv"] = summary.cosine.delta_adv;
    j["delta_rep"] = summary.cosine.delta_rep;
    j["pairs"] = summary.cosine.adv_pairs.size();
    j["config_digest"] = config_digest(cfg);
    j["seed"] = cfg.seed;
    out << j.dump(2) << '\n';
  }

  summary.pairs_csv = out_path(cfg, "cosine_pairs.csv");
  {
    std::ofstream out(summary.pairs_csv, std::ios::binary);
    out << "pair,adv_cosine,rep_cosine\n";
    for (std::size_t i = 0; i < summary.cosine.adv_pairs.size(); ++i) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i, summary.cosine.adv_pairs[i],
                    summary.cosine.rep_pairs[i]);
      out << buf;
    }
  }

  // Raw centered score vectors, for external projection tools.
  summary.vectors_csv = out_path(cfg, "vectors.csv");
  {
    std::ofstream out(summary.vectors_csv, std::ios::binary);
    out << "group,pair";
    for (int c = 0; c < joint.class_count; ++c) out << ",v" << c;
    out << '\n';
    auto dump_group = [&](const char* group, const std::vector<Sentence>& texts) {
      for (std::size_t i = 0; i < texts.size(); ++i) {
        std::vector<double> z = encode_centered_scores(joint, texts[i]);
        out << group << ',' << i;
        for (double v : z) {
          char buf[40];
          std::snprintf(buf, sizeof(buf), ",%.17g", v);
          out << buf;
        }
        out << '\n';
      }
    };
    dump_group("natural", naturals);
    dump_group("adversary", adversaries);
    dump_group("repaired", repaired);
  }
  return summary;
}

}  // namespace rpd
