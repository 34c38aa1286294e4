#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rpd/attack.hpp"
#include "rpd/corpus.hpp"
#include "rpd/defense.hpp"
#include "rpd/eval.hpp"
#include "rpd/model.hpp"
#include "rpd/sampling.hpp"
#include "rpd/text.hpp"

namespace py = pybind11;
using namespace rpd;

namespace {

AttackerConfig make_cfg(std::shared_ptr<SynonymLexicon> lexicon, double max_sub_ratio,
                        int query_budget, bool use_stopwords, std::uint64_t seed) {
  AttackerConfig cfg;
  cfg.lexicon = std::move(lexicon);
  cfg.max_sub_ratio = max_sub_ratio;
  cfg.query_budget = query_budget;
  if (use_stopwords) cfg.stopwords = default_stopwords();
  cfg.seed = seed;
  return cfg;
}

py::dict metrics_dict(const MetricsReport& rep) {
  py::dict d;
  d["clean_acc"] = rep.clean_acc;
  d["attacked_acc"] = rep.attacked_acc;
  d["detection_acc"] = rep.detection_acc;
  d["defense_acc"] = rep.defense_acc;
  d["repaired_acc"] = rep.repaired_acc;
  d["repair_success"] = rep.repair_success;
  d["repair_detected"] = rep.repair_detected;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Word-substitution attacks, adversarial detection and reactive repair "
            "for linear text classifiers";

  py::class_<Sentence>(m, "Sentence")
      .def(py::init([](const std::string& text) { return tokenize(text); }), py::arg("text"))
      .def_readonly("tokens", &Sentence::tokens)
      .def("text", &Sentence::text)
      .def("__repr__", [](const Sentence& s) { return "Sentence('" + s.text() + "')"; });

  m.def("tokenize", [](const std::string& text) { return tokenize(text).tokens; },
        py::arg("text"), "Split a string into lowercased word tokens.");

  py::class_<SynonymLexicon, std::shared_ptr<SynonymLexicon>>(m, "SynonymLexicon")
      .def(py::init<>())
      .def("add", &SynonymLexicon::add, py::arg("headword"), py::arg("candidates"))
      .def("synonyms", &SynonymLexicon::synonyms, py::arg("word"))
      .def("__len__", &SynonymLexicon::size)
      .def_static("load", [](const std::string& p) {
        return std::make_shared<SynonymLexicon>(SynonymLexicon::load(p));
      }, py::arg("path"))
      .def("save", [](const SynonymLexicon& lex, const std::string& p) { lex.save(p); },
           py::arg("path"));

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("class_count", &Dataset::class_count)
      .def_readonly("name", &Dataset::name)
      .def("__len__", [](const Dataset& d) { return d.examples.size(); })
      .def("example", [](const Dataset& d, std::size_t i) {
        const LabeledExample& ex = d.examples.at(i);
        return py::make_tuple(ex.sentence.text(), ex.label);
      }, py::arg("index"));

  m.def("load_dataset",
        [](const std::string& path, const std::string& format, std::optional<int> class_count) {
          return load_dataset(path, format == "csv" ? DataFormat::csv : DataFormat::jsonl,
                              class_count);
        },
        py::arg("path"), py::arg("format") = "jsonl", py::arg("class_count") = std::nullopt);
  m.def("save_dataset_jsonl", [](const Dataset& d, const std::string& p) {
    save_dataset_jsonl(d, p);
  }, py::arg("dataset"), py::arg("path"));

  py::class_<CorpusSpec>(m, "CorpusSpec")
      .def(py::init<>())
      .def_readwrite("train_size", &CorpusSpec::train_size)
      .def_readwrite("test_size", &CorpusSpec::test_size)
      .def_readwrite("seed", &CorpusSpec::seed)
      .def_readwrite("vocab_size", &CorpusSpec::vocab_size)
      .def_readwrite("contamination_prob", &CorpusSpec::contamination_prob);

  py::class_<GeneratedCorpus>(m, "GeneratedCorpus")
      .def_readonly("train", &GeneratedCorpus::train)
      .def_readonly("test", &GeneratedCorpus::test)
      .def_property_readonly("lexicon", [](const GeneratedCorpus& c) {
        return std::make_shared<SynonymLexicon>(c.lexicon);
      });

  m.def("generate_corpus", &generate_corpus, py::arg("spec") = CorpusSpec{});

  py::class_<FeatureConfig>(m, "FeatureConfig")
      .def(py::init<>())
      .def_readwrite("buckets", &FeatureConfig::buckets)
      .def_readwrite("ngram_orders", &FeatureConfig::ngram_orders)
      .def_readwrite("max_tokens", &FeatureConfig::max_tokens);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("alpha", &TrainConfig::alpha)
      .def_readwrite("beta", &TrainConfig::beta)
      .def_readwrite("lambda_", &TrainConfig::lambda)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("max_tokens", &TrainConfig::max_tokens)
      .def_readwrite("vanilla_adv_objective", &TrainConfig::vanilla_adv_objective);

  py::class_<JointModelParams>(m, "Model")
      .def_readonly("class_count", &JointModelParams::class_count)
      .def_readonly("features", &JointModelParams::features)
      .def("predict", [](const JointModelParams& mdl, const std::string& text) {
        return argmax(softmax(head_scores(mdl.std_head,
                                          featurize(tokenize(text), mdl.features))));
      }, py::arg("text"), "Standard-head class prediction.")
      .def("probs", [](const JointModelParams& mdl, const std::string& text) {
        return softmax(head_scores(mdl.std_head, featurize(tokenize(text), mdl.features)));
      }, py::arg("text"));

  m.def("save_model", [](const JointModelParams& p, const std::string& path) {
    save_model(p, path);
  }, py::arg("model"), py::arg("path"));
  m.def("load_model", [](const std::string& path) { return load_model(path); }, py::arg("path"));

  py::class_<AugmentedExample>(m, "AugmentedExample")
      .def(py::init([](const std::string& text, std::optional<int> y1, std::optional<int> y2,
                       int y3) {
             return AugmentedExample{tokenize(text), y1.value_or(kNullLabel),
                                     y2.value_or(kNullLabel), y3};
           }),
           py::arg("text"), py::arg("y1") = std::nullopt, py::arg("y2") = std::nullopt,
           py::arg("y3") = 0)
      .def_property_readonly("text", [](const AugmentedExample& e) { return e.sentence.text(); })
      .def_property_readonly("y1", [](const AugmentedExample& e) {
        return e.y1 == kNullLabel ? std::optional<int>() : std::optional<int>(e.y1);
      })
      .def_property_readonly("y2", [](const AugmentedExample& e) {
        return e.y2 == kNullLabel ? std::optional<int>() : std::optional<int>(e.y2);
      })
      .def_readonly("y3", &AugmentedExample::y3);

  m.def("train_victim",
        [](const Dataset& data, const TrainConfig& cfg, const FeatureConfig& feats) {
          return train_victim(data, cfg, feats);
        },
        py::arg("data"), py::arg("config") = TrainConfig{},
        py::arg("features") = FeatureConfig{});

  m.def("train_joint",
        [](const std::vector<AugmentedExample>& rows, const TrainConfig& cfg,
           const FeatureConfig& feats, int class_count) {
          return train_joint(rows, cfg, feats, class_count);
        },
        py::arg("rows"), py::arg("config") = TrainConfig{}, py::arg("features") = FeatureConfig{},
        py::arg("class_count") = 2);

  py::class_<AttackOutcome>(m, "AttackOutcome")
      .def_property_readonly("perturbed",
                             [](const AttackOutcome& o) { return o.perturbed.text(); })
      .def_readonly("predicted_label", &AttackOutcome::predicted_label)
      .def_readonly("success", &AttackOutcome::success)
      .def_readonly("queries", &AttackOutcome::queries)
      .def_property_readonly("substitutions", [](const AttackOutcome& o) {
        py::list out;
        for (const auto& s : o.substitutions) {
          out.append(py::make_tuple(s.position, s.original, s.replacement));
        }
        return out;
      });

  m.def("attack",
        [](const std::string& id, const JointModelParams& model, const std::string& text,
           int label, std::shared_ptr<SynonymLexicon> lexicon, double max_sub_ratio,
           int query_budget, bool use_stopwords, std::uint64_t seed) {
          return attack(id, model, {tokenize(text), label},
                        make_cfg(std::move(lexicon), max_sub_ratio, query_budget, use_stopwords,
                                 seed));
        },
        py::arg("attacker_id"), py::arg("model"), py::arg("text"), py::arg("label"),
        py::arg("lexicon"), py::arg("max_sub_ratio") = 0.4, py::arg("query_budget") = 2000,
        py::arg("use_stopwords") = true, py::arg("seed") = 0,
        "Run one attacker (pwws, gradimp, delimp, charbug) against a labeled text.");

  m.def("detect", [](const JointModelParams& joint, const std::string& text) {
    DetectResult r = detect(joint, tokenize(text));
    return py::make_tuple(r.is_adversary, r.prob);
  }, py::arg("joint"), py::arg("text"),
     "Detector verdict and adversary probability for a text.");

  py::class_<DefenseTrace>(m, "DefenseTrace")
      .def_property_readonly("input", [](const DefenseTrace& t) { return t.input.text(); })
      .def_readonly("detector_prob", &DefenseTrace::detector_prob)
      .def_readonly("adversary_verdict", &DefenseTrace::adversary_verdict)
      .def_readonly("final_label", &DefenseTrace::final_label)
      .def_property_readonly("status",
                             [](const DefenseTrace& t) { return std::string(to_string(t.status)); })
      .def_property_readonly("output_text",
                             [](const DefenseTrace& t) { return t.output_text().text(); })
      .def_property_readonly("repair_attempts",
                             [](const DefenseTrace& t) { return t.repair_attempts.size(); });

  m.def("defend",
        [](const JointModelParams& joint, const std::string& text,
           std::shared_ptr<SynonymLexicon> lexicon, const std::string& attacker_id, int rounds,
           double max_sub_ratio, int query_budget, bool use_stopwords, std::uint64_t seed) {
          return defend(joint, tokenize(text),
                        make_cfg(std::move(lexicon), max_sub_ratio, query_budget, use_stopwords,
                                 seed),
                        attacker_id, rounds);
        },
        py::arg("joint"), py::arg("text"), py::arg("lexicon"), py::arg("attacker_id") = "pwws",
        py::arg("rounds") = 3, py::arg("max_sub_ratio") = 0.4, py::arg("query_budget") = 2000,
        py::arg("use_stopwords") = true, py::arg("seed") = 0,
        "Reactive defense: pass naturals through, repair detected adversaries.");

  py::class_<AdversaryRecord>(m, "AdversaryRecord")
      .def_property_readonly("source_text",
                             [](const AdversaryRecord& r) { return r.source.sentence.text(); })
      .def_property_readonly("source_label",
                             [](const AdversaryRecord& r) { return r.source.label; })
      .def_readonly("attacker_id", &AdversaryRecord::attacker_id)
      .def_readonly("outcome", &AdversaryRecord::outcome);

  m.def("sample_adversaries",
        [](const JointModelParams& victim, const Dataset& data,
           const std::vector<std::string>& attacker_ids, std::shared_ptr<SynonymLexicon> lexicon,
           double max_sub_ratio, int query_budget, bool use_stopwords, std::uint64_t seed,
           int jobs) {
          return sample_adversaries(
              victim, data, attacker_ids,
              make_cfg(std::move(lexicon), max_sub_ratio, query_budget, use_stopwords, seed),
              jobs);
        },
        py::arg("victim"), py::arg("data"),
        py::arg("attacker_ids") = std::vector<std::string>{"pwws", "gradimp", "delimp"},
        py::arg("lexicon") = nullptr, py::arg("max_sub_ratio") = 0.4,
        py::arg("query_budget") = 2000, py::arg("use_stopwords") = true, py::arg("seed") = 0,
        py::arg("jobs") = 1);

  m.def("construct_detection_dataset", &construct_detection_dataset, py::arg("natural"),
        py::arg("records"));

  py::class_<EvalPartition>(m, "EvalPartition")
      .def_property_readonly("size",
                             [](const EvalPartition& p) { return p.entries.size(); })
      .def_property_readonly("adversaries",
                             [](const EvalPartition& p) { return p.adv_count(); });

  m.def("build_partition",
        [](const JointModelParams& model, const Dataset& data,
           const std::vector<std::string>& attacker_ids, std::shared_ptr<SynonymLexicon> lexicon,
           double max_sub_ratio, int query_budget, bool use_stopwords, std::uint64_t seed,
           int jobs) {
          return build_partition(
              model, data, attacker_ids,
              make_cfg(std::move(lexicon), max_sub_ratio, query_budget, use_stopwords, seed),
              jobs);
        },
        py::arg("model"), py::arg("data"),
        py::arg("attacker_ids") = std::vector<std::string>{"pwws"}, py::arg("lexicon") = nullptr,
        py::arg("max_sub_ratio") = 0.4, py::arg("query_budget") = 2000,
        py::arg("use_stopwords") = true, py::arg("seed") = 0, py::arg("jobs") = 1);

  m.def("evaluate_defense",
        [](const JointModelParams& joint, const EvalPartition& part,
           std::shared_ptr<SynonymLexicon> lexicon, const std::string& attacker_id, int rounds,
           double max_sub_ratio, int query_budget, bool use_stopwords, std::uint64_t seed) {
          AttackerConfig cfg =
              make_cfg(std::move(lexicon), max_sub_ratio, query_budget, use_stopwords, seed);
          std::vector<DefenseTrace> traces;
          traces.reserve(part.entries.size());
          for (const EvalEntry& e : part.entries) {
            traces.push_back(defend(joint, e.text, cfg, attacker_id, rounds));
          }
          return metrics_dict(compute_metrics(part, traces));
        },
        py::arg("joint"), py::arg("partition"), py::arg("lexicon"),
        py::arg("attacker_id") = "pwws", py::arg("rounds") = 3, py::arg("max_sub_ratio") = 0.4,
        py::arg("query_budget") = 2000, py::arg("use_stopwords") = true, py::arg("seed") = 0,
        "Defend every attacked-dataset member and return the five metric ratios.");
}
