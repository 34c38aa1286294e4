#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rpd/errors.hpp"
#include "rpd/pipeline.hpp"

namespace {

void print_metrics(const rpd::MetricsReport& rep) {
  std::printf("clean accuracy      %.4f\n", rep.clean_acc);
  std::printf("attacked accuracy   %.4f\n", rep.attacked_acc);
  std::printf("detection accuracy  %.4f\n", rep.detection_acc);
  std::printf("defense accuracy    %.4f\n", rep.defense_acc);
  std::printf("repaired accuracy   %.4f\n", rep.repaired_acc);
  std::printf("victim clean        %.4f\n", rep.victim_clean_acc);
  if (rep.nat_detect_total > 0) {
    std::printf("detector FPR on naturals  %.4f (%ld/%ld)\n",
                static_cast<double>(rep.nat_detect_fp) /
                    static_cast<double>(rep.nat_detect_total),
                rep.nat_detect_fp, rep.nat_detect_total);
  }
  if (rep.repair_detected > 0) {
    std::printf("repair success on detected adversaries  %.4f (%ld/%ld)\n",
                static_cast<double>(rep.repair_success) /
                    static_cast<double>(rep.repair_detected),
                rep.repair_success, rep.repair_detected);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "rpd: a desk-scale workbench for word-substitution attacks on linear text\n"
      "classifiers and reactive repair of detected adversaries"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.footer("Config file keys (key = value under [section]; flags override):\n" +
             rpd::describe_config_keys());

  std::string config_path;
  std::optional<long long> seed_flag;
  std::optional<int> jobs_flag;
  std::optional<std::string> out_flag;
  app.add_option("--config", config_path, "run configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed_flag, "global seed (overrides run.seed)");
  app.add_option("--jobs", jobs_flag, "worker threads (overrides run.jobs)");
  app.add_option("--out", out_flag, "output directory (overrides run.out)");

  auto* gen = app.add_subcommand("gen-corpus", "generate the bundled synthetic corpus");
  auto* train_victim = app.add_subcommand("train-victim", "train the undefended victim classifier");
  auto* sample = app.add_subcommand("sample", "sample adversaries and build the detection dataset");
  auto* train_joint =
      app.add_subcommand("train-joint", "train the joint classifier/detector model");
  auto* attack_cmd = app.add_subcommand("attack", "attack a checkpoint over the test split");
  auto* defend_cmd = app.add_subcommand("defend", "defend a previously attacked dataset");
  auto* evaluate = app.add_subcommand("evaluate", "full attack + defense evaluation report");
  auto* analyze = app.add_subcommand("analyze", "output-similarity analysis and vector export");

  std::optional<std::string> sample_attackers, eval_attackers;
  sample->add_option("--attackers", sample_attackers,
                     "comma list of sampling attackers (overrides attack.attackers)");
  for (CLI::App* cmd : {attack_cmd, evaluate, analyze}) {
    cmd->add_option("--attackers", eval_attackers,
                    "comma list of evaluation attackers (overrides attack.eval_attackers)");
  }
  std::string ablation_tj, ablation_ev;
  train_joint->add_option("--ablation", ablation_tj, "ablation id (vanilla-at)")
      ->check(CLI::IsMember({"vanilla-at"}));
  evaluate->add_option("--ablation", ablation_ev, "ablation id (vanilla-at)")
      ->check(CLI::IsMember({"vanilla-at"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    rpd::RunConfig cfg;
    if (!config_path.empty()) cfg = rpd::load_run_config(config_path);
    if (seed_flag) cfg.seed = static_cast<std::uint64_t>(*seed_flag);
    if (jobs_flag) cfg.jobs = *jobs_flag;
    if (out_flag) cfg.out_dir = *out_flag;
    auto split_list = [](const std::string& s) {
      std::vector<std::string> out;
      std::size_t pos = 0;
      while (pos <= s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        if (comma > pos) out.push_back(s.substr(pos, comma - pos));
        pos = comma + 1;
      }
      return out;
    };
    if (sample_attackers) cfg.attackers = split_list(*sample_attackers);
    if (eval_attackers) cfg.eval_attackers = split_list(*eval_attackers);

    if (gen->parsed()) {
      rpd::run_gen_corpus(cfg);
      std::printf("corpus written to %s (train %d, test %d, seed %llu)\n", cfg.out_dir.c_str(),
                  cfg.corpus.train_size, cfg.corpus.test_size,
                  static_cast<unsigned long long>(cfg.seed));
    } else if (train_victim->parsed()) {
      rpd::VictimSummary s = rpd::run_train_victim(cfg);
      std::printf("victim checkpoint: %s\n", s.checkpoint.string().c_str());
      std::printf("clean accuracy on validation split: %.4f\n", s.valid_clean_acc);
    } else if (sample->parsed()) {
      rpd::SampleSummary s = rpd::run_sample(cfg);
      std::printf("sampled %zu records over %zu naturals (%zu successful flips)\n", s.records,
                  s.naturals, s.successes);
      std::printf("augmented dataset: %s (%zu rows)\n", s.augmented.string().c_str(),
                  s.naturals + s.records);
    } else if (train_joint->parsed()) {
      rpd::TrainJointSummary s = rpd::run_train_joint(cfg, ablation_tj == "vanilla-at");
      std::printf("joint checkpoint: %s%s\n", s.checkpoint.string().c_str(),
                  s.vanilla ? " (vanilla adversarial objective)" : "");
    } else if (attack_cmd->parsed()) {
      rpd::AttackSummary s = rpd::run_attack(cfg);
      std::printf("clean accuracy    %.4f\n", s.clean_acc);
      std::printf("attacked accuracy %.4f (%zu adversaries)\n", s.attacked_acc, s.adversaries);
      std::printf("attacked dataset: %s\n", s.attacked.string().c_str());
    } else if (defend_cmd->parsed()) {
      rpd::DefendSummary s = rpd::run_defend(cfg);
      std::printf("defended %zu inputs: %zu flagged, %zu repaired\n", s.inputs, s.flagged,
                  s.repaired);
      std::printf("traces: %s\n", s.traces.string().c_str());
    } else if (evaluate->parsed()) {
      rpd::EvaluateSummary s = rpd::run_evaluate(cfg, ablation_ev == "vanilla-at");
      print_metrics(s.report);
      std::printf("report: %s\n", s.report_json.string().c_str());
    } else if (analyze->parsed()) {
      rpd::AnalyzeSummary s = rpd::run_analyze(cfg);
      std::printf("delta_adv %.4f, delta_rep %.4f over %zu pairs\n", s.cosine.delta_adv,
                  s.cosine.delta_rep, s.cosine.adv_pairs.size());
      std::printf("cosine report: %s\n", s.cosine_json.string().c_str());
    }
    return 0;
  } catch (const rpd::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const rpd::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
