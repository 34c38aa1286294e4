#include "rpd/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>

#include "rpd/errors.hpp"

namespace rpd {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    long long out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not an integer: '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not a number: '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key " + key + ": not a boolean: '" + v + "'");
}

std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct KeySpec {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
  const char* doc;
};

const std::map<std::string, KeySpec>& key_table() {
  auto int_key = [](auto member, const char* doc) {
    return KeySpec{
        [member](RunConfig& c, const std::string& k, const std::string& v) {
          c.*member = static_cast<std::decay_t<decltype(c.*member)>>(to_int(k, v));
        },
        [member](const RunConfig& c) { return std::to_string(c.*member); }, doc};
  };
  auto dbl_key = [](auto member, const char* doc) {
    return KeySpec{[member](RunConfig& c, const std::string& k, const std::string& v) {
                     c.*member = to_double(k, v);
                   },
                   [member](const RunConfig& c) {
                     char buf[64];
                     std::snprintf(buf, sizeof(buf), "%.17g", c.*member);
                     return std::string(buf);
                   },
                   doc};
  };
  auto str_key = [](auto member, const char* doc) {
    return KeySpec{[member](RunConfig& c, const std::string&, const std::string& v) {
                     c.*member = v;
                   },
                   [member](const RunConfig& c) { return c.*member; }, doc};
  };
  auto list_key = [](auto member, const char* doc) {
    return KeySpec{[member](RunConfig& c, const std::string&, const std::string& v) {
                     c.*member = to_list(v);
                   },
                   [member](const RunConfig& c) {
                     std::string out;
                     for (const auto& s : c.*member) {
                       if (!out.empty()) out += ',';
                       out += s;
                     }
                     return out;
                   },
                   doc};
  };
  auto corpus_int = [](auto member, const char* doc) {
    return KeySpec{[member](RunConfig& c, const std::string& k, const std::string& v) {
                     c.corpus.*member = static_cast<int>(to_int(k, v));
                   },
                   [member](const RunConfig& c) { return std::to_string(c.corpus.*member); },
                   doc};
  };
  auto corpus_dbl = [](auto member, const char* doc) {
    return KeySpec{[member](RunConfig& c, const std::string& k, const std::string& v) {
                     c.corpus.*member = to_double(k, v);
                   },
                   [member](const RunConfig& c) {
                     char buf[64];
                     std::snprintf(buf, sizeof(buf), "%.17g", c.corpus.*member);
                     return std::string(buf);
                   },
                   doc};
  };

  static const std::map<std::string, KeySpec> table = {
      {"data.train", str_key(&RunConfig::train_path, "training split path (default <out>/train.jsonl)")},
      {"data.test", str_key(&RunConfig::test_path, "test split path (default <out>/test.jsonl)")},
      {"data.valid", str_key(&RunConfig::valid_path, "validation split path (default: test)")},
      {"data.lexicon", str_key(&RunConfig::lexicon_path, "synonym lexicon path (default <out>/lexicon.tsv)")},
      {"data.format", str_key(&RunConfig::data_format, "dataset format: jsonl | csv")},
      {"data.class_count",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.class_count = static_cast<int>(to_int(k, v));
        },
        [](const RunConfig& c) {
          return c.class_count ? std::to_string(*c.class_count) : std::string("auto");
        },
        "declared class count (default: max label + 1)"}},
      {"features.buckets",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          long long b = to_int(k, v);
          if (b < 2) throw ConfigError("config key " + k + ": must be >= 2");
          c.buckets = static_cast<std::uint32_t>(b);
        },
        [](const RunConfig& c) { return std::to_string(c.buckets); },
        "feature hashing space size"}},
      {"features.ngram_orders",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.ngram_orders.clear();
          for (const std::string& item : to_list(v)) {
            c.ngram_orders.push_back(static_cast<int>(to_int(k, item)));
          }
          if (c.ngram_orders.empty()) throw ConfigError("config key " + k + ": empty list");
        },
        [](const RunConfig& c) {
          std::string out;
          for (int o : c.ngram_orders) {
            if (!out.empty()) out += ',';
            out += std::to_string(o);
          }
          return out;
        },
        "n-gram orders, comma separated"}},
      {"train.learning_rate", dbl_key(&RunConfig::learning_rate, "SGD learning rate")},
      {"train.batch_size", int_key(&RunConfig::batch_size, "mini-batch size")},
      {"train.epochs", int_key(&RunConfig::epochs, "training epochs")},
      {"train.alpha", dbl_key(&RunConfig::alpha, "detection loss weight")},
      {"train.beta", dbl_key(&RunConfig::beta, "adversarial loss weight")},
      {"train.lambda", dbl_key(&RunConfig::lambda, "L2 coefficient")},
      {"train.max_tokens", int_key(&RunConfig::max_tokens, "max modeled tokens per text")},
      {"attack.attackers", list_key(&RunConfig::attackers, "sampling attackers")},
      {"attack.eval_attackers", list_key(&RunConfig::eval_attackers, "evaluation attackers")},
      {"attack.max_sub_ratio", dbl_key(&RunConfig::max_sub_ratio, "substitutable token fraction")},
      {"attack.query_budget", int_key(&RunConfig::query_budget, "model forwards per attack")},
      {"attack.use_stopwords",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.use_stopwords = to_bool(k, v);
        },
        [](const RunConfig& c) { return std::string(c.use_stopwords ? "true" : "false"); },
        "skip stopwords during substitution"}},
      {"attack.target", str_key(&RunConfig::attack_target, "checkpoint attacked by `attack`")},
      {"defense.repair_attacker", str_key(&RunConfig::repair_attacker, "repair attacker id")},
      {"defense.repair_rounds", int_key(&RunConfig::repair_rounds, "escalating repair rounds")},
      {"corpus.train_size", corpus_int(&CorpusSpec::train_size, "generated training examples")},
      {"corpus.test_size", corpus_int(&CorpusSpec::test_size, "generated test examples")},
      {"corpus.vocab_size", corpus_int(&CorpusSpec::vocab_size, "vocabulary size")},
      {"corpus.neutral_count", corpus_int(&CorpusSpec::neutral_count, "neutral pool size")},
      {"corpus.synonym_group_size",
       corpus_int(&CorpusSpec::synonym_group_size, "within-pool synonym group width")},
      {"corpus.confusable_per_class",
       corpus_int(&CorpusSpec::confusable_per_class, "confusable tier size per class pool")},
      {"corpus.cross_link_fraction",
       corpus_dbl(&CorpusSpec::cross_link_fraction, "class words with a cross-class synonym")},
      {"corpus.own_prob", corpus_dbl(&CorpusSpec::own_prob, "class-anchor share of sentence length")},
      {"corpus.confusable_own_prob",
       corpus_dbl(&CorpusSpec::confusable_own_prob, "sentences carrying one own confusable")},
      {"corpus.contamination_prob",
       corpus_dbl(&CorpusSpec::contamination_prob, "fraction of sentences with an off-class burst")},
      {"corpus.min_len", corpus_int(&CorpusSpec::min_len, "min sentence length")},
      {"corpus.max_len", corpus_int(&CorpusSpec::max_len, "max sentence length")},
      {"run.out", str_key(&RunConfig::out_dir, "output directory")},
      {"run.seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.seed = static_cast<std::uint64_t>(to_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.seed); }, "global seed"}},
      {"run.jobs", int_key(&RunConfig::jobs, "worker threads for attack/defense phases")},
  };
  return table;
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text, const RunConfig& base) {
  RunConfig cfg = base;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    std::string full = section.empty() ? key : section + "." + key;
    auto it = key_table().find(full);
    if (it == key_table().end()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + full + "'");
    }
    it->second.set(cfg, full, value);
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str(), base);
}

std::string canonical_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, spec] : key_table()) {
    out += key;
    out += " = ";
    out += spec.get(cfg);
    out += '\n';
  }
  return out;
}

std::string config_digest(const RunConfig& cfg) {
  // The digest identifies the semantic configuration. Where outputs go and
  // how many workers ran are execution details: --jobs 4 must reproduce
  // --jobs 1 byte for byte, digest included.
  std::string canon;
  for (const auto& [key, spec] : key_table()) {
    if (key == "run.out" || key == "run.jobs") continue;
    canon += key;
    canon += " = ";
    canon += spec.get(cfg);
    canon += '\n';
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canon)));
  return buf;
}

std::string describe_config_keys() {
  std::string out;
  RunConfig defaults;
  for (const auto& [key, spec] : key_table()) {
    out += "  " + key + " = " + spec.get(defaults) + "\n      " + spec.doc + "\n";
  }
  return out;
}

TrainConfig make_train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.learning_rate = cfg.learning_rate;
  t.batch_size = cfg.batch_size;
  t.epochs = cfg.epochs;
  t.alpha = cfg.alpha;
  t.beta = cfg.beta;
  t.lambda = cfg.lambda;
  t.seed = cfg.seed;
  t.max_tokens = cfg.max_tokens;
  return t;
}

FeatureConfig make_feature_config(const RunConfig& cfg) {
  FeatureConfig f;
  f.buckets = cfg.buckets;
  f.ngram_orders = cfg.ngram_orders;
  f.max_tokens = cfg.max_tokens;
  return f;
}

AttackerConfig make_attacker_config(const RunConfig& cfg,
                                    std::shared_ptr<const SynonymLexicon> lexicon) {
  AttackerConfig a;
  a.max_sub_ratio = cfg.max_sub_ratio;
  a.query_budget = cfg.query_budget;
  a.lexicon = std::move(lexicon);
  if (cfg.use_stopwords) a.stopwords = default_stopwords();
  a.seed = cfg.seed;
  return a;
}

}  // namespace rpd
