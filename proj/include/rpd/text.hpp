#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rpd {

// A tokenized text. Tokens are lowercased words with leading/trailing ASCII
// punctuation split off; they never contain whitespace or empty strings.
struct Sentence {
  std::vector<std::string> tokens;
  std::string raw;

  // Canonical surface form: tokens joined by single spaces. Re-tokenizing
  // this string yields the same token list.
  std::string text() const;

  static Sentence from_tokens(std::vector<std::string> toks);

  bool operator==(const Sentence& other) const { return tokens == other.tokens; }
};

struct LabeledExample {
  Sentence sentence;
  int label = 0;
};

// Splits on Unicode whitespace, peels leading/trailing ASCII punctuation into
// separate tokens, lowercases ASCII letters. Pure and deterministic.
Sentence tokenize(std::string_view text);

// Returns a copy of `s` with exactly one token replaced. The input is never
// modified. Throws std::out_of_range if index >= token count,
// std::invalid_argument if the replacement is empty or contains whitespace.
Sentence substitute(const Sentence& s, std::size_t index, std::string_view replacement);

// Copy of `s` without the token at `index` (probe helper for attackers).
Sentence erase_token(const Sentence& s, std::size_t index);

// Word -> ordered candidate substitutions. Candidate lists never contain the
// headword itself; lookups of absent words return an empty list.
class SynonymLexicon {
 public:
  const std::vector<std::string>& synonyms(const std::string& word) const;
  // Lowercases, drops self-synonyms and duplicates, merges repeated headwords
  // preserving first-seen order.
  void add(const std::string& headword, const std::vector<std::string>& candidates);
  std::size_t size() const { return table_.size(); }

  // File format: `headword<TAB>syn1,syn2,...` per line, UTF-8, LF endings.
  static SynonymLexicon load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::unordered_map<std::string, std::vector<std::string>> table_;
  std::vector<std::string> order_;  // headwords in first-seen order (for save)
};

struct Dataset {
  std::vector<LabeledExample> examples;
  int class_count = 0;
  std::string name;
};

enum class DataFormat { jsonl, csv };

// jsonl: one object per line with fields `text` (string) and `label` (int >= 0).
// csv: header `text,label`. class_count defaults to max label + 1.
Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                     std::optional<int> class_count_override = std::nullopt);

void save_dataset_jsonl(const Dataset& data, const std::filesystem::path& path);

}  // namespace rpd
