#include "rpd/text.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "rpd/errors.hpp"

namespace rpd {

namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
         (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
}

bool is_unicode_space(uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Decodes one code point starting at `i`; stores its byte length in `len`.
// Malformed sequences are treated as a single latin-1 byte.
uint32_t decode_utf8(std::string_view s, std::size_t i, std::size_t& len) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  if (c < 0x80) {
    len = 1;
    return c;
  }
  int extra = 0;
  uint32_t cp = 0;
  if ((c & 0xE0) == 0xC0) {
    extra = 1;
    cp = c & 0x1F;
  } else if ((c & 0xF0) == 0xE0) {
    extra = 2;
    cp = c & 0x0F;
  } else if ((c & 0xF8) == 0xF0) {
    extra = 3;
    cp = c & 0x07;
  } else {
    len = 1;
    return c;
  }
  if (i + extra >= s.size()) {
    len = 1;
    return c;
  }
  for (int k = 1; k <= extra; ++k) {
    unsigned char cc = static_cast<unsigned char>(s[i + k]);
    if ((cc & 0xC0) != 0x80) {
      len = 1;
      return c;
    }
    cp = (cp << 6) | (cc & 0x3F);
  }
  len = static_cast<std::size_t>(extra) + 1;
  return cp;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

// Peels leading/trailing ASCII punctuation of a whitespace-free chunk into
// separate tokens. Internal punctuation (don't, a.b) is retained.
void emit_chunk(std::string_view chunk, std::vector<std::string>& out) {
  std::size_t begin = 0;
  std::size_t end = chunk.size();
  while (begin < end && is_ascii_punct(static_cast<unsigned char>(chunk[begin]))) ++begin;
  while (end > begin && is_ascii_punct(static_cast<unsigned char>(chunk[end - 1]))) --end;
  if (begin == end) {
    // all punctuation: one token per character
    for (char c : chunk) out.emplace_back(1, c);
    return;
  }
  for (std::size_t i = 0; i < begin; ++i) out.emplace_back(1, chunk[i]);
  out.push_back(ascii_lower(chunk.substr(begin, end - begin)));
  for (std::size_t i = end; i < chunk.size(); ++i) out.emplace_back(1, chunk[i]);
}

bool contains_whitespace(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t len = 0;
    if (is_unicode_space(decode_utf8(s, i, len))) return true;
    i += len;
  }
  return false;
}

}  // namespace

std::string Sentence::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

Sentence Sentence::from_tokens(std::vector<std::string> toks) {
  Sentence s;
  s.tokens = std::move(toks);
  s.raw = s.text();
  return s;
}

Sentence tokenize(std::string_view text) {
  Sentence s;
  s.raw.assign(text);
  std::size_t i = 0;
  std::size_t chunk_start = 0;
  bool in_chunk = false;
  while (i < text.size()) {
    std::size_t len = 0;
    uint32_t cp = decode_utf8(text, i, len);
    if (is_unicode_space(cp)) {
      if (in_chunk) {
        emit_chunk(text.substr(chunk_start, i - chunk_start), s.tokens);
        in_chunk = false;
      }
    } else if (!in_chunk) {
      chunk_start = i;
      in_chunk = true;
    }
    i += len;
  }
  if (in_chunk) emit_chunk(text.substr(chunk_start), s.tokens);
  return s;
}

Sentence substitute(const Sentence& s, std::size_t index, std::string_view replacement) {
  if (index >= s.tokens.size()) {
    throw std::out_of_range("substitute: token index " + std::to_string(index) +
                            " out of range for sentence of " +
                            std::to_string(s.tokens.size()) + " tokens");
  }
  if (replacement.empty()) throw std::invalid_argument("substitute: empty replacement");
  if (contains_whitespace(replacement)) {
    throw std::invalid_argument("substitute: replacement contains whitespace");
  }
  Sentence out;
  out.tokens = s.tokens;
  out.tokens[index].assign(replacement);
  out.raw = out.text();
  return out;
}

Sentence erase_token(const Sentence& s, std::size_t index) {
  if (index >= s.tokens.size()) {
    throw std::out_of_range("erase_token: index out of range");
  }
  Sentence out;
  out.tokens = s.tokens;
  out.tokens.erase(out.tokens.begin() + static_cast<std::ptrdiff_t>(index));
  out.raw = out.text();
  return out;
}

const std::vector<std::string>& SynonymLexicon::synonyms(const std::string& word) const {
  static const std::vector<std::string> kEmpty;
  auto it = table_.find(word);
  return it == table_.end() ? kEmpty : it->second;
}

void SynonymLexicon::add(const std::string& headword, const std::vector<std::string>& candidates) {
  std::string head = ascii_lower(headword);
  auto [it, inserted] = table_.try_emplace(head);
  if (inserted) order_.push_back(head);
  std::vector<std::string>& list = it->second;
  for (const std::string& raw_cand : candidates) {
    std::string cand = ascii_lower(raw_cand);
    if (cand.empty() || cand == head) continue;
    if (std::find(list.begin(), list.end(), cand) == list.end()) list.push_back(cand);
  }
}

SynonymLexicon SynonymLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file: " + path.string());
  SynonymLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("lexicon " + path.string() + ": line " + std::to_string(line_no) +
                      " has no TAB separator");
    }
    std::string head = line.substr(0, tab);
    std::vector<std::string> cands;
    std::string rest = line.substr(tab + 1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      std::size_t comma = rest.find(',', pos);
      if (comma == std::string::npos) comma = rest.size();
      std::string cand = rest.substr(pos, comma - pos);
      if (!cand.empty()) cands.push_back(cand);
      pos = comma + 1;
    }
    lex.add(head, cands);
  }
  return lex;
}

void SynonymLexicon::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write lexicon file: " + path.string());
  for (const std::string& head : order_) {
    out << head << '\t';
    const auto& list = table_.at(head);
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (i > 0) out << ',';
      out << list[i];
    }
    out << '\n';
  }
}

namespace {

// Minimal RFC-4180 row reader supporting quoted fields with "" escapes.
bool read_csv_row(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int c;
  while ((c = in.get()) != EOF) {
    any = true;
    char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line_no;
        field += ch;
      }
    } else if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      ++line_no;
      if (!field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(std::move(field));
      return true;
    } else {
      field += ch;
    }
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

int parse_label(const nlohmann::json& j, const std::filesystem::path& path, std::size_t line_no) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) {
    throw DataError(path.string() + ": line " + std::to_string(line_no) +
                    ": label is not an integer");
  }
  auto v = j.get<long long>();
  if (v < 0) {
    throw DataError(path.string() + ": line " + std::to_string(line_no) + ": negative label");
  }
  return static_cast<int>(v);
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                     std::optional<int> class_count_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file: " + path.string());

  Dataset data;
  data.name = path.stem().string();
  int max_label = -1;

  if (format == DataFormat::jsonl) {
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
        throw DataError(path.string() + ": line " + std::to_string(line_no) +
                        ": malformed JSON (" + std::string(e.what()) + ")");
      }
      if (!obj.is_object() || !obj.contains("text") || !obj.contains("label")) {
        throw DataError(path.string() + ": line " + std::to_string(line_no) +
                        ": record needs `text` and `label` fields");
      }
      if (!obj["text"].is_string()) {
        throw DataError(path.string() + ": line " + std::to_string(line_no) +
                        ": `text` is not a string");
      }
      int label = parse_label(obj["label"], path, line_no);
      max_label = std::max(max_label, label);
      data.examples.push_back({tokenize(obj["text"].get<std::string>()), label});
      if (class_count_override && label >= *class_count_override) {
        throw DataError(path.string() + ": line " + std::to_string(line_no) + ": label " +
                        std::to_string(label) + " outside declared class count " +
                        std::to_string(*class_count_override));
      }
    }
  } else {
    std::vector<std::string> fields;
    std::size_t line_no = 0;
    if (!read_csv_row(in, fields, line_no) || fields.size() != 2 || fields[0] != "text" ||
        fields[1] != "label") {
      throw DataError(path.string() + ": expected csv header `text,label`");
    }
    while (true) {
      std::size_t row_line = line_no + 1;
      if (!read_csv_row(in, fields, line_no)) break;
      if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
      if (fields.size() != 2) {
        throw DataError(path.string() + ": line " + std::to_string(row_line) +
                        ": expected 2 fields, got " + std::to_string(fields.size()));
      }
      int label = 0;
      try {
        std::size_t used = 0;
        label = std::stoi(fields[1], &used);
        if (used != fields[1].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw DataError(path.string() + ": line " + std::to_string(row_line) +
                        ": label is not an integer");
      }
      if (label < 0) {
        throw DataError(path.string() + ": line " + std::to_string(row_line) +
                        ": negative label");
      }
      if (class_count_override && label >= *class_count_override) {
        throw DataError(path.string() + ": line " + std::to_string(row_line) + ": label " +
                        std::to_string(label) + " outside declared class count " +
                        std::to_string(*class_count_override));
      }
      max_label = std::max(max_label, label);
      data.examples.push_back({tokenize(fields[0]), label});
    }
  }

  data.class_count = class_count_override.value_or(max_label + 1);
  return data;
}

void save_dataset_jsonl(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset file: " + path.string());
  for (const LabeledExample& ex : data.examples) {
    nlohmann::json obj;
    obj["text"] = ex.sentence.text();
    obj["label"] = ex.label;
    out << obj.dump() << '\n';
  }
}

}  // namespace rpd
