#include "apr/tokenizer/vocab.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <sstream>

#include "apr/common/checksum.hpp"
#include "apr/common/errors.hpp"
#include "apr/common/json_lines.hpp"
#include "apr/common/text.hpp"

namespace apr::tokenizer {
namespace {

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Decodes one code point at s[i]; invalid sequences consume a single byte and yield
// 0xFFFFFFFF so that they classify as "other".
std::pair<char32_t, std::size_t> next_code_point(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {0xFFFFFFFF, 1};
  }
  if (i + len > s.size()) return {0xFFFFFFFF, 1};
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return {0xFFFFFFFF, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

// GPT-2 bytes_to_unicode table.
struct ByteTable {
  std::array<std::string, 256> symbol;
  std::map<char32_t, unsigned char> byte_of;

  ByteTable() {
    int extra = 0;
    for (int b = 0; b < 256; ++b) {
      const bool printable = (b >= '!' && b <= '~') || (b >= 0xA1 && b <= 0xAC) || (b >= 0xAE && b <= 0xFF);
      const char32_t cp = printable ? static_cast<char32_t>(b) : static_cast<char32_t>(256 + extra++);
      append_utf8(symbol[b], cp);
      byte_of[cp] = static_cast<unsigned char>(b);
    }
  }
};

const ByteTable& byte_table() {
  static const ByteTable table;
  return table;
}

enum class CharClass { Letter, Number, Space, Other };

CharClass classify(char32_t cp) {
  if (cp < 0x80) {
    if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return CharClass::Letter;
    if (cp >= '0' && cp <= '9') return CharClass::Number;
    if (text::is_ascii_space(static_cast<unsigned char>(cp))) return CharClass::Space;
    return CharClass::Other;
  }
  if (cp == 0xFFFFFFFF) return CharClass::Other;
  if (cp == 0x85 || cp == 0xA0 || cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 ||
      cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000)
    return CharClass::Space;
  if (cp == 0xB2 || cp == 0xB3 || cp == 0xB9 || (cp >= 0xBC && cp <= 0xBE)) return CharClass::Number;
  if (cp == 0xAA || cp == 0xB5 || cp == 0xBA) return CharClass::Letter;
  if (cp < 0xC0 || cp == 0xD7 || cp == 0xF7) return CharClass::Other;
  if ((cp >= 0x2010 && cp <= 0x2BFF) || (cp >= 0x3001 && cp <= 0x303F) || (cp >= 0xFE30 && cp <= 0xFE4F) ||
      (cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0x1F000 && cp <= 0x1FAFF))
    return CharClass::Other;
  return CharClass::Letter;
}

struct Cp {
  char32_t cp;
  std::size_t offset;
  std::size_t len;
  CharClass cls;
};

std::string pair_key(const std::string& a, const std::string& b) { return a + " " + b; }

// Splits a symbol string (UTF-8) into one string per code point.
std::vector<std::string> split_symbols(const std::string& word) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < word.size();) {
    const auto [cp, len] = next_code_point(word, i);
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

bool is_special_token(const std::string& t) {
  return t == "<s>" || t == "</s>" || t == "<pad>" || t == "<unk>" || t == "<mask>";
}

}  // namespace

const std::string& byte_symbol(unsigned char b) { return byte_table().symbol[b]; }

std::string bytes_to_symbols(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char b : bytes) out += byte_table().symbol[b];
  return out;
}

std::string symbols_to_bytes(std::string_view symbols) {
  std::string out;
  const auto& table = byte_table();
  for (std::size_t i = 0; i < symbols.size();) {
    const auto [cp, len] = next_code_point(symbols, i);
    auto it = table.byte_of.find(cp);
    if (it != table.byte_of.end())
      out.push_back(static_cast<char>(it->second));
    else
      out.append(symbols.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string> pretokenize(std::string_view text) {
  std::vector<Cp> cps;
  for (std::size_t i = 0; i < text.size();) {
    const auto [cp, len] = next_code_point(text, i);
    cps.push_back({cp, i, len, classify(cp)});
    i += len;
  }
  const std::size_t n = cps.size();
  auto slice = [&](std::size_t from, std::size_t to) {
    const auto begin = cps[from].offset;
    const auto end = to < n ? cps[to].offset : text.size();
    return std::string(text.substr(begin, end - begin));
  };
  auto run_end = [&](std::size_t from, CharClass cls) {
    std::size_t j = from;
    while (j < n && cps[j].cls == cls) ++j;
    return j;
  };

  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < n) {
    // 's 't 're 've 'm 'll 'd
    if (cps[i].cp == '\'' && i + 1 < n) {
      static const std::array<std::u32string, 7> kContractions = {U"s", U"t", U"re", U"ve", U"m", U"ll", U"d"};
      bool matched = false;
      for (const auto& c : kContractions) {
        if (i + 1 + c.size() > n) continue;
        bool ok = true;
        for (std::size_t k = 0; k < c.size(); ++k) ok = ok && cps[i + 1 + k].cp == c[k];
        if (ok) {
          words.push_back(slice(i, i + 1 + c.size()));
          i += 1 + c.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    const bool lead_space = cps[i].cp == ' ' && i + 1 < n && cps[i + 1].cls != CharClass::Space;
    const std::size_t body = lead_space ? i + 1 : i;
    const CharClass cls = cps[body].cls;
    if (cls != CharClass::Space) {
      const std::size_t j = run_end(body, cls);
      words.push_back(slice(i, j));
      i = j;
      continue;
    }
    // Whitespace: a run not followed by text is taken whole; otherwise its last
    // character is left to lead the next word.
    const std::size_t j = run_end(i, CharClass::Space);
    if (j == n || j - i == 1) {
      words.push_back(slice(i, j));
      i = j;
    } else {
      words.push_back(slice(i, j - 1));
      i = j - 1;
    }
  }
  return words;
}

Vocab Vocab::from_parts(std::vector<std::string> tokens_by_id, std::vector<MergeRule> merges) {
  Vocab v;
  v.tokens_ = std::move(tokens_by_id);
  v.merges_ = std::move(merges);
  v.special_.assign(v.tokens_.size(), false);
  for (std::size_t id = 0; id < v.tokens_.size(); ++id) {
    const auto& t = v.tokens_[id];
    if (!v.ids_.emplace(t, static_cast<int>(id)).second) throw DataError("vocabulary token listed twice: " + t);
    if (is_special_token(t)) v.special_[id] = true;
  }
  for (int b = 0; b < 256; ++b) {
    if (!v.ids_.count(byte_symbol(static_cast<unsigned char>(b))))
      throw DataError("vocabulary lacks byte symbol for byte " + std::to_string(b));
  }
  v.specials_.cls = v.id_of("<s>");
  v.specials_.sep = v.specials_.eos = v.id_of("</s>");
  v.specials_.pad = v.id_of("<pad>");
  v.specials_.unk = v.id_of("<unk>");
  v.specials_.mask = v.id_of("<mask>");
  if (v.specials_.cls < 0 || v.specials_.eos < 0) throw DataError("vocabulary lacks <s> or </s>");
  for (std::size_t r = 0; r < v.merges_.size(); ++r) {
    const auto& [a, b] = v.merges_[r];
    if (a.empty() || b.empty()) throw DataError("malformed merge rule at rank " + std::to_string(r));
    v.merge_rank_.emplace(pair_key(a, b), static_cast<int>(r));
  }
  v.hash_ = sha256_hex(v.vocab_json_text() + "\n--merges--\n" + v.merges_text());
  return v;
}

Vocab Vocab::byte_level() {
  std::vector<std::string> tokens = {"<s>", "<pad>", "</s>", "<unk>"};
  for (int b = 0; b < 256; ++b) tokens.push_back(byte_symbol(static_cast<unsigned char>(b)));
  return from_parts(std::move(tokens), {});
}

bool Vocab::is_special(int id) const { return id >= 0 && static_cast<std::size_t>(id) < special_.size() && special_[id]; }

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw DataError("token id out of range: " + std::to_string(id));
  return tokens_[id];
}

int Vocab::id_of(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? -1 : it->second;
}

std::vector<std::string> Vocab::bpe(const std::string& symbols_word) const {
  auto parts = split_symbols(symbols_word);
  while (parts.size() > 1) {
    int best_rank = -1;
    for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
      auto it = merge_rank_.find(pair_key(parts[k], parts[k + 1]));
      if (it != merge_rank_.end() && (best_rank < 0 || it->second < best_rank)) best_rank = it->second;
    }
    if (best_rank < 0) break;
    const auto& [a, b] = merges_[best_rank];
    std::vector<std::string> merged;
    merged.reserve(parts.size());
    for (std::size_t k = 0; k < parts.size();) {
      if (k + 1 < parts.size() && parts[k] == a && parts[k + 1] == b) {
        merged.push_back(a + b);
        k += 2;
      } else {
        merged.push_back(std::move(parts[k]));
        ++k;
      }
    }
    parts = std::move(merged);
  }
  return parts;
}

std::vector<int> Vocab::encode_raw(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& word : pretokenize(text)) {
    for (const auto& piece : bpe(bytes_to_symbols(word))) {
      const int id = id_of(piece);
      if (id >= 0) {
        ids.push_back(id);
        continue;
      }
      // Merged piece missing from the table: fall back to its byte symbols.
      for (const auto& sym : split_symbols(piece)) ids.push_back(id_of(sym));
    }
  }
  return ids;
}

std::size_t Vocab::count_code_tokens(std::string_view text) const {
  return encode_raw(text::normalize_whitespace(text)).size();
}

std::string Vocab::decode(std::span<const int> ids) const {
  std::string symbols;
  for (int id : ids) {
    const auto& t = token(id);
    if (!special_[id]) symbols += t;
  }
  return symbols_to_bytes(symbols);
}

std::string Vocab::vocab_json_text() const {
  Json j = Json::object();
  for (std::size_t id = 0; id < tokens_.size(); ++id) j[tokens_[id]] = id;
  return j.dump(-1, ' ', false, Json::error_handler_t::strict);
}

std::string Vocab::merges_text() const {
  std::string out = "#version: 0.2\n";
  for (const auto& [a, b] : merges_) out += a + " " + b + "\n";
  return out;
}

void Vocab::save(const std::filesystem::path& dir) const {
  write_file(dir / "vocab.json", vocab_json_text() + "\n");
  write_file(dir / "merges.txt", merges_text());
}

Vocab Vocab::load(const std::filesystem::path& vocab_json, const std::filesystem::path& merges_txt) {
  Json j;
  try {
    j = Json::parse(read_file(vocab_json));
  } catch (const Json::parse_error& e) {
    throw DataError(vocab_json.string() + ": malformed vocabulary: " + e.what());
  }
  if (!j.is_object() || j.empty()) throw DataError(vocab_json.string() + ": vocabulary must be a non-empty object");
  std::vector<std::string> tokens(j.size());
  std::vector<bool> filled(j.size(), false);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number_integer()) throw DataError(vocab_json.string() + ": non-integer id for " + it.key());
    const auto id = it.value().get<long long>();
    if (id < 0 || static_cast<std::size_t>(id) >= tokens.size() || filled[id])
      throw DataError(vocab_json.string() + ": ids are not a permutation of 0..N-1 (bad id for '" + it.key() + "')");
    tokens[id] = it.key();
    filled[id] = true;
  }

  std::vector<MergeRule> merges;
  std::istringstream in(read_file(merges_txt));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line.rfind("#version", 0) == 0)) continue;
    const auto space = line.find(' ');
    if (space == std::string::npos || space == 0 || space + 1 >= line.size() ||
        line.find(' ', space + 1) != std::string::npos)
      throw DataError(merges_txt.string() + ":" + std::to_string(line_no) + ": malformed merge rule");
    merges.emplace_back(line.substr(0, space), line.substr(space + 1));
  }
  try {
    return from_parts(std::move(tokens), std::move(merges));
  } catch (const DataError& e) {
    throw DataError(vocab_json.string() + ": " + e.what());
  }
}

Vocab Vocab::load(const std::filesystem::path& dir) { return load(dir / "vocab.json", dir / "merges.txt"); }

Vocab load_vocab(const std::filesystem::path& source) {
  if (std::filesystem::is_directory(source)) return Vocab::load(source);
  throw DataError("vocabulary directory not found: " + source.string());
}

TokenSequence encode_code(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 3) throw ConfigError("encode_code: max_len must be at least 3");
  auto code = vocab.encode_raw(text::normalize_whitespace(text));
  TokenSequence seq;
  const std::size_t capacity = max_len - 2;
  if (code.size() > capacity) {
    code.resize(capacity);
    seq.truncated = true;
  }
  const auto& sp = vocab.specials();
  seq.ids.reserve(code.size() + 2);
  seq.ids.push_back(sp.cls);
  seq.ids.insert(seq.ids.end(), code.begin(), code.end());
  seq.ids.push_back(sp.eos);
  seq.cls_pos = 0;
  seq.sep_pos = seq.eos_pos = static_cast<int>(seq.ids.size()) - 1;
  seq.texts.reserve(seq.ids.size());
  for (int id : seq.ids) seq.texts.push_back(vocab.token(id));
  return seq;
}

std::string decode(std::span<const int> ids, const Vocab& vocab) { return vocab.decode(ids); }

Vocab train_toy_vocab(const std::vector<std::string>& corpus, std::size_t merges) {
  if (corpus.empty() && merges > 0) throw DataError("cannot learn merges from an empty corpus");
  std::map<std::string, std::size_t> word_counts;
  for (const auto& line : corpus)
    for (const auto& w : pretokenize(text::normalize_whitespace(line))) ++word_counts[bytes_to_symbols(w)];

  struct Word {
    std::vector<std::string> parts;
    std::size_t count;
  };
  std::vector<Word> words;
  words.reserve(word_counts.size());
  for (const auto& [w, c] : word_counts) words.push_back({split_symbols(w), c});

  std::vector<std::string> tokens = {"<s>", "<pad>", "</s>", "<unk>"};
  for (int b = 0; b < 256; ++b) tokens.push_back(byte_symbol(static_cast<unsigned char>(b)));
  std::unordered_map<std::string, int> known;
  for (std::size_t i = 0; i < tokens.size(); ++i) known.emplace(tokens[i], static_cast<int>(i));

  std::vector<MergeRule> rules;
  for (std::size_t m = 0; m < merges; ++m) {
    std::map<MergeRule, std::size_t> pair_counts;
    for (const auto& w : words)
      for (std::size_t k = 0; k + 1 < w.parts.size(); ++k) pair_counts[{w.parts[k], w.parts[k + 1]}] += w.count;
    if (pair_counts.empty()) break;
    // std::map iterates pairs in lexicographic order, so the first maximum wins ties.
    auto best = pair_counts.begin();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it)
      if (it->second > best->second) best = it;
    const MergeRule rule = best->first;
    rules.push_back(rule);
    const std::string joined = rule.first + rule.second;
    if (known.emplace(joined, static_cast<int>(tokens.size())).second) tokens.push_back(joined);
    for (auto& w : words) {
      std::vector<std::string> merged;
      merged.reserve(w.parts.size());
      for (std::size_t k = 0; k < w.parts.size();) {
        if (k + 1 < w.parts.size() && w.parts[k] == rule.first && w.parts[k + 1] == rule.second) {
          merged.push_back(joined);
          k += 2;
        } else {
          merged.push_back(std::move(w.parts[k]));
          ++k;
        }
      }
      w.parts = std::move(merged);
    }
  }
  return Vocab::from_parts(std::move(tokens), std::move(rules));
}

}  // namespace apr::tokenizer
