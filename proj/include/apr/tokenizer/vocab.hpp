#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace apr::tokenizer {

// Ids of the framing tokens. In RoBERTa-family vocabularies SEP and EOS are both "</s>".
struct SpecialIds {
  int cls = -1;
  int sep = -1;
  int eos = -1;
  int pad = -1;
  int unk = -1;
  int mask = -1;
};

inline constexpr std::size_t kMaxFramedLength = 512;

// A framed code sequence: <s> c1 .. cm </s>.
struct TokenSequence {
  std::vector<int> ids;
  std::vector<std::string> texts;  // parallel to ids
  int cls_pos = -1;
  int sep_pos = -1;
  int eos_pos = -1;
  bool truncated = false;

  std::size_t code_length() const { return ids.size() < 2 ? 0 : ids.size() - 2; }
};

using MergeRule = std::pair<std::string, std::string>;

// Byte-level BPE vocabulary (GPT-2 / RoBERTa layout: vocab.json + merges.txt).
// Immutable once constructed; all member functions are safe to call concurrently.
class Vocab {
 public:
  // tokens_by_id[i] is the token string of id i. Throws DataError when the table is
  // not bijective, misses a byte symbol, or lacks "<s>" / "</s>".
  static Vocab from_parts(std::vector<std::string> tokens_by_id, std::vector<MergeRule> merges);

  // Specials <s> <pad> </s> <unk> followed by the 256 byte symbols.
  static Vocab byte_level();

  static Vocab load(const std::filesystem::path& vocab_json, const std::filesystem::path& merges_txt);
  // Directory holding vocab.json and merges.txt.
  static Vocab load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  std::size_t size() const { return tokens_.size(); }
  const SpecialIds& specials() const { return specials_; }
  const std::vector<MergeRule>& merges() const { return merges_; }
  bool is_special(int id) const;
  const std::string& token(int id) const;
  // -1 when absent.
  int id_of(std::string_view token) const;

  // Unframed subword ids for text as given (no whitespace normalization).
  std::vector<int> encode_raw(std::string_view text) const;
  // Token count of whitespace-normalized text, without framing.
  std::size_t count_code_tokens(std::string_view text) const;
  // Specials are skipped. Throws DataError for ids outside [0, size()).
  std::string decode(std::span<const int> ids) const;

  // sha256 over the canonical vocab.json + merges.txt serialization.
  const std::string& hash() const { return hash_; }

  std::string vocab_json_text() const;
  std::string merges_text() const;

 private:
  Vocab() = default;
  std::vector<std::string> bpe(const std::string& symbols_word) const;

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  std::vector<MergeRule> merges_;
  std::unordered_map<std::string, int> merge_rank_;
  std::vector<bool> special_;
  SpecialIds specials_;
  std::string hash_;
};

// GPT-2 style pre-tokenization into words (contractions, letter runs, digit runs,
// punctuation runs, whitespace), each optionally led by one space.
std::vector<std::string> pretokenize(std::string_view text);

// The printable code point sequence (UTF-8) standing for raw bytes.
std::string bytes_to_symbols(std::string_view bytes);
std::string symbols_to_bytes(std::string_view symbols);
const std::string& byte_symbol(unsigned char b);

Vocab load_vocab(const std::filesystem::path& source);

// Normalizes whitespace, encodes, keeps at most max_len - 2 code tokens (tail dropped).
// Requires max_len >= 3.
TokenSequence encode_code(std::string_view text, const Vocab& vocab,
                          std::size_t max_len = kMaxFramedLength);
std::string decode(std::span<const int> ids, const Vocab& vocab);

// Learns `merges` byte-pair merges over the pre-tokenized, whitespace-normalized corpus.
// Ties on pair frequency go to the lexicographically smallest pair. Stops early when no
// pair remains. Empty corpus with merges > 0 throws DataError.
Vocab train_toy_vocab(const std::vector<std::string>& corpus, std::size_t merges);

}  // namespace apr::tokenizer
