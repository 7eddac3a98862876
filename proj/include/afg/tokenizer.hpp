#pragma once

// Word-level tokenizer. Text is ASCII-lowercased and split on whitespace;
// every ASCII punctuation character becomes its own token. Bytes >= 0x80
// are kept inside words, so arbitrary UTF-8 input tokenizes without error.

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "afg/tensor.hpp"

namespace afg {

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kUnkId = 3;
inline constexpr std::size_t kNumSpecials = 4;

// Lowercased tokens of `text`, no vocabulary lookup.
std::vector<std::string> split_tokens(std::string_view text);

class Vocab {
 public:
  // Specials only.
  Vocab();
  // Tokens after the specials, in id order. Throws DataError on duplicates,
  // empty tokens or tokens containing whitespace.
  explicit Vocab(const std::vector<std::string>& regular_tokens);

  std::size_t size() const { return id_to_token_.size(); }
  const std::string& token(TokenId id) const;
  // kUnkId for unknown tokens.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  // One token per line, line number = id, first four lines the specials.
  std::string serialize() const;
  static Vocab parse(std::string_view text);
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.id_to_token_ == b.id_to_token_; }

 private:
  void add(std::string token);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

// Keeps tokens seen at least min_freq times, ordered by descending
// frequency then ascending byte order, truncated so the vocabulary
// including specials has at most max_size entries.
Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t min_freq, std::size_t max_size);

std::vector<TokenId> encode(const Vocab& vocab, std::string_view text, bool add_bos_eos);
// Space-joined tokens with pad/bos/eos dropped; unk renders as "<unk>".
std::string decode(const Vocab& vocab, const std::vector<TokenId>& ids);

}  // namespace afg
