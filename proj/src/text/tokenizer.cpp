#include "afg/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "afg/errors.hpp"

namespace afg {

namespace {

constexpr const char* kSpecialTokens[kNumSpecials] = {"<pad>", "<bos>", "<eos>", "<unk>"};

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_punct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) || (c >= 0x5b && c <= 0x60) ||
         (c >= 0x7b && c <= 0x7e);
}

}  // namespace

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  const auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_space(c) || c < 0x20 || c == 0x7f) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else if (c >= 'A' && c <= 'Z') {
      word.push_back(static_cast<char>(c - 'A' + 'a'));
    } else {
      word.push_back(ch);
    }
  }
  flush();
  return out;
}

Vocab::Vocab() {
  for (const char* s : kSpecialTokens) add(s);
}

Vocab::Vocab(const std::vector<std::string>& regular_tokens) : Vocab() {
  for (const auto& t : regular_tokens) add(t);
}

void Vocab::add(std::string token) {
  if (token.empty()) throw DataError("vocabulary token must be non-empty");
  for (char c : token) {
    const auto u = static_cast<unsigned char>(c);
    if (is_space(u) || u < 0x20) throw DataError("vocabulary token contains whitespace: '" + token + "'");
  }
  const auto id = static_cast<TokenId>(id_to_token_.size());
  if (!token_to_id_.emplace(token, id).second) throw DataError("duplicate vocabulary token '" + token + "'");
  id_to_token_.push_back(std::move(token));
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(id_to_token_.size()));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

TokenId Vocab::id(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnkId : it->second;
}

bool Vocab::contains(std::string_view token) const { return token_to_id_.count(std::string(token)) != 0; }

std::string Vocab::serialize() const {
  std::string out;
  for (const auto& t : id_to_token_) {
    out += t;
    out += '\n';
  }
  return out;
}

Vocab Vocab::parse(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  if (lines.size() < kNumSpecials) throw DataError("vocabulary file has fewer than 4 lines");
  for (std::size_t i = 0; i < kNumSpecials; ++i) {
    if (lines[i] != kSpecialTokens[i]) {
      throw DataError("vocabulary line " + std::to_string(i + 1) + " must be " + kSpecialTokens[i]);
    }
  }
  return Vocab(std::vector<std::string>(lines.begin() + kNumSpecials, lines.end()));
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file " + path);
  out << serialize();
  if (!out) throw DataError("failed writing vocabulary file " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vocabulary file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t min_freq, std::size_t max_size) {
  if (corpus.empty()) throw DataError("build_vocab: empty corpus");
  if (min_freq < 1) throw ConfigError("build_vocab: min_freq must be >= 1");
  if (max_size < kNumSpecials + 1) throw ConfigError("build_vocab: max_size must be >= 5");
  std::map<std::string, std::size_t> freq;
  for (const auto& text : corpus) {
    for (auto& tok : split_tokens(text)) ++freq[std::move(tok)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : freq) {
    if (n >= min_freq) ranked.emplace_back(tok, n);
  }
  // std::map iteration is ascending, so a stable sort on count keeps ties lexicographic.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size - kNumSpecials) ranked.resize(max_size - kNumSpecials);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& entry : ranked) tokens.push_back(std::move(entry.first));
  return Vocab(tokens);
}

std::vector<TokenId> encode(const Vocab& vocab, std::string_view text, bool add_bos_eos) {
  std::vector<TokenId> ids;
  if (add_bos_eos) ids.push_back(kBosId);
  for (const auto& tok : split_tokens(text)) ids.push_back(vocab.id(tok));
  if (add_bos_eos) ids.push_back(kEosId);
  return ids;
}

std::string decode(const Vocab& vocab, const std::vector<TokenId>& ids) {
  std::string out;
  for (TokenId id : ids) {
    const std::string& tok = vocab.token(id);
    if (id == kPadId || id == kBosId || id == kEosId) continue;
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

}  // namespace afg
