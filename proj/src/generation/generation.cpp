#include "afg/generation.hpp"

#include <string>

#include "afg/errors.hpp"
#include "afg/tokenizer.hpp"

namespace afg {

void GenerationConfig::validate(const ModelConfig& cfg) const {
  if (max_new_tokens < 1 || max_new_tokens + 1 > cfg.max_tgt_pos) {
    throw ConfigError("max_new_tokens must be in [1, " + std::to_string(cfg.max_tgt_pos - 1) + "], got " +
                      std::to_string(max_new_tokens));
  }
}

TokenId argmax_lowest(std::span<const Real> logits) {
  if (logits.empty()) throw ShapeError("argmax over empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

std::vector<TokenId> greedy_decode(const ModelParams& p, std::span<const TokenId> src, const GenerationConfig& gcfg,
                                   const ModelConfig& cfg) {
  NoGradGuard no_grad;
  return greedy_decode_encoded(p, encode_source(p, src, cfg), gcfg, cfg);
}

std::vector<TokenId> greedy_decode_encoded(const ModelParams& p, const Tensor& enc_out, const GenerationConfig& gcfg,
                                           const ModelConfig& cfg) {
  gcfg.validate(cfg);
  NoGradGuard no_grad;
  IncrementalDecoder decoder(p, cfg, enc_out);
  std::vector<TokenId> out;
  TokenId token = kBosId;
  for (std::size_t step = 0; step < gcfg.max_new_tokens; ++step) {
    const std::vector<Real> logits = decoder.step(token);
    token = argmax_lowest(logits);
    if (token == kEosId) break;
    out.push_back(token);
  }
  return out;
}

}  // namespace afg
