#pragma once

#include <span>
#include <vector>

#include "afg/model.hpp"

namespace afg {

struct GenerationConfig {
  std::size_t max_new_tokens = 32;

  // max_new_tokens must be in [1, cfg.max_tgt_pos - 1].
  void validate(const ModelConfig& cfg) const;
};

// Index of the largest value; ties go to the lowest index.
TokenId argmax_lowest(std::span<const Real> logits);

// Greedy decoding from bos until eos or max_new_tokens. The result holds
// neither bos nor eos.
std::vector<TokenId> greedy_decode(const ModelParams& p, std::span<const TokenId> src, const GenerationConfig& gcfg,
                                   const ModelConfig& cfg);
// Same, starting from an encoder output already computed for the source.
std::vector<TokenId> greedy_decode_encoded(const ModelParams& p, const Tensor& enc_out, const GenerationConfig& gcfg,
                                           const ModelConfig& cfg);

}  // namespace afg
