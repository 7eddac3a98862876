#pragma once

// Encoder-decoder transformer for long inputs.
//
// Encoder: token + learned source-position embeddings, then enc_layers
// pre-norm blocks of sliding-window self-attention and a GELU feed-forward.
// Decoder: token + learned target-position embeddings, then dec_layers
// pre-norm blocks of causal self-attention, dense cross-attention over the
// encoder output and a feed-forward. An untied linear head maps to logits.
// Each stack ends in a layer norm when it has at least one layer.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "afg/attention.hpp"
#include "afg/rng.hpp"
#include "afg/tensor.hpp"

namespace afg {

// Longest source the positional table may be configured for.
inline constexpr std::size_t kMaxSourcePositions = 16384;

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t enc_layers = 2;
  std::size_t dec_layers = 2;
  std::size_t d_ff = 128;
  std::size_t max_src_pos = 512;
  std::size_t max_tgt_pos = 64;
  AttentionConfig attention{};
  double dropout = 0.0;

  // Throws ConfigError naming the offending field.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&);
};

// Closed-form parameter count for a config.
std::uint64_t param_count(const ModelConfig& cfg);

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Ordered, uniquely named parameter set. Order is creation order and is
// what checkpoints and optimizer state follow.
class ModelParams {
 public:
  void add(std::string name, Tensor value);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::vector<NamedTensor>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::uint64_t scalar_count() const;

  void zero_grad();
  // Independent copy of every array (gradients dropped).
  ModelParams deep_copy() const;
  // True when names, shapes and every value match bitwise.
  bool bitwise_equal(const ModelParams& other) const;

 private:
  std::vector<NamedTensor> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Uniform(-0.08, 0.08) weights and embeddings, zero biases, unit layer-norm
// gains; deterministic in seed.
ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed);

// Dropout is applied only when a generator is supplied and cfg.dropout > 0.
struct ForwardOptions {
  Rng* dropout_rng = nullptr;
};

// [n_src x d_model]. Throws LengthError when src exceeds max_src_pos.
Tensor encode_source(const ModelParams& p, std::span<const TokenId> src, const ModelConfig& cfg,
                     ForwardOptions opts = {});

// [n_tgt x vocab] logits for every prefix position.
Tensor decode_logits(const ModelParams& p, const Tensor& enc_out, std::span<const TokenId> tgt_prefix,
                     const ModelConfig& cfg, ForwardOptions opts = {});

struct SequencePair {
  std::vector<TokenId> src;  // bos ... eos
  std::vector<TokenId> tgt;  // bos ... eos
};

// Teacher forcing: predicts tgt[1..T) from tgt[0..T-1), pad ignored; mean
// over the batch of each pair's mean token loss.
Tensor forward_loss(const ModelParams& p, std::span<const SequencePair> batch, const ModelConfig& cfg,
                    ForwardOptions opts = {});

// Decoder that consumes one target token at a time, caching self-attention
// keys/values and cross-attention projections. Its logits equal the
// matching row of decode_logits. Runs without recording gradients.
class IncrementalDecoder {
 public:
  IncrementalDecoder(const ModelParams& p, const ModelConfig& cfg, const Tensor& enc_out);

  // Feeds the token at the next position and returns logits for the
  // position after it.
  std::vector<Real> step(TokenId token);
  std::size_t position() const { return position_; }

 private:
  struct LayerCache {
    Tensor cross_k, cross_v;
    std::vector<Real> self_k, self_v;
  };

  const ModelParams& params_;
  const ModelConfig& cfg_;
  std::vector<LayerCache> layers_;
  std::size_t position_ = 0;
};

}  // namespace afg
