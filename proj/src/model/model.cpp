#include "afg/model.hpp"

#include <algorithm>
#include <cstring>

#include "afg/errors.hpp"
#include "afg/ops.hpp"
#include "afg/tokenizer.hpp"

namespace afg {

namespace {

constexpr Real kInitRange = 0.08;
constexpr Real kLayerNormEps = 1e-5;

void require_positive(std::size_t v, const char* field) {
  if (v == 0) throw ConfigError(std::string("model config: ") + field + " must be >= 1");
}

std::string layer_prefix(const char* stack, std::size_t layer) {
  return std::string(stack) + "." + std::to_string(layer) + ".";
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size <= kNumSpecials) {
    throw ConfigError("model config: vocab_size must exceed the 4 special tokens, got " +
                      std::to_string(vocab_size));
  }
  require_positive(d_model, "d_model");
  require_positive(heads, "heads");
  require_positive(d_ff, "d_ff");
  require_positive(max_src_pos, "max_src_pos");
  if (max_tgt_pos < 2) throw ConfigError("model config: max_tgt_pos must be >= 2");
  if (d_model % heads != 0) {
    throw ConfigError("model config: d_model " + std::to_string(d_model) + " not divisible by heads " +
                      std::to_string(heads));
  }
  if (max_src_pos > kMaxSourcePositions) {
    throw ConfigError("model config: max_src_pos " + std::to_string(max_src_pos) + " exceeds " +
                      std::to_string(kMaxSourcePositions));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model config: dropout must be in [0, 1)");
  attention.validate();
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
  return a.vocab_size == b.vocab_size && a.d_model == b.d_model && a.heads == b.heads &&
         a.enc_layers == b.enc_layers && a.dec_layers == b.dec_layers && a.d_ff == b.d_ff &&
         a.max_src_pos == b.max_src_pos && a.max_tgt_pos == b.max_tgt_pos &&
         a.attention.window == b.attention.window && a.attention.global_indices == b.attention.global_indices &&
         a.dropout == b.dropout;
}

std::uint64_t param_count(const ModelConfig& cfg) {
  const std::uint64_t v = cfg.vocab_size, d = cfg.d_model, ff = cfg.d_ff;
  const std::uint64_t attn = 4 * d * d + 4 * d;
  const std::uint64_t ffn = 2 * d * ff + ff + d;
  const std::uint64_t ln = 2 * d;
  std::uint64_t total = v * d + cfg.max_src_pos * d + cfg.max_tgt_pos * d;
  total += cfg.enc_layers * (attn + ffn + 2 * ln) + (cfg.enc_layers > 0 ? ln : 0);
  total += cfg.dec_layers * (2 * attn + ffn + 3 * ln) + (cfg.dec_layers > 0 ? ln : 0);
  total += d * v;
  return total;
}

void ModelParams::add(std::string name, Tensor value) {
  if (!index_.emplace(name, entries_.size()).second) throw ConfigError("duplicate parameter name " + name);
  entries_.push_back({std::move(name), std::move(value)});
}

const Tensor& ModelParams::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return entries_[it->second].value;
}

std::uint64_t ModelParams::scalar_count() const {
  std::uint64_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

ModelParams ModelParams::deep_copy() const {
  ModelParams out;
  for (const auto& e : entries_) out.add(e.name, e.value.clone());
  return out;
}

bool ModelParams::bitwise_equal(const ModelParams& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.value.shape() != b.value.shape()) return false;
    if (std::memcmp(a.value.data().data(), b.value.data().data(), a.value.numel() * sizeof(Real)) != 0) {
      return false;
    }
  }
  return true;
}

ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams p;
  const std::size_t d = cfg.d_model;
  const auto weight = [&](std::string name, Shape shape) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (Real& x : t.mutable_data()) x = rng.uniform(-kInitRange, kInitRange);
    p.add(std::move(name), std::move(t));
  };
  const auto zeros = [&](std::string name, std::size_t n) { p.add(std::move(name), Tensor::zeros({n}, true)); };
  const auto norm = [&](const std::string& prefix) {
    p.add(prefix + ".gain", Tensor::full({d}, Real{1}, true));
    zeros(prefix + ".bias", d);
  };
  const auto attention = [&](const std::string& prefix) {
    for (const char* proj : {"q", "k", "v", "o"}) {
      weight(prefix + ".w" + proj, {d, d});
      zeros(prefix + ".b" + proj, d);
    }
  };
  const auto ffn = [&](const std::string& prefix) {
    weight(prefix + ".w1", {d, cfg.d_ff});
    zeros(prefix + ".b1", cfg.d_ff);
    weight(prefix + ".w2", {cfg.d_ff, d});
    zeros(prefix + ".b2", d);
  };

  weight("embed.tokens", {cfg.vocab_size, d});
  weight("embed.src_positions", {cfg.max_src_pos, d});
  weight("embed.tgt_positions", {cfg.max_tgt_pos, d});
  for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
    const std::string pre = layer_prefix("encoder", l);
    norm(pre + "ln_attn");
    attention(pre + "self_attn");
    norm(pre + "ln_ffn");
    ffn(pre + "ffn");
  }
  if (cfg.enc_layers > 0) norm("encoder.final_ln");
  for (std::size_t l = 0; l < cfg.dec_layers; ++l) {
    const std::string pre = layer_prefix("decoder", l);
    norm(pre + "ln_self");
    attention(pre + "self_attn");
    norm(pre + "ln_cross");
    attention(pre + "cross_attn");
    norm(pre + "ln_ffn");
    ffn(pre + "ffn");
  }
  if (cfg.dec_layers > 0) norm("decoder.final_ln");
  weight("lm_head.weight", {d, cfg.vocab_size});
  return p;
}

namespace {

AttentionWeights attention_weights(const ModelParams& p, const std::string& prefix) {
  return {p.get(prefix + ".wq"), p.get(prefix + ".bq"), p.get(prefix + ".wk"), p.get(prefix + ".bk"),
          p.get(prefix + ".wv"), p.get(prefix + ".bv"), p.get(prefix + ".wo"), p.get(prefix + ".bo")};
}

Tensor norm(const ModelParams& p, const std::string& prefix, const Tensor& x) {
  return layer_norm(x, p.get(prefix + ".gain"), p.get(prefix + ".bias"), kLayerNormEps);
}

Tensor feed_forward(const ModelParams& p, const std::string& prefix, const Tensor& x) {
  const Tensor hidden = gelu(add_row(matmul(x, p.get(prefix + ".w1")), p.get(prefix + ".b1")));
  return add_row(matmul(hidden, p.get(prefix + ".w2")), p.get(prefix + ".b2"));
}

Tensor maybe_dropout(const Tensor& x, const ModelConfig& cfg, const ForwardOptions& opts) {
  if (!opts.dropout_rng || cfg.dropout == 0.0) return x;
  return dropout(x, cfg.dropout, *opts.dropout_rng);
}

// Globals beyond the sequence end are dropped so short inputs stay valid.
AttentionConfig clip_globals(const AttentionConfig& cfg, std::size_t n) {
  AttentionConfig out = cfg;
  out.global_indices.clear();
  for (std::size_t g : cfg.global_indices) {
    if (g < n) out.global_indices.push_back(g);
  }
  return out;
}

void check_ids(std::span<const TokenId> ids, const ModelConfig& cfg, const char* what) {
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
      throw IndexError(std::string(what) + " token id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(cfg.vocab_size));
    }
  }
}

}  // namespace

Tensor encode_source(const ModelParams& p, std::span<const TokenId> src, const ModelConfig& cfg,
                     ForwardOptions opts) {
  if (src.empty()) throw LengthError("source sequence is empty");
  if (src.size() > cfg.max_src_pos) {
    throw LengthError("source length " + std::to_string(src.size()) + " exceeds max_src_pos " +
                      std::to_string(cfg.max_src_pos));
  }
  check_ids(src, cfg, "source");
  const std::size_t n = src.size();
  Tensor x = add(embedding(p.get("embed.tokens"), src), leading_rows(p.get("embed.src_positions"), n));
  x = maybe_dropout(x, cfg, opts);
  if (cfg.enc_layers == 0) return x;

  const Tensor mask = build_sparse_mask(n, clip_globals(cfg.attention, n)).to_additive();
  for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
    const std::string pre = layer_prefix("encoder", l);
    const Tensor h = norm(p, pre + "ln_attn", x);
    x = add(x, maybe_dropout(multi_head_attend(h, h, h, attention_weights(p, pre + "self_attn"), cfg.heads, &mask),
                             cfg, opts));
    x = add(x, maybe_dropout(feed_forward(p, pre + "ffn", norm(p, pre + "ln_ffn", x)), cfg, opts));
  }
  return norm(p, "encoder.final_ln", x);
}

Tensor decode_logits(const ModelParams& p, const Tensor& enc_out, std::span<const TokenId> tgt_prefix,
                     const ModelConfig& cfg, ForwardOptions opts) {
  if (tgt_prefix.empty()) throw LengthError("target prefix is empty");
  if (tgt_prefix.size() > cfg.max_tgt_pos) {
    throw LengthError("target length " + std::to_string(tgt_prefix.size()) + " exceeds max_tgt_pos " +
                      std::to_string(cfg.max_tgt_pos));
  }
  if (enc_out.cols() != cfg.d_model) {
    throw ShapeError("encoder output " + shape_str(enc_out.shape()) + " does not have d_model columns");
  }
  check_ids(tgt_prefix, cfg, "target");
  const std::size_t n = tgt_prefix.size();
  Tensor y = add(embedding(p.get("embed.tokens"), tgt_prefix), leading_rows(p.get("embed.tgt_positions"), n));
  y = maybe_dropout(y, cfg, opts);
  const Tensor causal = causal_mask(n).to_additive();
  for (std::size_t l = 0; l < cfg.dec_layers; ++l) {
    const std::string pre = layer_prefix("decoder", l);
    Tensor h = norm(p, pre + "ln_self", y);
    y = add(y, maybe_dropout(
                   multi_head_attend(h, h, h, attention_weights(p, pre + "self_attn"), cfg.heads, &causal), cfg,
                   opts));
    h = norm(p, pre + "ln_cross", y);
    y = add(y, maybe_dropout(multi_head_attend(h, enc_out, enc_out, attention_weights(p, pre + "cross_attn"),
                                               cfg.heads, nullptr),
                             cfg, opts));
    y = add(y, maybe_dropout(feed_forward(p, pre + "ffn", norm(p, pre + "ln_ffn", y)), cfg, opts));
  }
  if (cfg.dec_layers > 0) y = norm(p, "decoder.final_ln", y);
  return matmul(y, p.get("lm_head.weight"));
}

Tensor forward_loss(const ModelParams& p, std::span<const SequencePair> batch, const ModelConfig& cfg,
                    ForwardOptions opts) {
  if (batch.empty()) throw ShapeError("forward_loss: empty batch");
  Tensor total;
  for (const auto& pair : batch) {
    if (pair.tgt.size() < 2) throw LengthError("forward_loss: target needs at least two tokens (bos, eos)");
    const Tensor enc = encode_source(p, pair.src, cfg, opts);
    const std::span<const TokenId> tgt(pair.tgt);
    const Tensor logits = decode_logits(p, enc, tgt.first(tgt.size() - 1), cfg, opts);
    const Tensor loss = cross_entropy_logits(logits, tgt.subspan(1), kPadId);
    total = total.defined() ? add(total, loss) : loss;
  }
  return scale(total, Real{1} / static_cast<Real>(batch.size()));
}

IncrementalDecoder::IncrementalDecoder(const ModelParams& p, const ModelConfig& cfg, const Tensor& enc_out)
    : params_(p), cfg_(cfg) {
  NoGradGuard no_grad;
  if (enc_out.cols() != cfg.d_model) {
    throw ShapeError("encoder output " + shape_str(enc_out.shape()) + " does not have d_model columns");
  }
  layers_.resize(cfg.dec_layers);
  for (std::size_t l = 0; l < cfg.dec_layers; ++l) {
    const std::string pre = layer_prefix("decoder", l) + "cross_attn";
    layers_[l].cross_k = add_row(matmul(enc_out, p.get(pre + ".wk")), p.get(pre + ".bk"));
    layers_[l].cross_v = add_row(matmul(enc_out, p.get(pre + ".wv")), p.get(pre + ".bv"));
  }
}

namespace {

// Per-head attention of projected queries against projected keys/values,
// followed by the output projection; mirrors multi_head_attend.
Tensor attend_projected(const Tensor& q, const Tensor& k, const Tensor& v, const ModelParams& p,
                        const std::string& prefix, std::size_t heads) {
  Tensor merged;
  if (heads == 1) {
    merged = attend_additive(q, k, v, nullptr);
  } else {
    const std::size_t dh = q.cols() / heads;
    std::vector<Tensor> outs;
    outs.reserve(heads);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      outs.push_back(
          attend_additive(slice_cols(q, hd * dh, dh), slice_cols(k, hd * dh, dh), slice_cols(v, hd * dh, dh), nullptr));
    }
    merged = concat_cols(outs);
  }
  return add_row(matmul(merged, p.get(prefix + ".wo")), p.get(prefix + ".bo"));
}

}  // namespace

std::vector<Real> IncrementalDecoder::step(TokenId token) {
  NoGradGuard no_grad;
  if (position_ >= cfg_.max_tgt_pos) {
    throw LengthError("target length " + std::to_string(position_ + 1) + " exceeds max_tgt_pos " +
                      std::to_string(cfg_.max_tgt_pos));
  }
  const TokenId ids[1] = {token};
  check_ids(ids, cfg_, "target");
  const std::size_t d = cfg_.d_model;
  const Tensor& pos_table = params_.get("embed.tgt_positions");
  const Tensor pos = Tensor::from(
      {1, d}, std::vector<Real>(pos_table.data().begin() + static_cast<std::ptrdiff_t>(position_ * d),
                                pos_table.data().begin() + static_cast<std::ptrdiff_t>((position_ + 1) * d)));
  Tensor y = add(embedding(params_.get("embed.tokens"), ids), pos);
  const std::size_t len = position_ + 1;
  for (std::size_t l = 0; l < cfg_.dec_layers; ++l) {
    const std::string pre = layer_prefix("decoder", l);
    LayerCache& cache = layers_[l];
    Tensor h = norm(params_, pre + "ln_self", y);
    const std::string sa = pre + "self_attn";
    const Tensor q = add_row(matmul(h, params_.get(sa + ".wq")), params_.get(sa + ".bq"));
    const Tensor k = add_row(matmul(h, params_.get(sa + ".wk")), params_.get(sa + ".bk"));
    const Tensor v = add_row(matmul(h, params_.get(sa + ".wv")), params_.get(sa + ".bv"));
    cache.self_k.insert(cache.self_k.end(), k.data().begin(), k.data().end());
    cache.self_v.insert(cache.self_v.end(), v.data().begin(), v.data().end());
    const Tensor keys = Tensor::from({len, d}, cache.self_k);
    const Tensor values = Tensor::from({len, d}, cache.self_v);
    y = add(y, attend_projected(q, keys, values, params_, sa, cfg_.heads));

    h = norm(params_, pre + "ln_cross", y);
    const std::string ca = pre + "cross_attn";
    const Tensor cq = add_row(matmul(h, params_.get(ca + ".wq")), params_.get(ca + ".bq"));
    y = add(y, attend_projected(cq, cache.cross_k, cache.cross_v, params_, ca, cfg_.heads));
    y = add(y, feed_forward(params_, pre + "ffn", norm(params_, pre + "ln_ffn", y)));
  }
  if (cfg_.dec_layers > 0) y = norm(params_, "decoder.final_ln", y);
  const Tensor logits = matmul(y, params_.get("lm_head.weight"));
  ++position_;
  return {logits.data().begin(), logits.data().end()};
}

}  // namespace afg
