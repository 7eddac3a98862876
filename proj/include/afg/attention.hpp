#pragma once

// Scaled dot-product attention with dense, causal and sliding-window
// masks, and exact counts of attended (query, key) pairs.
//
// Sliding window of total width w: every position sees h = w/2 neighbours on
// each side plus itself. Global positions attend to, and are attended by,
// every position.

#include <cstdint>
#include <optional>
#include <vector>

#include "afg/tensor.hpp"

namespace afg {

struct AttentionConfig {
  std::size_t window = 16;
  // Sorted, unique. Position 0 (the bos token) by default.
  std::vector<std::size_t> global_indices{0};

  std::size_t half_window() const { return window / 2; }
  // Throws ConfigError unless window is even and >= 2 and globals are sorted/unique.
  void validate() const;
};

class AttentionMask {
 public:
  AttentionMask(std::size_t n, bool fill);

  std::size_t size() const { return n_; }
  bool allowed(std::size_t i, std::size_t j) const { return allowed_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool on) { allowed_[i * n_ + j] = on ? 1 : 0; }
  std::uint64_t count() const;

  // n x n tensor with 0 for allowed pairs and kMaskedOut elsewhere.
  Tensor to_additive() const;

 private:
  std::size_t n_;
  std::vector<std::uint8_t> allowed_;
};

AttentionMask dense_mask(std::size_t n);
AttentionMask causal_mask(std::size_t n);
// allowed(i,j) = |i-j| <= h || i in G || j in G. Throws ConfigError for a
// global index >= n.
AttentionMask build_sparse_mask(std::size_t n, const AttentionConfig& cfg);

// Closed-form number of allowed pairs; equals build_sparse_mask(n, cfg).count().
std::uint64_t attention_pair_count(std::size_t n, const AttentionConfig& cfg);
// Dense attention: n^2.
std::uint64_t dense_pair_count(std::size_t n);

// softmax(q k^T / sqrt(d) + mask) v for q [nq x d], k, v [nk x d].
// The mask, when given, must be nq x nk (square masks only: nq == nk).
Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask* mask = nullptr);
// Same, with a precomputed additive mask (see AttentionMask::to_additive).
Tensor attend_additive(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* additive_mask);

struct AttentionWeights {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // [d x d] and [d]
};

// Projects query/key/value inputs, splits d_model columns into `heads`
// groups of d_model/heads, attends per head, concatenates and applies the
// output projection. Throws ConfigError if heads does not divide d_model.
Tensor multi_head_attend(const Tensor& query_in, const Tensor& key_in, const Tensor& value_in,
                         const AttentionWeights& w, std::size_t heads, const Tensor* additive_mask);

}  // namespace afg
