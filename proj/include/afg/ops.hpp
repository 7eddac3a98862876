#pragma once

// Differentiable operations over Tensor. Matrices are the last two
// dimensions folded to rows x cols; every op documents the shapes it takes.

#include <limits>
#include <span>
#include <vector>

#include "afg/rng.hpp"
#include "afg/tensor.hpp"

namespace afg {

// Value used in additive masks for excluded positions.
inline constexpr Real kMaskedOut = -std::numeric_limits<Real>::infinity();

// [m x k] * [k x n] -> [m x n]. Throws ShapeError naming both shapes.
Tensor matmul(const Tensor& a, const Tensor& b);
// [m x k] * [n x k]^T -> [m x n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
// [m x n] + bias[n] broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& bias);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Real factor);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Row-wise softmax. With an additive mask (same shape, entries 0 or
// kMaskedOut) masked entries get probability 0 and a row that is masked
// everywhere comes out as all zeros instead of NaN.
Tensor softmax_rows(const Tensor& x);
Tensor softmax_rows(const Tensor& x, const Tensor& additive_mask);

// Standardizes each row over the last axis (biased variance), then
// applies gain and bias of length cols.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps = 1e-5);

// Tanh approximation:
//   gelu(x) = 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
Tensor gelu(const Tensor& x);

// Mean of -log softmax(logits[i])[targets[i]] over positions whose target
// is not ignore_id. Zero (with zero gradient) when every position is
// ignored. Throws IndexError for targets outside [0, V).
Tensor cross_entropy_logits(const Tensor& logits, std::span<const TokenId> targets, TokenId ignore_id);

// Gathers rows of table [V x d] -> [n x d]; gradient scatter-adds.
Tensor embedding(const Tensor& table, std::span<const TokenId> ids);
// Rows [0, n) of table; used for absolute position embeddings.
Tensor leading_rows(const Tensor& table, std::size_t n);

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t width);
Tensor concat_cols(std::span<const Tensor> parts);

// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, Real rate, Rng& rng);

}  // namespace afg
