#include "afg/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "afg/errors.hpp"
#include "afg/ops.hpp"

namespace afg {

void AttentionConfig::validate() const {
  if (window < 2 || window % 2 != 0) {
    throw ConfigError("attention window must be even and >= 2, got " + std::to_string(window));
  }
  for (std::size_t i = 1; i < global_indices.size(); ++i) {
    if (global_indices[i] <= global_indices[i - 1]) {
      throw ConfigError("attention global_indices must be sorted and unique");
    }
  }
}

AttentionMask::AttentionMask(std::size_t n, bool fill) : n_(n), allowed_(n * n, fill ? 1 : 0) {
  if (n == 0) throw ShapeError("attention mask needs n >= 1");
}

std::uint64_t AttentionMask::count() const {
  return static_cast<std::uint64_t>(std::count(allowed_.begin(), allowed_.end(), std::uint8_t{1}));
}

Tensor AttentionMask::to_additive() const {
  std::vector<Real> values(allowed_.size());
  for (std::size_t i = 0; i < allowed_.size(); ++i) values[i] = allowed_[i] ? Real{0} : kMaskedOut;
  return Tensor::from({n_, n_}, std::move(values));
}

AttentionMask dense_mask(std::size_t n) { return AttentionMask(n, true); }

AttentionMask causal_mask(std::size_t n) {
  AttentionMask mask(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) mask.set(i, j, true);
  }
  return mask;
}

namespace {

void check_globals(std::size_t n, const AttentionConfig& cfg) {
  cfg.validate();
  for (std::size_t g : cfg.global_indices) {
    if (g >= n) {
      throw ConfigError("global attention index " + std::to_string(g) + " outside sequence of length " +
                        std::to_string(n));
    }
  }
}

}  // namespace

AttentionMask build_sparse_mask(std::size_t n, const AttentionConfig& cfg) {
  check_globals(n, cfg);
  const std::size_t h = cfg.half_window();
  AttentionMask mask(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i > h ? i - h : 0;
    const std::size_t hi = std::min(i + h, n - 1);
    for (std::size_t j = lo; j <= hi; ++j) mask.set(i, j, true);
  }
  for (std::size_t g : cfg.global_indices) {
    for (std::size_t j = 0; j < n; ++j) {
      mask.set(g, j, true);
      mask.set(j, g, true);
    }
  }
  return mask;
}

std::uint64_t dense_pair_count(std::size_t n) { return static_cast<std::uint64_t>(n) * n; }

std::uint64_t attention_pair_count(std::size_t n, const AttentionConfig& cfg) {
  if (n == 0) throw ShapeError("attention_pair_count needs n >= 1");
  check_globals(n, cfg);
  const std::uint64_t nn = n;
  const std::uint64_t h = cfg.half_window();
  const std::uint64_t m = std::min<std::uint64_t>(h, nn - 1);
  // Band |i-j| <= h: the diagonal plus two triangles of off-diagonals 1..m.
  const std::uint64_t band = nn + 2 * (m * nn - m * (m + 1) / 2);

  const std::uint64_t g = cfg.global_indices.size();
  if (g == 0) return band;
  const auto band_row = [&](std::uint64_t i) {
    const std::uint64_t lo = i > h ? i - h : 0;
    const std::uint64_t hi = std::min(i + h, nn - 1);
    return hi - lo + 1;
  };
  std::uint64_t row_sum = 0;
  std::uint64_t global_pairs_in_band = 0;
  for (std::size_t a : cfg.global_indices) {
    row_sum += band_row(a);
    for (std::size_t b : cfg.global_indices) {
      const std::uint64_t dist = a > b ? a - b : b - a;
      if (dist <= h) ++global_pairs_in_band;
    }
  }
  // Pairs touching a global row or column, minus those already in the band.
  const std::uint64_t global_cross = 2 * g * nn - g * g;
  const std::uint64_t overlap = 2 * row_sum - global_pairs_in_band;
  return band + global_cross - overlap;
}

Tensor attend_additive(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* additive_mask) {
  if (q.cols() == 0 || q.cols() != k.cols()) {
    throw ShapeError("attend: query " + shape_str(q.shape()) + " and key " + shape_str(k.shape()) +
                     " widths differ");
  }
  if (k.rows() != v.rows()) {
    throw ShapeError("attend: key " + shape_str(k.shape()) + " and value " + shape_str(v.shape()) +
                     " lengths differ");
  }
  if (additive_mask && (additive_mask->rows() != q.rows() || additive_mask->cols() != k.rows())) {
    throw ShapeError("attend: mask " + shape_str(additive_mask->shape()) + " does not cover " +
                     std::to_string(q.rows()) + "x" + std::to_string(k.rows()) + " scores");
  }
  const Real inv_sqrt_d = Real{1} / std::sqrt(static_cast<Real>(q.cols()));
  Tensor scores = scale(matmul_nt(q, k), inv_sqrt_d);
  Tensor probs = additive_mask ? softmax_rows(scores, *additive_mask) : softmax_rows(scores);
  return matmul(probs, v);
}

Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask* mask) {
  if (!mask) return attend_additive(q, k, v, nullptr);
  if (mask->size() != q.rows() || mask->size() != k.rows()) {
    throw ShapeError("attend: mask of size " + std::to_string(mask->size()) + " for " +
                     std::to_string(q.rows()) + " queries and " + std::to_string(k.rows()) + " keys");
  }
  const Tensor additive = mask->to_additive();
  return attend_additive(q, k, v, &additive);
}

Tensor multi_head_attend(const Tensor& query_in, const Tensor& key_in, const Tensor& value_in,
                         const AttentionWeights& w, std::size_t heads, const Tensor* additive_mask) {
  const std::size_t d_model = query_in.cols();
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  const Tensor q = add_row(matmul(query_in, w.wq), w.bq);
  const Tensor k = add_row(matmul(key_in, w.wk), w.bk);
  const Tensor v = add_row(matmul(value_in, w.wv), w.bv);
  Tensor merged;
  if (heads == 1) {
    merged = attend_additive(q, k, v, additive_mask);
  } else {
    const std::size_t dh = d_model / heads;
    std::vector<Tensor> outs;
    outs.reserve(heads);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      outs.push_back(attend_additive(slice_cols(q, hd * dh, dh), slice_cols(k, hd * dh, dh),
                                     slice_cols(v, hd * dh, dh), additive_mask));
    }
    merged = concat_cols(outs);
  }
  return add_row(matmul(merged, w.wo), w.bo);
}

}  // namespace afg
