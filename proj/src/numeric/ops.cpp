#include "afg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "afg/errors.hpp"
#include "numeric/kernels.hpp"

namespace afg {

namespace {

using NodePtr = std::shared_ptr<detail::Node>;
using BackwardFn = std::function<void(detail::Node&)>;

// Wraps a computed value; records history only when it is needed.
Tensor make_result(Shape shape, std::vector<Real> value, const char* op, std::vector<NodePtr> inputs,
                   BackwardFn backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool needs_grad = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) needs_grad = needs_grad || in->requires_grad;
  }
  if (needs_grad) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward_fn = std::move(backward);
  }
  return Tensor(std::move(node));
}

void require_matrix(const Tensor& t, const char* what) {
  if (!t.defined()) throw ShapeError(std::string(what) + ": undefined tensor");
}

Shape matrix_shape(std::size_t r, std::size_t c) { return {r, c}; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

bool is_masked(Real m) { return std::isinf(m) && m < 0; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols();
  if (b.rank() != 2 || b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions disagree for " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const std::size_t n = b.cols();
  std::vector<Real> out(m * n);
  kernels::gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n, false);
  Shape shape = a.shape();
  shape.back() = n;
  return make_result(std::move(shape), std::move(out), "matmul", {a.node(), b.node()},
                     [m, k, n](detail::Node& self) {
                       auto& an = *self.inputs[0];
                       auto& bn = *self.inputs[1];
                       if (an.requires_grad) {
                         kernels::gemm_nt(self.grad.data(), bn.value.data(), an.grad_buffer().data(), m, n,
                                          k, true);
                       }
                       if (bn.requires_grad) {
                         kernels::gemm_tn(an.value.data(), self.grad.data(), bn.grad_buffer().data(), k, m,
                                          n, true);
                       }
                     });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols();
  if (b.cols() != k) {
    throw ShapeError("matmul_nt: inner dimensions disagree for " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()) + "^T");
  }
  const std::size_t n = b.rows();
  std::vector<Real> out(m * n);
  kernels::gemm_nt(a.data().data(), b.data().data(), out.data(), m, k, n, false);
  return make_result(matrix_shape(m, n), std::move(out), "matmul_nt", {a.node(), b.node()},
                     [m, k, n](detail::Node& self) {
                       auto& an = *self.inputs[0];
                       auto& bn = *self.inputs[1];
                       // C = A B^T: dA = dC B, dB = dC^T A
                       if (an.requires_grad) {
                         kernels::gemm_nn(self.grad.data(), bn.value.data(), an.grad_buffer().data(), m, n,
                                          k, true);
                       }
                       if (bn.requires_grad) {
                         kernels::gemm_tn(self.grad.data(), an.value.data(), bn.grad_buffer().data(), n, m,
                                          k, true);
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<Real> out(a.numel());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), "add", {a.node(), b.node()}, [](detail::Node& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      auto& g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
  const std::size_t r = x.rows(), c = x.cols();
  if (bias.numel() != c) {
    throw ShapeError("add_row: bias " + shape_str(bias.shape()) + " does not match columns of " +
                     shape_str(x.shape()));
  }
  std::vector<Real> out(x.numel());
  const auto xv = x.data(), bv = bias.data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] + bv[j];
  }
  return make_result(x.shape(), std::move(out), "add_row", {x.node(), bias.node()},
                     [r, c](detail::Node& self) {
                       auto& xn = *self.inputs[0];
                       auto& bn = *self.inputs[1];
                       if (xn.requires_grad) {
                         auto& g = xn.grad_buffer();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       }
                       if (bn.requires_grad) {
                         auto& g = bn.grad_buffer();
                         for (std::size_t i = 0; i < r; ++i) {
                           for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
                         }
                       }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<Real> out(a.numel());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), "mul", {a.node(), b.node()}, [](detail::Node& self) {
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    if (an.requires_grad) {
      auto& g = an.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn.value[i];
    }
    if (bn.requires_grad) {
      auto& g = bn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an.value[i];
    }
  });
}

Tensor scale(const Tensor& x, Real factor) {
  std::vector<Real> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor;
  return make_result(x.shape(), std::move(out), "scale", {x.node()}, [factor](detail::Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor sum(const Tensor& x) {
  Real total = 0;
  for (Real v : x.data()) total += v;
  return make_result({1}, {total}, "sum", {x.node()}, [](detail::Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (Real& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), Real{1} / static_cast<Real>(x.numel())); }

namespace {

Tensor softmax_impl(const Tensor& x, const Tensor* mask) {
  const std::size_t r = x.rows(), c = x.cols();
  const auto xv = x.data();
  std::span<const Real> mv;
  if (mask) {
    if (mask->rows() != r || mask->cols() != c) {
      throw ShapeError("softmax_rows: mask " + shape_str(mask->shape()) + " does not match input " +
                       shape_str(x.shape()));
    }
    mv = mask->data();
  }
  std::vector<Real> out(x.numel(), Real{0});
  for (std::size_t i = 0; i < r; ++i) {
    const Real* row = xv.data() + i * c;
    Real* y = out.data() + i * c;
    Real mx = -std::numeric_limits<Real>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      const Real v = mask ? row[j] + mv[i * c + j] : row[j];
      y[j] = v;
      if (v > mx) mx = v;
    }
    if (is_masked(mx)) {
      std::fill(y, y + c, Real{0});
      continue;
    }
    Real total = 0;
    for (std::size_t j = 0; j < c; ++j) {
      y[j] = is_masked(y[j]) ? Real{0} : std::exp(y[j] - mx);
      total += y[j];
    }
    const Real inv = Real{1} / total;
    for (std::size_t j = 0; j < c; ++j) y[j] *= inv;
  }
  return make_result(x.shape(), std::move(out), mask ? "softmax_rows_masked" : "softmax_rows", {x.node()},
                     [r, c](detail::Node& self) {
                       auto& g = self.inputs[0]->grad_buffer();
                       for (std::size_t i = 0; i < r; ++i) {
                         const Real* y = self.value.data() + i * c;
                         const Real* dy = self.grad.data() + i * c;
                         Real dot = 0;
                         for (std::size_t j = 0; j < c; ++j) dot += y[j] * dy[j];
                         Real* dx = g.data() + i * c;
                         for (std::size_t j = 0; j < c; ++j) dx[j] += y[j] * (dy[j] - dot);
                       }
                     });
}

}  // namespace

Tensor softmax_rows(const Tensor& x) { return softmax_impl(x, nullptr); }

Tensor softmax_rows(const Tensor& x, const Tensor& additive_mask) { return softmax_impl(x, &additive_mask); }

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps) {
  if (!(eps > 0)) throw ShapeError("layer_norm: eps must be positive");
  const std::size_t r = x.rows(), d = x.cols();
  if (gain.numel() != d || bias.numel() != d) {
    throw ShapeError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " + shape_str(bias.shape()) +
                     " do not match last axis of " + shape_str(x.shape()));
  }
  std::vector<Real> out(x.numel());
  std::vector<Real> xhat(x.numel());
  std::vector<Real> inv_std(r);
  const auto xv = x.data(), gv = gain.data(), bv = bias.data();
  for (std::size_t i = 0; i < r; ++i) {
    const Real* row = xv.data() + i * d;
    Real mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<Real>(d);
    Real var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<Real>(d);
    inv_std[i] = Real{1} / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (row[j] - mu) * inv_std[i];
      out[i * d + j] = gv[j] * xhat[i * d + j] + bv[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), "layer_norm", {x.node(), gain.node(), bias.node()},
      [r, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& self) {
        auto& xn = *self.inputs[0];
        auto& gn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        const Real* dy = self.grad.data();
        if (gn.requires_grad || bn.requires_grad) {
          for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
              if (gn.requires_grad) gn.grad_buffer()[j] += dy[i * d + j] * xhat[i * d + j];
              if (bn.requires_grad) bn.grad_buffer()[j] += dy[i * d + j];
            }
          }
        }
        if (!xn.requires_grad) return;
        auto& dx = xn.grad_buffer();
        std::vector<Real> dxhat(d);
        for (std::size_t i = 0; i < r; ++i) {
          Real mean_d = 0, mean_dx = 0;
          for (std::size_t j = 0; j < d; ++j) {
            dxhat[j] = dy[i * d + j] * gn.value[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xhat[i * d + j];
          }
          mean_d /= static_cast<Real>(d);
          mean_dx /= static_cast<Real>(d);
          for (std::size_t j = 0; j < d; ++j) {
            dx[i * d + j] += inv_std[i] * (dxhat[j] - mean_d - xhat[i * d + j] * mean_dx);
          }
        }
      });
}

Tensor gelu(const Tensor& x) {
  constexpr Real kAlpha = 0.044715;
  const Real k = std::sqrt(Real{2} / std::numbers::pi_v<Real>);
  std::vector<Real> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Real v = xv[i];
    out[i] = Real{0.5} * v * (Real{1} + std::tanh(k * (v + kAlpha * v * v * v)));
  }
  return make_result(x.shape(), std::move(out), "gelu", {x.node()}, [k](detail::Node& self) {
    auto& xn = *self.inputs[0];
    auto& g = xn.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Real v = xn.value[i];
      const Real t = std::tanh(k * (v + kAlpha * v * v * v));
      const Real dt = k * (Real{1} + Real{3} * kAlpha * v * v);
      const Real d = Real{0.5} * (Real{1} + t) + Real{0.5} * v * (Real{1} - t * t) * dt;
      g[i] += self.grad[i] * d;
    }
  });
}

Tensor cross_entropy_logits(const Tensor& logits, std::span<const TokenId> targets, TokenId ignore_id) {
  const std::size_t t = logits.rows(), vocab = logits.cols();
  if (targets.size() != t) {
    throw ShapeError("cross_entropy_logits: " + std::to_string(targets.size()) + " targets for logits " +
                     shape_str(logits.shape()));
  }
  std::vector<TokenId> tgt(targets.begin(), targets.end());
  std::size_t counted = 0;
  for (std::size_t i = 0; i < t; ++i) {
    if (tgt[i] == ignore_id) continue;
    if (tgt[i] < 0 || static_cast<std::size_t>(tgt[i]) >= vocab) {
      throw IndexError("cross_entropy_logits: target " + std::to_string(tgt[i]) + " at position " +
                       std::to_string(i) + " outside [0, " + std::to_string(vocab) + ")");
    }
    ++counted;
  }
  const auto lv = logits.data();
  std::vector<Real> probs(logits.numel(), Real{0});
  Real total = 0;
  for (std::size_t i = 0; i < t; ++i) {
    if (tgt[i] == ignore_id) continue;
    const Real* row = lv.data() + i * vocab;
    const Real mx = *std::max_element(row, row + vocab);
    Real z = 0;
    for (std::size_t j = 0; j < vocab; ++j) z += std::exp(row[j] - mx);
    const Real log_z = mx + std::log(z);
    total += log_z - row[tgt[i]];
    for (std::size_t j = 0; j < vocab; ++j) probs[i * vocab + j] = std::exp(row[j] - log_z);
  }
  const Real norm = counted ? Real{1} / static_cast<Real>(counted) : Real{0};
  return make_result({1}, {total * norm}, "cross_entropy", {logits.node()},
                     [vocab, norm, tgt = std::move(tgt), probs = std::move(probs), ignore_id](detail::Node& self) {
                       auto& g = self.inputs[0]->grad_buffer();
                       const Real upstream = self.grad[0] * norm;
                       for (std::size_t i = 0; i < tgt.size(); ++i) {
                         if (tgt[i] == ignore_id) continue;
                         for (std::size_t j = 0; j < vocab; ++j) g[i * vocab + j] += upstream * probs[i * vocab + j];
                         g[i * vocab + static_cast<std::size_t>(tgt[i])] -= upstream;
                       }
                     });
}

Tensor embedding(const Tensor& table, std::span<const TokenId> ids) {
  const std::size_t vocab = table.rows(), d = table.cols();
  if (ids.empty()) throw ShapeError("embedding: empty id list");
  std::vector<TokenId> idx(ids.begin(), ids.end());
  std::vector<Real> out(idx.size() * d);
  const auto tv = table.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= vocab) {
      throw IndexError("embedding: id " + std::to_string(idx[i]) + " outside table of " +
                       std::to_string(vocab) + " rows");
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(idx[i]) * d, d, out.data() + i * d);
  }
  const std::size_t n = idx.size();
  return make_result(matrix_shape(n, d), std::move(out), "embedding", {table.node()},
                     [d, idx = std::move(idx)](detail::Node& self) {
                       auto& g = self.inputs[0]->grad_buffer();
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         Real* dst = g.data() + static_cast<std::size_t>(idx[i]) * d;
                         const Real* src = self.grad.data() + i * d;
                         for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                       }
                     });
}

Tensor leading_rows(const Tensor& table, std::size_t n) {
  const std::size_t d = table.cols();
  if (n == 0 || n > table.rows()) {
    throw ShapeError("leading_rows: cannot take " + std::to_string(n) + " rows of " + shape_str(table.shape()));
  }
  std::vector<Real> out(table.data().begin(), table.data().begin() + static_cast<std::ptrdiff_t>(n * d));
  return make_result(matrix_shape(n, d), std::move(out), "leading_rows", {table.node()}, [](detail::Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t width) {
  const std::size_t r = x.rows(), c = x.cols();
  if (width == 0 || start + width > c) {
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + width) +
                     ") outside " + shape_str(x.shape()));
  }
  std::vector<Real> out(r * width);
  const auto xv = x.data();
  for (std::size_t i = 0; i < r; ++i) std::copy_n(xv.data() + i * c + start, width, out.data() + i * width);
  return make_result(matrix_shape(r, width), std::move(out), "slice_cols", {x.node()},
                     [r, c, start, width](detail::Node& self) {
                       auto& g = self.inputs[0]->grad_buffer();
                       for (std::size_t i = 0; i < r; ++i) {
                         for (std::size_t j = 0; j < width; ++j) g[i * c + start + j] += self.grad[i * width + j];
                       }
                     });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  std::vector<NodePtr> inputs;
  for (const auto& p : parts) {
    if (p.rows() != r) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(parts.front().shape()) + " vs " +
                       shape_str(p.shape()));
    }
    widths.push_back(p.cols());
    total += p.cols();
    inputs.push_back(p.node());
  }
  std::vector<Real> out(r * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].data();
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(pv.data() + i * widths[k], widths[k], out.data() + i * total + offset);
    }
    offset += widths[k];
  }
  return make_result(matrix_shape(r, total), std::move(out), "concat_cols", std::move(inputs),
                     [r, total, widths = std::move(widths)](detail::Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         auto& in = *self.inputs[k];
                         if (in.requires_grad) {
                           auto& g = in.grad_buffer();
                           for (std::size_t i = 0; i < r; ++i) {
                             for (std::size_t j = 0; j < widths[k]; ++j) {
                               g[i * widths[k] + j] += self.grad[i * total + off + j];
                             }
                           }
                         }
                         off += widths[k];
                       }
                     });
}

Tensor dropout(const Tensor& x, Real rate, Rng& rng) {
  if (rate < 0 || rate >= 1) throw ConfigError("dropout: rate must be in [0, 1)");
  if (rate == 0) return x;
  const Real keep_scale = Real{1} / (Real{1} - rate);
  std::vector<Real> keep(x.numel());
  for (Real& k : keep) k = rng.bernoulli(rate) ? Real{0} : keep_scale;
  return mul(x, Tensor::from(x.shape(), std::move(keep)));
}

}  // namespace afg
