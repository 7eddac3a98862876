#pragma once

// AdamW with decoupled weight decay:
//   m <- b1 m + (1 - b1) g
//   v <- b2 v + (1 - b2) g^2
//   theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + wd theta)
// with bias-corrected m_hat = m / (1 - b1^t), v_hat = v / (1 - b2^t).

#include <cstdint>
#include <span>
#include <vector>

#include "afg/model.hpp"

namespace afg {

struct OptimizerConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;  // throws ConfigError
  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

// First and second moments per parameter (same order as ModelParams) and
// the number of completed steps.
struct AdamWState {
  std::vector<std::vector<Real>> m;
  std::vector<std::vector<Real>> v;
  std::uint64_t step = 0;

  static AdamWState zeros_like(const ModelParams& params);
  bool all_zero() const;
};

// One update of a flat array at step t >= 1. Throws ShapeError on length
// mismatch.
void adamw_update(std::span<Real> theta, std::span<const Real> grad, std::span<Real> m, std::span<Real> v,
                  std::uint64_t t, const OptimizerConfig& cfg);

// Advances state.step and updates every parameter from its accumulated
// gradient (parameters without a gradient see g = 0).
void adamw_step(ModelParams& params, AdamWState& state, const OptimizerConfig& cfg);

}  // namespace afg
