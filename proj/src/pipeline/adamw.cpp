#include "afg/adamw.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "afg/errors.hpp"

namespace afg {

void OptimizerConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("optimizer: lr must be > 0");
  if (!(beta1 > 0 && beta1 < 1)) throw ConfigError("optimizer: beta1 must be in (0, 1)");
  if (!(beta2 > 0 && beta2 < 1)) throw ConfigError("optimizer: beta2 must be in (0, 1)");
  if (!(eps > 0)) throw ConfigError("optimizer: eps must be > 0");
  if (!(weight_decay >= 0)) throw ConfigError("optimizer: weight_decay must be >= 0");
}

AdamWState AdamWState::zeros_like(const ModelParams& params) {
  AdamWState s;
  for (const auto& e : params.entries()) {
    s.m.emplace_back(e.value.numel(), Real{0});
    s.v.emplace_back(e.value.numel(), Real{0});
  }
  return s;
}

bool AdamWState::all_zero() const {
  const auto zero = [](const std::vector<Real>& a) {
    return std::all_of(a.begin(), a.end(), [](Real x) { return x == Real{0}; });
  };
  return step == 0 && std::all_of(m.begin(), m.end(), zero) && std::all_of(v.begin(), v.end(), zero);
}

void adamw_update(std::span<Real> theta, std::span<const Real> grad, std::span<Real> m, std::span<Real> v,
                  std::uint64_t t, const OptimizerConfig& cfg) {
  if (t < 1) throw ConfigError("adamw: step count must be >= 1");
  if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
    throw ShapeError("adamw: parameter, gradient and moment lengths differ (" + std::to_string(theta.size()) + ", " +
                     std::to_string(grad.size()) + ", " + std::to_string(m.size()) + ", " + std::to_string(v.size()) +
                     ")");
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const Real g = grad[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    const Real m_hat = m[i] / bc1;
    const Real v_hat = v[i] / bc2;
    theta[i] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * theta[i]);
  }
}

void adamw_step(ModelParams& params, AdamWState& state, const OptimizerConfig& cfg) {
  auto& entries = params.entries();
  if (state.m.size() != entries.size() || state.v.size() != entries.size()) {
    throw ShapeError("adamw: optimizer state has " + std::to_string(state.m.size()) + " arrays for " +
                     std::to_string(entries.size()) + " parameters");
  }
  ++state.step;
  std::vector<Real> zeros;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor& p = entries[i].value;
    std::span<const Real> g = p.grad();
    if (g.empty()) {
      zeros.assign(p.numel(), Real{0});
      g = zeros;
    }
    adamw_update(p.mutable_data(), g, state.m[i], state.v[i], state.step, cfg);
  }
}

}  // namespace afg
