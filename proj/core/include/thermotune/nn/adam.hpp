#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "thermotune/nn/autograd.hpp"

namespace thermotune::nn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam step at iteration t (t >= 1).
template <typename T>
void adam_update(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v, long t,
                 const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != m.size() || params.size() != v.size()) {
    throw ShapeMismatch("adam_update: buffer lengths differ");
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = static_cast<double>(grads[k]);
    const double mk = cfg.beta1 * static_cast<double>(m[k]) + (1.0 - cfg.beta1) * g;
    const double vk = cfg.beta2 * static_cast<double>(v[k]) + (1.0 - cfg.beta2) * g * g;
    m[k] = static_cast<T>(mk);
    v[k] = static_cast<T>(vk);
    const double step = cfg.lr * (mk / c1) / (std::sqrt(vk / c2) + cfg.eps);
    params[k] = static_cast<T>(static_cast<double>(params[k]) - step);
  }
}

template <typename T>
class Adam {
 public:
  Adam(std::vector<Var<T>> params, AdamConfig cfg = {}) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
      m_.emplace_back(p.size(), T(0));
      v_.emplace_back(p.size(), T(0));
    }
  }

  /// Applies one update using the accumulated gradients; parameters without a gradient are skipped.
  void step() {
    ++t_;
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      if (!p.has_grad()) continue;
      adam_update<T>(p.mutable_value().span(), p.grad().span(), m_[k], v_[k], t_, cfg_);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  long iterations() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  std::vector<Var<T>> params_;
  std::vector<std::vector<T>> m_, v_;
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace thermotune::nn
