#pragma once

#include <memory>
#include <vector>

#include "thermotune/agent/config.hpp"
#include "thermotune/nn/layers.hpp"
#include "thermotune/tsenv.hpp"

namespace thermotune::agent {

using Real = float;
using Var = nn::Var<Real>;
using Tensor = nn::Tensor<Real>;

inline constexpr int kAction = static_cast<int>(env::kActionSize);
inline constexpr Real kLogStdMin = -20.0f;
inline constexpr Real kLogStdMax = 2.0f;

/// Batched network inputs.
struct ObservationBatch {
  Tensor context;  ///< [B, 3]
  Tensor window;   ///< [B, N, 4]
  Tensor image;    ///< [B, 2, 8, 8]
  Tensor mask;     ///< [B, 128], 1 where the action entry is live
  int size() const { return context.rank() ? context.dim(0) : 0; }
};

/// Shared encoder: context MLP, signal LSTM and parameter CNN, concatenated into zeta.
class Encoder : public nn::Module<Real> {
 public:
  Encoder(const AgentConfig& cfg, Rng& rng);

  Var forward(const ObservationBatch& obs, Rng& dropout_rng) const;
  int latent_size() const noexcept { return latent_; }

 private:
  double dropout_;
  std::unique_ptr<nn::Linear<Real>> ctx1_, ctx2_, ctx3_;
  std::unique_ptr<nn::LSTM<Real>> lstm_;
  std::vector<std::unique_ptr<nn::Conv2d<Real>>> convs_;
  int latent_ = 0;
};

struct PolicyHeads {
  Var mu;       ///< [B, 128]
  Var log_std;  ///< [B, 128], clamped
};

/// Decoder from zeta to the per-entry Gaussian parameters on the 2x8x8 action grid.
class PolicyDecoder : public nn::Module<Real> {
 public:
  PolicyDecoder(const AgentConfig& cfg, int latent, Rng& rng);
  PolicyHeads forward(const Var& zeta) const;

 private:
  int seed_channels_;
  std::unique_ptr<nn::Linear<Real>> project_;
  std::vector<std::unique_ptr<nn::Conv2d<Real>>> stages_;
  std::unique_ptr<nn::Conv2d<Real>> mu_head_, log_std_head_;
};

struct PolicySample {
  Var action;    ///< [B, 128], zero on masked entries
  Var log_prob;  ///< [B, 1], summed over live entries
};

/// Masked squashed-Gaussian sample: masked entries get mu = 0 and log_std = -20 and are
/// excluded from the log-likelihood. `noise` is a [B, 128] standard-normal tensor.
PolicySample masked_sample(const PolicyHeads& heads, const Tensor& mask, const Tensor& noise);

/// tanh(mu) on live entries, zero elsewhere.
Tensor masked_mean_action(const PolicyHeads& heads, const Tensor& mask);

/// Q(zeta, a): Linear -> Dropout -> LayerNorm -> ReLU, twice, then a scalar head.
class QNetwork : public nn::Module<Real> {
 public:
  QNetwork(const AgentConfig& cfg, int latent, Rng& rng);
  Var forward(const Var& zeta, const Var& action, Rng& dropout_rng) const;

 private:
  double dropout_;
  std::unique_ptr<nn::Linear<Real>> l1_, l2_, out_;
  std::unique_ptr<nn::LayerNorm<Real>> n1_, n2_;
};

}  // namespace thermotune::agent
