#pragma once

#include <filesystem>
#include <functional>
#include <memory>

#include "thermotune/agent/replay.hpp"
#include "thermotune/nn/adam.hpp"

namespace thermotune::agent {

/// Q(zeta, action) -> [B, 1]; lets tests substitute a fixed critic in actor updates.
using QFunction = std::function<Var(const Var& zeta, const Var& action)>;

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
};

/// Masked encoder-decoder actor with twin dropout/layer-norm critics.
/// The shared encoder is trained through the critic loss; the actor sees a detached latent.
class Agent {
 public:
  explicit Agent(AgentConfig cfg);

  const AgentConfig& config() const noexcept { return cfg_; }

  /// Stochastic: squashed-Gaussian sample drawn from `rng`. Deterministic: tanh(mu).
  env::ActionTensor act(const PackedObservation& obs, bool stochastic, Rng& rng) const;
  env::ActionTensor act(const PackedObservation& obs, bool stochastic) { return act(obs, stochastic, rng_); }
  std::vector<env::ActionTensor> act(const std::vector<const PackedObservation*>& obs, bool stochastic);

  /// Uniform (-1, 1) on live entries, zero elsewhere.
  env::ActionTensor random_action(const GridMask& mask);

  double critic_update(const Batch& batch);
  double actor_update(const Batch& batch, const QFunction& q = {});

  /// Runs the configured critic and actor updates on fresh batches from `buffer`.
  UpdateStats update(const ReplayBuffer& buffer);

  double alpha() const;
  void set_alpha(double alpha);

  PolicyHeads policy(const ObservationBatch& obs);

  Encoder& encoder() { return *encoder_; }
  PolicyDecoder& decoder() { return *decoder_; }
  QNetwork& critic(int k) { return k == 0 ? *q1_ : *q2_; }
  QNetwork& target_critic(int k) { return k == 0 ? *q1_target_ : *q2_target_; }
  Rng& rng() { return rng_; }

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  Tensor standard_normal(const nn::Shape& shape);
  void set_training(bool on);

  AgentConfig cfg_;
  Rng rng_;
  mutable Rng dropout_rng_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<PolicyDecoder> decoder_;
  std::unique_ptr<QNetwork> q1_, q2_, q1_target_, q2_target_;
  Var log_alpha_;
  std::unique_ptr<nn::Adam<Real>> actor_opt_, critic_opt_, alpha_opt_;
};

}  // namespace thermotune::agent
