#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace thermotune::agent {

/// Network sizes. Defaults follow the full-scale architecture; desk-scale runs shrink them.
struct NetworkConfig {
  int context_hidden = 256;
  int context_latent = 64;
  int lstm_hidden = 256;
  int lstm_layers = 2;
  std::vector<int> encoder_channels = {2, 8, 16, 32};
  std::vector<int> encoder_kernels = {4, 3, 3};
  std::vector<int> decoder_channels = {32, 16, 8, 2};
  std::vector<int> decoder_kernels = {2, 2, 2};
  int critic_hidden = 256;
  double dropout = 0.01;

  void validate() const;
};

struct AgentConfig {
  double gamma = 0.98;
  double lr = 3e-4;
  int critic_updates = 4;   ///< per vectorized environment step
  int actor_updates = 2;
  std::size_t batch_size = 256;
  double tau = 0.005;
  double initial_alpha = 0.1;
  bool auto_alpha = true;
  double reward_scale = 1.0;  ///< multiplies rewards before they enter the critic targets
  std::size_t replay_capacity = 50000;
  std::size_t warmup = 1000;  ///< transitions collected with uniform random actions
  std::size_t window = 128;   ///< signal window length the encoder expects
  std::uint64_t seed = 0;
  NetworkConfig net;

  void validate() const;
};

}  // namespace thermotune::agent
