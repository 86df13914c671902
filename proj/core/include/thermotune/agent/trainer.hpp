#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "thermotune/agent/sac.hpp"

namespace thermotune::agent {

struct TrainConfig {
  std::size_t envs = 32;
  std::size_t steps_per_episode = 125;  ///< K
  std::size_t episodes = 100;
  std::size_t max_total_steps = 0;  ///< environment steps over all envs; 0 = no cap
  std::size_t threads = 1;          ///< environment workers; 1 = strictly sequential
  std::uint64_t seed = 0;
  bool frozen_baseline = false;     ///< also replay the initial parameters with zero actions
  double best_window = 0.5;         ///< best calibration is taken from this trailing share of episodes
  bool record_parameters = false;   ///< keep every env's parameters at the end of every episode

  void validate() const;
};

struct EpisodeLogRow {
  std::size_t episode = 0;
  std::size_t steps = 0;  ///< cumulative environment steps after this episode
  double reward_mean = 0.0;
  double reward_std = 0.0;
  double alpha = 0.0;
  double critic_loss = std::numeric_limits<double>::quiet_NaN();
  double actor_loss = std::numeric_limits<double>::quiet_NaN();
  double baseline_mean = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  std::vector<EpisodeLogRow> log;
  control::ParameterSet best;
  double best_reward = -std::numeric_limits<double>::infinity();  ///< mean step reward of that episode
  std::size_t best_episode = 0;  ///< 1-based
  std::size_t best_env = 0;
  std::vector<control::ParameterSet> final_parameters;  ///< per env, after the last episode
  std::vector<std::vector<control::ParameterSet>> episode_parameters;  ///< [episode][env] if recorded
};

using EnvFactory = std::function<std::unique_ptr<env::TuningEnvironment>(std::size_t env_id)>;
using EpisodeCallback = std::function<void(const EpisodeLogRow&)>;

/// Seed of episode `episode` in environment `env_id`; shared by the learner and the frozen replay.
std::uint64_t episode_seed(std::uint64_t seed, std::size_t env_id, std::size_t episode);

/// Episode reward = mean step reward over the episode.
TrainResult train(Agent& agent, const EnvFactory& make_env, const TrainConfig& cfg,
                  const EpisodeCallback& on_episode = {});

/// Rolling mean with a trailing window (shorter at the start).
std::vector<double> rolling_mean(const std::vector<double>& values, std::size_t window);

}  // namespace thermotune::agent
