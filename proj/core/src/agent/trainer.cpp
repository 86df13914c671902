#include "thermotune/agent/trainer.hpp"

#include <cmath>
#include <numeric>
#include <thread>

namespace thermotune::agent {
namespace {

template <typename F>
void for_each_env(std::size_t count, std::size_t threads, F&& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t e = 0; e < count; ++e) body(e);
    return;
  }
  const std::size_t workers = std::min(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t e = w; e < count; e += workers) body(e);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

void TrainConfig::validate() const {
  if (envs < 1) throw ConfigError("envs must be >= 1");
  if (steps_per_episode < 1) throw ConfigError("steps_per_episode must be >= 1");
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (!(best_window > 0.0 && best_window <= 1.0)) throw ConfigError("best_window must be in (0, 1]");
}

std::uint64_t episode_seed(std::uint64_t seed, std::size_t env_id, std::size_t episode) {
  return derive_seed(seed, 0x65706973ULL, env_id, episode);
}

TrainResult train(Agent& agent, const EnvFactory& make_env, const TrainConfig& cfg,
                  const EpisodeCallback& on_episode) {
  cfg.validate();
  const auto& acfg = agent.config();
  const std::size_t n_env = cfg.envs;

  std::vector<std::unique_ptr<env::TuningEnvironment>> envs, frozen;
  for (std::size_t e = 0; e < n_env; ++e) {
    envs.push_back(make_env(e));
    if (cfg.frozen_baseline) frozen.push_back(make_env(e));
  }

  ReplayBuffer buffer(acfg.replay_capacity);
  const std::size_t learn_after = std::max(acfg.warmup, acfg.batch_size);
  std::size_t planned = cfg.episodes;
  if (cfg.max_total_steps > 0) {
    const std::size_t per_episode = n_env * cfg.steps_per_episode;
    planned = std::min(planned, (cfg.max_total_steps + per_episode - 1) / per_episode);
  }
  const std::size_t first_best =
      static_cast<std::size_t>(std::floor(static_cast<double>(planned) * (1.0 - cfg.best_window)));

  TrainResult result;
  std::size_t total_steps = 0;
  std::vector<env::StepOutcome> outcomes(n_env);
  std::vector<PackedObservation> current(n_env);
  std::vector<double> episode_sum(n_env), frozen_sum(n_env);
  std::vector<env::ActionTensor> actions(n_env);
  const env::ActionTensor zero_action{};

  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    for_each_env(n_env, cfg.threads, [&](std::size_t e) {
      const auto seed = episode_seed(cfg.seed, e, ep);
      outcomes[e] = envs[e]->reset(seed);
      if (cfg.frozen_baseline) frozen[e]->reset(seed);
    });
    for (std::size_t e = 0; e < n_env; ++e) {
      current[e] = pack(outcomes[e].observation, outcomes[e].mask, acfg.window);
      episode_sum[e] = 0.0;
      frozen_sum[e] = 0.0;
    }

    double critic_loss = 0.0, actor_loss = 0.0;
    std::size_t updates = 0;
    for (std::size_t k = 0; k < cfg.steps_per_episode; ++k) {
      if (buffer.size() < acfg.warmup) {
        for (std::size_t e = 0; e < n_env; ++e) actions[e] = agent.random_action(current[e].mask);
      } else {
        std::vector<const PackedObservation*> ptrs;
        for (const auto& c : current) ptrs.push_back(&c);
        actions = agent.act(ptrs, true);
      }
      for_each_env(n_env, cfg.threads, [&](std::size_t e) {
        outcomes[e] = envs[e]->step(actions[e]);
        if (cfg.frozen_baseline) frozen_sum[e] += frozen[e]->step(zero_action).reward;
      });
      for (std::size_t e = 0; e < n_env; ++e) {
        Transition t;
        t.obs = current[e];
        t.action = actions[e];
        t.reward = outcomes[e].reward;
        t.next = pack(outcomes[e].observation, outcomes[e].mask, acfg.window);
        current[e] = t.next;
        episode_sum[e] += t.reward;
        buffer.push(std::move(t));
      }
      total_steps += n_env;
      if (buffer.size() >= learn_after) {
        const auto s = agent.update(buffer);
        critic_loss += s.critic_loss;
        actor_loss += s.actor_loss;
        ++updates;
      }
    }

    const double steps = static_cast<double>(cfg.steps_per_episode);
    EpisodeLogRow row;
    row.episode = ep + 1;
    row.steps = total_steps;
    std::vector<double> rewards(n_env);
    for (std::size_t e = 0; e < n_env; ++e) rewards[e] = episode_sum[e] / steps;
    row.reward_mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(n_env);
    double var = 0.0;
    for (double r : rewards) var += (r - row.reward_mean) * (r - row.reward_mean);
    row.reward_std = std::sqrt(var / static_cast<double>(n_env));
    row.alpha = agent.alpha();
    if (updates > 0) {
      row.critic_loss = critic_loss / static_cast<double>(updates);
      row.actor_loss = actor_loss / static_cast<double>(updates);
    }
    if (cfg.frozen_baseline) {
      row.baseline_mean = std::accumulate(frozen_sum.begin(), frozen_sum.end(), 0.0) / (steps * n_env);
    }
    if (ep >= first_best) {
      for (std::size_t e = 0; e < n_env; ++e) {
        if (rewards[e] > result.best_reward) {
          result.best_reward = rewards[e];
          result.best = envs[e]->parameters();
          result.best_episode = ep + 1;
          result.best_env = e;
        }
      }
    }
    if (cfg.record_parameters) {
      std::vector<control::ParameterSet> snapshot;
      for (const auto& e : envs) snapshot.push_back(e->parameters());
      result.episode_parameters.push_back(std::move(snapshot));
    }
    result.log.push_back(row);
    if (on_episode) on_episode(row);
    if (cfg.max_total_steps > 0 && total_steps >= cfg.max_total_steps) break;
  }

  if (result.best_episode == 0) {
    for (std::size_t e = 0; e < n_env; ++e) {
      const double mean = episode_sum[e] / static_cast<double>(cfg.steps_per_episode);
      if (mean > result.best_reward) {
        result.best_reward = mean;
        result.best = envs[e]->parameters();
        result.best_episode = result.log.size();
        result.best_env = e;
      }
    }
  }
  for (const auto& e : envs) result.final_parameters.push_back(e->parameters());
  return result;
}

std::vector<double> rolling_mean(const std::vector<double>& values, std::size_t window) {
  if (window == 0) throw ConfigError("rolling window must be >= 1");
  std::vector<double> out(values.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    acc += values[k];
    if (k >= window) acc -= values[k - window];
    out[k] = acc / static_cast<double>(std::min(k + 1, window));
  }
  return out;
}

}  // namespace thermotune::agent
