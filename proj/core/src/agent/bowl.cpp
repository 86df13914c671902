#include "thermotune/agent/bowl.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "thermotune/error.hpp"

namespace thermotune::agent {

QuadraticBowlEnv::QuadraticBowlEnv(control::ParameterSet target, control::ParameterSet initial,
                                   std::size_t window, control::GainLimits limits,
                                   double step_fraction, double start_spread)
    : target_(target), initial_(initial), params_(initial), window_(window), limits_(limits),
      step_fraction_(step_fraction), start_spread_(start_spread) {
  if (window_ < 1) throw ConfigError("bowl window must be >= 1");
  if (!(start_spread_ >= 0.0 && start_spread_ <= 1.0)) {
    throw ConfigError("bowl start_spread must lie in [0,1]");
  }
}

control::ParameterSet QuadraticBowlEnv::default_target(const control::GainLimits& limits) {
  auto ps = control::ParameterSet::constant(0.0, 0.0);
  for (auto& bank : ps.banks) {
    for (std::size_t i = 0; i < control::kTableSize; ++i) {
      for (std::size_t j = 0; j < control::kTableSize; ++j) {
        const double s = static_cast<double>(i + j) / 8.0;
        bank.p.at(i, j) = limits.p_max * (0.4 + 0.3 * s);
        bank.i.at(i, j) = limits.i_max * (0.6 - 0.3 * s);
      }
    }
  }
  return ps;
}

double QuadraticBowlEnv::distance(const control::ParameterSet& ps) const {
  double d2 = 0.0;
  for (std::size_t k = 0; k < env::kTableCells; ++k) {
    const double dp = (ps.banks[0].p.values[k] - target_.banks[0].p.values[k]) / limits_.p_max;
    const double di = (ps.banks[0].i.values[k] - target_.banks[0].i.values[k]) / limits_.i_max;
    d2 += dp * dp + di * di;
  }
  return std::sqrt(d2);
}

env::StepOutcome QuadraticBowlEnv::reset(std::uint64_t episode_seed) {
  params_ = initial_;
  if (start_spread_ > 0.0) {
    Rng rng(episode_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto kind : {control::TableKind::P, control::TableKind::I}) {
      const double hi = limits_.max(kind);
      for (double& v : params_.banks[0].table(kind).values) {
        v += start_spread_ * (hi * unit(rng) - v);
      }
    }
  }
  return observe();
}

env::StepOutcome QuadraticBowlEnv::step(const env::ActionTensor& action) {
  params_ = env::apply_action(params_, 0, action, env::ActionMask::all(1), limits_, step_fraction_);
  return observe();
}

env::StepOutcome QuadraticBowlEnv::observe() const {
  env::StepOutcome out;
  out.observation.image = env::upsample_tables(params_, 0, limits_);
  out.observation.window.samples = window_;
  out.observation.window.raw.assign(window_ * env::kSignalChannels, 0.0);
  out.observation.window.normalized.assign(window_ * env::kSignalChannels, 0.0);
  // The distance plays the role of the tracking error channel.
  const double d = distance();
  for (std::size_t n = 0; n < window_; ++n) {
    out.observation.window.raw[n * env::kSignalChannels + 1] = d;
    out.observation.window.normalized[n * env::kSignalChannels + 1] = d;
  }
  out.mask = env::ActionMask::all(1);
  out.bank = 0;
  out.reward = -d * d;
  return out;
}

BowlRun run_bowl_sanity(std::uint64_t seed, std::size_t episodes) {
  constexpr std::size_t kWindow = 4;
  AgentConfig a;
  a.seed = seed;
  a.window = kWindow;
  a.gamma = 0.9;
  a.lr = 1e-3;
  a.tau = 0.02;
  a.initial_alpha = 0.005;
  a.batch_size = 64;
  a.warmup = 200;
  a.replay_capacity = 20000;
  a.net.context_hidden = 32;
  a.net.context_latent = 16;
  a.net.lstm_hidden = 8;
  a.net.lstm_layers = 1;
  a.net.critic_hidden = 64;
  Agent agent(a);

  TrainConfig t;
  t.envs = 4;
  t.steps_per_episode = 6;
  t.episodes = episodes;
  t.seed = seed;
  t.record_parameters = true;

  const control::GainLimits lim;
  const auto target = QuadraticBowlEnv::default_target(lim);
  const auto init = control::ParameterSet::constant(0.05, 0.001);
  auto res = train(agent, [&](std::size_t) {
    return std::make_unique<QuadraticBowlEnv>(target, init, kWindow, lim, 0.1);
  }, t);

  const QuadraticBowlEnv probe(target, init, kWindow, lim);
  const auto mean_distance = [&](const std::vector<control::ParameterSet>& sets) {
    double d = 0.0;
    for (const auto& p : sets) d += probe.distance(p);
    return d / static_cast<double>(sets.size());
  };
  BowlRun out;
  const std::size_t n = res.episode_parameters.size(), decile = std::max<std::size_t>(n / 10, 1);
  out.first_episode_distance = mean_distance(res.episode_parameters.front());
  for (std::size_t e = n - decile; e < n; ++e) out.final_decile_distance += mean_distance(res.episode_parameters[e]);
  out.final_decile_distance /= static_cast<double>(decile);
  out.log = std::move(res.log);
  return out;
}

}  // namespace thermotune::agent
