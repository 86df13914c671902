#pragma once

#include "thermotune/agent/trainer.hpp"
#include "thermotune/tsenv.hpp"

namespace thermotune::agent {

/// Tuning environment with a known optimum: reward -||phi - phi*||^2 over bank 0,
/// each gain normalized by its clip limit. Every table entry is always live and the
/// window's error channel carries the current distance.
/// With start_spread > 0 each episode starts from initial + spread * (U(0, phi_max) - initial).
class QuadraticBowlEnv final : public env::TuningEnvironment {
 public:
  QuadraticBowlEnv(control::ParameterSet target, control::ParameterSet initial, std::size_t window,
                   control::GainLimits limits = {}, double step_fraction = 0.1,
                   double start_spread = 0.0);

  env::StepOutcome reset(std::uint64_t episode_seed) override;
  env::StepOutcome step(const env::ActionTensor& action) override;
  const control::ParameterSet& parameters() const override { return params_; }

  double distance() const { return distance(params_); }
  double distance(const control::ParameterSet& ps) const;

  /// Smooth interior target used by the sanity runs.
  static control::ParameterSet default_target(const control::GainLimits& limits);

 private:
  env::StepOutcome observe() const;

  control::ParameterSet target_, initial_, params_;
  std::size_t window_;
  control::GainLimits limits_;
  double step_fraction_;
  double start_spread_;
};

struct BowlRun {
  double first_episode_distance = 0.0;  ///< mean over envs of the final-step distance, episode 1
  double final_decile_distance = 0.0;   ///< same, averaged over the last 10% of episodes
  std::vector<EpisodeLogRow> log;
};

/// Desk-scale sanity run on the bowl: 4 envs, K = 6, 300 episodes, small networks.
BowlRun run_bowl_sanity(std::uint64_t seed, std::size_t episodes = 300);

}  // namespace thermotune::agent
