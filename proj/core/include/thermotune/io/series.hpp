#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "thermotune/agent/trainer.hpp"
#include "thermotune/tsenv.hpp"

namespace thermotune::io {

inline constexpr std::string_view kTrainingLogFormat = "thermotune-training-log";

/// Tab-separated, one row per episode, preceded by a version comment and a header.
std::string format_training_log(const std::vector<agent::EpisodeLogRow>& rows);
std::vector<agent::EpisodeLogRow> parse_training_log(std::string_view text, const std::string& source);

struct RewardCurve {
  std::vector<double> episode, reward, rolling_mean, band_lo, band_hi, baseline;
};

/// Trailing-window mean and population standard deviation; the band is mean -/+ one sigma.
RewardCurve reward_curve(const std::vector<agent::EpisodeLogRow>& rows, std::size_t window = 15);
std::string format_reward_curve(const RewardCurve& curve);

struct SignalTraces {
  std::string scenario_id;
  std::vector<double> time, e_t, u_vlv, speed, dt_amb;
};

SignalTraces parse_trajectory(std::string_view text, const std::string& source);
/// Plot-ready columns of the four signal families against time.
std::string format_signal_traces(const SignalTraces& traces);

}  // namespace thermotune::io
