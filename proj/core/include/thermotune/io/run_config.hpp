#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "thermotune/agent/config.hpp"
#include "thermotune/agent/trainer.hpp"
#include "thermotune/tsenv.hpp"

namespace thermotune::io {

inline constexpr std::string_view kConfigFormat = "thermotune-config";

struct EvaluationConfig {
  std::size_t suite_size = 50;
  double p_edge = 0.0;
  std::uint64_t seed = 1000;  ///< held-out stream, disjoint from training episode seeds
};

/// Everything a run needs. Agent defaults follow the full-scale setup.
struct RunConfig {
  std::uint64_t seed = 0;
  bool deterministic = true;  ///< single-threaded; parallel mode uses `threads` workers
  std::size_t threads = 1;
  std::string output_dir = "runs";
  std::string stats_file;  ///< relative paths resolve against the config file

  plant::PlantParams plant;
  plant::VehicleConstants vehicle;
  scenario::DriverModel driver;
  env::EnvConfig env;
  env::EpisodeSampling episode;
  agent::AgentConfig agent;
  agent::TrainConfig train;
  EvaluationConfig evaluation;

  /// Range checks on every numeric field. Throws ConfigError.
  void validate() const;

  /// Setup of the training environments; the agent window follows env.window.
  env::ThermalEnvSetup thermal_setup(const scenario::StatisticsSet& stats) const;
  agent::AgentConfig agent_config() const;
  agent::TrainConfig train_config() const;

  bool operator==(const RunConfig&) const;
};

/// Strict JSON: unknown keys and out-of-range values are rejected with ConfigError.
/// Missing keys keep their defaults.
RunConfig parse_run_config(std::string_view text, const std::string& source);
RunConfig load_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& cfg);

}  // namespace thermotune::io
