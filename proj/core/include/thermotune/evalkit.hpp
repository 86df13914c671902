#pragma once

#include <span>
#include <string>
#include <vector>

#include "thermotune/controller.hpp"
#include "thermotune/scenario.hpp"
#include "thermotune/tsenv.hpp"

namespace thermotune::eval {

struct MetricReport {
  double mae = 0.0;      ///< K
  double rmse = 0.0;     ///< K
  double ms_udot = 0.0;  ///< (1/s)^2, mean square of the valve command rate
  double mtv_y = 0.0;    ///< K per sample, mean total variation of T_D
  std::string scenario_id;
  std::string label;
  bool failed = false;
};

/// Control-quality metrics of one trajectory sampled at `dt`. Throws TooShort below 2 samples.
MetricReport metrics(std::span<const double> e_t, std::span<const double> u_vlv,
                     std::span<const double> t_d, double dt);

struct LabeledSet {
  std::string label;
  control::ParameterSet params;
};

inline constexpr std::size_t kMetricCount = 4;
inline constexpr std::array<const char*, kMetricCount> kMetricNames = {"MAE", "RMSE", "MS_udot",
                                                                       "MTV_y"};

struct ComparisonRow {
  MetricReport report;
  double reward = 0.0;
  std::array<bool, kMetricCount> best{};  ///< lowest score within the scenario
};

struct ComparisonTable {
  std::vector<std::string> labels;
  std::vector<std::string> scenarios;
  std::vector<ComparisonRow> rows;  ///< scenario-major, one row per (scenario, set)

  const ComparisonRow& at(std::size_t scenario, std::size_t set) const {
    return rows[scenario * labels.size() + set];
  }
};

/// Simulates every (set, scenario) pair; best flags are only assigned with two or more sets.
/// Failed simulations are reported with infinite metrics and never flagged best.
ComparisonTable compare(const std::vector<LabeledSet>& sets,
                        const std::vector<scenario::Scenario>& suite,
                        const plant::PlantParams& theta, const env::EnvConfig& cfg,
                        unsigned threads = 1);

/// Tab-separated table: scenario, label, metrics, reward and, for two or more sets, best-flags.
std::string format_table(const ComparisonTable& table);

}  // namespace thermotune::eval
