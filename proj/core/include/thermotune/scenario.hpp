#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "thermotune/plant.hpp"

namespace thermotune::scenario {

/// Scenario layer variables fitted from usage data.
enum class Variable : std::size_t {
  MeanSpeed = 0,     ///< m/s, layer 2
  SpeedVariance,     ///< (m/s)^2, layer 2
  MeanGrade,         ///< rad, layer 1
  Duration,          ///< s, layer 2
  Ambient,           ///< degC, layer 5
  Humidity,          ///< %, layer 5
};
inline constexpr std::size_t kVariableCount = 6;
inline constexpr std::array<Variable, kVariableCount> kVariables = {
    Variable::MeanSpeed, Variable::SpeedVariance, Variable::MeanGrade,
    Variable::Duration,  Variable::Ambient,       Variable::Humidity};

std::string_view name(Variable v) noexcept;
int layer(Variable v) noexcept;
std::optional<Variable> variable_from_name(std::string_view name) noexcept;

/// One value per layer variable.
struct LayerValues {
  std::array<double, kVariableCount> values{};

  double& operator[](Variable v) { return values[static_cast<std::size_t>(v)]; }
  double operator[](Variable v) const { return values[static_cast<std::size_t>(v)]; }
  bool operator==(const LayerValues&) const = default;
};

struct UsageDataset {
  std::vector<LayerValues> records;  ///< one per trip
  std::string provenance;

  void validate() const;
};

/// Standard-normal 90% quantile; clip bounds sit at mu -/+ this many sigmas.
double upper_quantile_z() noexcept;

struct LayerStatistics {
  Variable variable = Variable::MeanSpeed;
  double mu = 0.0;
  double sigma = 0.0;
  double clip_lo = 0.0;
  double clip_hi = 0.0;
};

using StatisticsSet = std::array<LayerStatistics, kVariableCount>;

/// Per-variable normal fit (n-1 divisor) with 10%/90% quantile clip bounds.
/// Throws InsufficientData with fewer than two records.
StatisticsSet fit_layer_statistics(const UsageDataset& data);

/// Concatenates datasets; provenance tags are joined with '+'.
UsageDataset merge(const std::vector<UsageDataset>& parts);

struct Scenario {
  std::string id;
  LayerValues layers;
  bool is_edge_case = false;
  std::uint64_t seed = 0;

  // Synthesized series at the plant step.
  double dt = 0.0;
  std::vector<double> target_speed;  ///< m/s
  std::vector<double> speed;         ///< m/s
  std::vector<double> grade;         ///< rad
  std::vector<double> power;         ///< W, P_ED

  double ambient() const { return layers[Variable::Ambient]; }
  double duration() const { return layers[Variable::Duration]; }
  bool synthesized() const { return !speed.empty(); }
};

/// Edge cases shipped by default: desert heat at sustained speed and sub-polar high load.
std::vector<Scenario> default_edge_cases();

/// Draws a scenario: an edge case with probability `p_edge`, else per-variable normal
/// draws rejected until inside the clip bounds. Deterministic in `seed`.
Scenario sample_scenario(const StatisticsSet& stats, const std::vector<Scenario>& edge_cases,
                         double p_edge, std::uint64_t seed);

struct DriverModel {
  double gain = 0.5;        ///< 1/s, proportional speed tracking
  double a_min = -3.0;      ///< m/s^2
  double a_max = 2.0;       ///< m/s^2
  double v_max = 45.0;      ///< m/s, cap on target levels
  double segment_min = 40.0;  ///< s
  double segment_max = 120.0; ///< s
  double grade_knot_spacing = 60.0;  ///< s
  double grade_spread = 0.01;        ///< rad, std of knot deviation around the mean grade
};

/// Proportional driver with acceleration limits; returns v(t), v >= 0.
std::vector<double> simulate_driver(const std::vector<double>& target, double v0,
                                    const DriverModel& driver, double dt);

/// Traction power series for the given speed and grade series.
std::vector<double> traction_power(const std::vector<double>& speed,
                                   const std::vector<double>& grade,
                                   const plant::VehicleConstants& veh, double dt);

/// Fills target speed, speed, grade and power at step `dt`, deterministic in the scenario seed.
Scenario synthesize_drive(Scenario sc, const plant::VehicleConstants& veh,
                          const DriverModel& driver, double dt);

}  // namespace thermotune::scenario
