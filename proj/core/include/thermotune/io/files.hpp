#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "thermotune/controller.hpp"
#include "thermotune/error.hpp"
#include "thermotune/scenario.hpp"
#include "thermotune/tsenv.hpp"

namespace thermotune::io {

inline constexpr std::string_view kUsageFormat = "thermotune-usage";
inline constexpr std::string_view kStatsFormat = "thermotune-stats";
inline constexpr std::string_view kSuiteFormat = "thermotune-suite";
inline constexpr std::string_view kCalibrationFormat = "thermotune-calibration";
inline constexpr std::string_view kTrajectoryFormat = "thermotune-trajectory";
inline constexpr int kFormatVersion = 1;

/// Calibration text with a gain count other than 100.
class CardinalityError : public ParseError {
 public:
  using ParseError::ParseError;
};

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames it into place.
void write_text(const std::filesystem::path& path, std::string_view text);

scenario::UsageDataset parse_usage(std::string_view text, const std::string& source);
scenario::UsageDataset load_usage(const std::filesystem::path& path);

std::string format_statistics(const scenario::StatisticsSet& stats, const std::string& provenance);
scenario::StatisticsSet parse_statistics(std::string_view text, const std::string& source);
scenario::StatisticsSet load_statistics(const std::filesystem::path& path);

/// Scenario suites store the layer draws; callers synthesize the series.
std::string format_suite(const std::vector<scenario::Scenario>& suite);
std::vector<scenario::Scenario> parse_suite(std::string_view text, const std::string& source);
std::vector<scenario::Scenario> load_suite(const std::filesystem::path& path);

/// Line-oriented calibration text:
///
///   format thermotune-calibration 1
///   limits <p_max> <i_max>
///   bank <0|1>
///   table <P|I> unit <unit>
///   axis_error K <5 values>
///   axis_ambient K <5 values>
///   row <5 values>            (five rows, along the error axis)
///   ...
///   end
///
/// '#' starts a comment. Both banks and both tables are required.
struct Calibration {
  control::ParameterSet params;
  control::GainLimits limits;
};

std::string format_calibration(const Calibration& cal);
Calibration parse_calibration(std::string_view text, const std::string& source);
Calibration load_calibration(const std::filesystem::path& path);

/// Columnar dump of e_T, u_vlv, v and dT_amb against time.
std::string format_trajectory(const env::Trajectory& traj, const std::string& scenario_id);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace thermotune::io
