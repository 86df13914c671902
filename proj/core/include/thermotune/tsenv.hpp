#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "thermotune/controller.hpp"
#include "thermotune/plant.hpp"
#include "thermotune/random.hpp"
#include "thermotune/scenario.hpp"

namespace thermotune::env {

inline constexpr std::size_t kImageSize = 8;
inline constexpr std::size_t kChannels = 2;  // P and I table of the active bank
inline constexpr std::size_t kImageCells = kImageSize * kImageSize;
inline constexpr std::size_t kActionSize = kChannels * kImageCells;
inline constexpr std::size_t kTableCells = control::kTableSize * control::kTableSize;
inline constexpr std::size_t kSignalChannels = 4;  // T_D, e_T, dT_amb, u_vlv
inline constexpr std::size_t kContextSize = 3;     // one-hot xi_th (2), normalized T_D_ref

/// Affine signal normalization: (x - offset) / scale maps the stated range onto [-1, 1].
/// T_D in [0, 100] degC, e_T in [-20, 20] K, dT_amb in [-20, 100] K, u_vlv in [0, 1].
struct SignalScaling {
  static constexpr std::array<double, kSignalChannels> offset = {50.0, 0.0, 40.0, 0.5};
  static constexpr std::array<double, kSignalChannels> scale = {50.0, 20.0, 60.0, 0.5};
  static constexpr double setpoint_offset = 50.0;
  static constexpr double setpoint_scale = 50.0;
};

/// Row-major channel x row x column image of the upsampled gain tables.
using ParameterImage = std::array<double, kActionSize>;
/// Same layout as ParameterImage; entries in (-1, 1).
using ActionTensor = std::array<double, kActionSize>;

/// Binary masks over the 5x5 tables, one per channel (P, I).
struct ActionMask {
  std::array<std::array<std::uint8_t, kTableCells>, kChannels> cells{};

  std::uint8_t& at(std::size_t c, std::size_t i, std::size_t j) {
    return cells[c][i * control::kTableSize + j];
  }
  std::uint8_t at(std::size_t c, std::size_t i, std::size_t j) const {
    return cells[c][i * control::kTableSize + j];
  }
  std::size_t count() const;
  static ActionMask all(std::uint8_t value);
  bool operator==(const ActionMask&) const = default;
};

struct ContextVector {
  std::array<double, 2> xi_th_one_hot{1.0, 0.0};
  double setpoint = 0.0;  ///< normalized T_D_ref
};

struct SignalWindow {
  std::size_t samples = 0;
  std::vector<double> raw;         ///< samples x 4, physical units
  std::vector<double> normalized;  ///< samples x 4

  double raw_at(std::size_t n, std::size_t channel) const { return raw[n * kSignalChannels + channel]; }
};

struct Observation {
  ContextVector context;
  ParameterImage image{};
  SignalWindow window;
};

struct RewardConfig {
  double b1 = 25.0;
  double b2 = 0.1;
  double r_min = -100.0;
};

/// Closed-loop simulation and thermal-management rule settings.
struct EnvConfig {
  double nominal_setpoint = 50.0;   ///< degC, ConfigA
  double warmup_setpoint = 60.0;    ///< degC, ConfigB
  double warmup_threshold = 40.0;   ///< degC on T_U1, switch to ConfigB below
  double warmup_hysteresis = 2.0;   ///< K above threshold before returning to ConfigA
  double initial_temperature = 50.0;
  double u_pmp = 0.6;
  double u_fan = 0.5;
  double u_shu = 1.0;
  int xi_el = 0;
  std::size_t window = 128;
  double step_fraction = 0.1;  ///< max parameter change per step relative to the clip limit
  RewardConfig reward;
  control::GainLimits limits;
  control::ControllerOptions controller;

  void validate() const;
};

/// Bilinear resampling of a rows x cols grid onto out_rows x out_cols with aligned corners.
std::vector<double> resample_bilinear(std::span<const double> src, std::size_t rows,
                                      std::size_t cols, std::size_t out_rows,
                                      std::size_t out_cols);

ParameterImage upsample_tables(const control::ParameterSet& ps, std::size_t bank,
                               const control::GainLimits& limits);

/// Resamples each channel back to 5x5 and scales it by the per-channel max step.
std::array<std::array<double, kTableCells>, kChannels> downsample_action(
    const ActionTensor& delta, const control::GainLimits& limits, double step_fraction);

/// Marks the four corner entries of every visited table cell. Throws EmptyTrajectory.
ActionMask build_mask(std::span<const std::array<double, 2>> trajectory,
                      const control::Axis& axis_i, const control::Axis& axis_j);

/// Expands a 5x5 mask to the 8x8 action grid: an entry stays active when any table
/// node it contributes to under downsampling is active.
std::array<std::uint8_t, kActionSize> action_grid_mask(const ActionMask& mask);

control::ParameterSet apply_action(const control::ParameterSet& ps, std::size_t bank,
                                   const ActionTensor& delta, const ActionMask& mask,
                                   const control::GainLimits& limits, double step_fraction);

/// Clipped quadratic-plus-root tracking cost; throws NonFiniteSignal.
double compute_reward(std::span<const double> e_t, std::span<const double> u_vlv,
                      const RewardConfig& cfg);

struct Trajectory {
  double dt = 0.0;
  std::vector<double> time, t_d, t_d_ref, e_t, u_vlv, speed, dt_amb, t_u1, t_u2;
  std::vector<std::uint8_t> bank;
  std::vector<double> e_ctrl;  ///< error as seen by the active controller bank

  std::size_t size() const { return time.size(); }
};

struct EvalResult {
  Observation observation;
  ActionMask mask;
  Trajectory trajectory;
  std::size_t bank = 0;  ///< bank active for most samples
  bool failed = false;
  std::string failure;
};

/// Resamples a trajectory to `samples` points by chunk averaging.
SignalWindow make_window(const Trajectory& traj, std::size_t samples);

/// Runs the scenario in closed loop with the given parameter set.
EvalResult eval_scenario(const scenario::Scenario& sc, const plant::PlantParams& theta,
                         const control::ParameterSet& ps, const EnvConfig& cfg);

/// Reward of an evaluation at simulation rate; r_min when the simulation failed.
double evaluation_reward(const EvalResult& result, const EnvConfig& cfg);

struct StepOutcome {
  Observation observation;
  ActionMask mask;
  std::size_t bank = 0;
  double reward = 0.0;
  bool failed = false;
};

/// Parameter-tuning environment consumed by the agent.
class TuningEnvironment {
 public:
  virtual ~TuningEnvironment() = default;
  virtual StepOutcome reset(std::uint64_t episode_seed) = 0;
  virtual StepOutcome step(const ActionTensor& action) = 0;
  virtual const control::ParameterSet& parameters() const = 0;
};

/// Per-episode draws of plant variant, initial parameters and scenario batch.
struct EpisodeSampling {
  std::size_t scenario_batch = 8;
  double p_edge = 0.05;
  double theta_jitter = 0.1;   ///< relative uniform jitter on capacities and gains
  double init_jitter = 0.2;    ///< relative uniform jitter on the conservative set
  double conservative_p = 0.05;
  double conservative_i = 0.001;
  control::Axis axis_error = control::kErrorAxis;
  control::Axis axis_ambient = control::kAmbientAxis;

  control::ParameterSet conservative() const {
    auto ps = control::ParameterSet::constant(conservative_p, conservative_i);
    for (auto& b : ps.banks) {
      for (auto* t : {&b.p, &b.i}) t->axis_i = axis_error, t->axis_j = axis_ambient;
    }
    return ps;
  }
};

struct ThermalEnvSetup {
  scenario::StatisticsSet stats;
  std::vector<scenario::Scenario> edge_cases;
  plant::PlantParams plant;
  plant::VehicleConstants vehicle;
  scenario::DriverModel driver;
  EnvConfig env;
  EpisodeSampling episode;
};

plant::PlantParams jitter_plant(const plant::PlantParams& base, double jitter, Rng& rng);

class ThermalTuningEnv final : public TuningEnvironment {
 public:
  explicit ThermalTuningEnv(ThermalEnvSetup setup);

  StepOutcome reset(std::uint64_t episode_seed) override;
  StepOutcome step(const ActionTensor& action) override;
  const control::ParameterSet& parameters() const override { return params_; }

  const plant::PlantParams& plant_variant() const { return theta_; }
  const EvalResult& last_evaluation() const { return last_; }

 private:
  StepOutcome evaluate_next();

  ThermalEnvSetup setup_;
  Rng rng_;
  plant::PlantParams theta_;
  control::ParameterSet params_;
  std::vector<scenario::Scenario> batch_;
  EvalResult last_;
};

}  // namespace thermotune::env
