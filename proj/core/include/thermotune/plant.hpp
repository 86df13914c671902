#pragma once

#include <cstddef>
#include <vector>

namespace thermotune::plant {

/// Port configuration of the four-way mixing valve.
/// ConfigA routes ports {1,2,3}, ConfigB routes {1,3,4}; the latter swaps the mixed streams.
enum class ThermalConfig { A, B };

constexpr ThermalConfig toggled(ThermalConfig c) noexcept {
  return c == ThermalConfig::A ? ThermalConfig::B : ThermalConfig::A;
}

/// Reference coolant-circuit parameters. Units are noted per field.
struct PlantParams {
  double k_hyd = 0.5;        ///< L/s per unit pump command
  double c_1 = 60.0e3;       ///< J/K, drive jacket and coolant (upstream 1)
  double c_2 = 20.0e3;       ///< J/K, radiator (upstream 2)
  double c_mix = 3.6e3;      ///< J/K, mixing volume
  double rho_cp = 3.6e3;     ///< J/(L K), coolant volumetric heat capacity
  double k_he0 = 1500.0;     ///< W/K, saturated heat-exchanger conductance
  double vair_ref = 500.0;   ///< L/s, air-flow scale of exchanger saturation
  double c_fan = 800.0;      ///< L/s per unit fan command
  double c_shu = 30.0;       ///< L/s per (unit shutter * m/s)
  std::vector<double> eta_el = {0.92, 0.88};  ///< drive efficiency per electrical state
  double k_drag = 20.0;      ///< W per m/s, speed-proportional parasitic heat
  double pipe_vol_1 = 1.5;   ///< L, radiator return to mixer (carries T_U2)
  double pipe_vol_2 = 2.0;   ///< L, drive outlet header (carries T_U1)
  double min_flow = 0.01;    ///< L/s, floor used for delay computation
  double dt = 0.1;           ///< s

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

struct ActuatorCommand {
  double u_vlv = 0.0;
  double u_pmp = 0.0;
  double u_fan = 0.0;
  double u_shu = 0.0;

  ActuatorCommand clamped() const noexcept;
};

struct ExogenousInput {
  double v_veh = 0.0;   ///< m/s
  double p_ed = 0.0;    ///< W, negative while recuperating
  double t_amb = 20.0;  ///< degC
  ThermalConfig xi_th = ThermalConfig::A;
  int xi_el = 0;
};

/// Fixed-capacity history of one temperature signal, newest sample first.
class DelayLine {
 public:
  DelayLine() = default;
  DelayLine(std::size_t capacity, double fill);

  void fill(double value);
  void push(double value);
  /// Sample recorded `steps` pushes ago; saturates at the oldest sample.
  double at(std::size_t steps) const noexcept;
  std::size_t capacity() const noexcept { return buffer_.size(); }

 private:
  std::vector<double> buffer_;
  std::size_t head_ = 0;
};

struct PlantState {
  double t_d = 20.0;
  double t_u1 = 20.0;
  double t_u2 = 20.0;
  DelayLine delay_line_1;  ///< T_U2 history (radiator return)
  DelayLine delay_line_2;  ///< T_U1 history (drive outlet)
  double time = 0.0;

  /// Delay lines pre-filled with the current upstream temperatures.
  static PlantState make(double t_d, double t_u1, double t_u2, const PlantParams& params);
  static PlantState uniform(double temperature, const PlantParams& params) {
    return make(temperature, temperature, temperature, params);
  }
};

/// Intermediate quantities of one integration step, exposed for inspection.
struct StepProbe {
  double flow = 0.0;       ///< L/s
  double air_flow = 0.0;   ///< L/s
  double q_ed = 0.0;       ///< W
  double q_he = 0.0;       ///< W
  double beta = 0.0;
  double t_u1_delayed = 0.0;
  double t_u2_delayed = 0.0;
  std::size_t delay_steps_1 = 0;
  std::size_t delay_steps_2 = 0;
};

/// Smoothstep valve characteristic; ConfigB swaps the ports.
double valve_fraction(double alpha, ThermalConfig xi_th) noexcept;

/// Transport delay of a pipe in whole integration steps.
std::size_t delay_steps(double pipe_volume, double flow, const PlantParams& params) noexcept;

/// One explicit-Euler step. Throws NonFiniteState on blow-up.
PlantState step(const PlantState& state, const ActuatorCommand& cmd, const ExogenousInput& exo,
                const PlantParams& params, StepProbe* probe = nullptr);

/// In-place variant used by the closed-loop simulator.
void step_inplace(PlantState& state, const ActuatorCommand& cmd, const ExogenousInput& exo,
                  const PlantParams& params, StepProbe* probe = nullptr);

struct VehicleConstants {
  double mass = 2000.0;     ///< kg
  double gravity = 9.81;    ///< m/s^2
  double c_rr = 0.01;
  double cd_a = 0.6;        ///< m^2, drag coefficient times frontal area
  double rho_air = 1.2;     ///< kg/m^3
  double eta_drive = 0.9;
  double eta_regen = 0.6;
};

/// Electrical traction power from the longitudinal road-load balance, in W.
double longitudinal_power(double v, double a, double grade, const VehicleConstants& veh) noexcept;

}  // namespace thermotune::plant
