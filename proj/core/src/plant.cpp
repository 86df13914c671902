#include "thermotune/plant.hpp"

#include <algorithm>
#include <cmath>

#include "thermotune/error.hpp"

namespace thermotune::plant {

namespace {

// Temperatures beyond this magnitude are treated as integration blow-up.
constexpr double kBlowUpBound = 1.0e6;

std::size_t line_capacity(double pipe_volume, const PlantParams& p) {
  const double max_delay = pipe_volume / p.min_flow;
  return static_cast<std::size_t>(std::ceil(max_delay / p.dt)) + 1;
}

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

void PlantParams::validate() const {
  const bool ok = positive(k_hyd) && positive(c_1) && positive(c_2) && positive(c_mix) &&
                  positive(rho_cp) && positive(k_he0) && positive(vair_ref) &&
                  positive(c_fan) && positive(c_shu) && positive(k_drag) &&
                  positive(pipe_vol_1) && positive(pipe_vol_2) && positive(min_flow) &&
                  positive(dt);
  if (!ok) throw ConfigError("plant parameters must be finite and strictly positive");
  if (eta_el.empty()) throw ConfigError("plant eta_el must list at least one state");
  for (double eta : eta_el) {
    if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("plant eta_el entries must lie in (0,1)");
  }
}

ActuatorCommand ActuatorCommand::clamped() const noexcept {
  auto c = [](double x) { return std::isnan(x) ? 0.0 : std::clamp(x, 0.0, 1.0); };
  return {c(u_vlv), c(u_pmp), c(u_fan), c(u_shu)};
}

DelayLine::DelayLine(std::size_t capacity, double fill_value)
    : buffer_(std::max<std::size_t>(capacity, 1), fill_value) {}

void DelayLine::fill(double value) { std::fill(buffer_.begin(), buffer_.end(), value); }

void DelayLine::push(double value) {
  head_ = head_ == 0 ? buffer_.size() - 1 : head_ - 1;
  buffer_[head_] = value;
}

double DelayLine::at(std::size_t steps) const noexcept {
  const std::size_t n = buffer_.size();
  steps = std::min(steps, n - 1);
  return buffer_[(head_ + steps) % n];
}

PlantState PlantState::make(double t_d, double t_u1, double t_u2, const PlantParams& params) {
  PlantState s;
  s.t_d = t_d;
  s.t_u1 = t_u1;
  s.t_u2 = t_u2;
  s.delay_line_1 = DelayLine(line_capacity(params.pipe_vol_1, params), t_u2);
  s.delay_line_2 = DelayLine(line_capacity(params.pipe_vol_2, params), t_u1);
  return s;
}

double valve_fraction(double alpha, ThermalConfig xi_th) noexcept {
  const double x = std::isnan(alpha) ? 0.0 : std::clamp(alpha, 0.0, 1.0);
  const double beta = x * x * (3.0 - 2.0 * x);
  return xi_th == ThermalConfig::A ? beta : 1.0 - beta;
}

std::size_t delay_steps(double pipe_volume, double flow, const PlantParams& params) noexcept {
  const double tau = pipe_volume / std::max(flow, params.min_flow);
  return static_cast<std::size_t>(std::llround(tau / params.dt));
}

void step_inplace(PlantState& s, const ActuatorCommand& raw_cmd, const ExogenousInput& exo,
                  const PlantParams& p, StepProbe* probe) {
  const ActuatorCommand cmd = raw_cmd.clamped();
  const double v = std::max(exo.v_veh, 0.0);
  const std::size_t el = static_cast<std::size_t>(
      std::clamp(exo.xi_el, 0, static_cast<int>(p.eta_el.size()) - 1));

  const double flow = p.k_hyd * cmd.u_pmp;
  const double air_flow = p.c_fan * cmd.u_fan + p.c_shu * cmd.u_shu * v;
  const double q_ed = (1.0 - p.eta_el[el]) * std::abs(exo.p_ed) + p.k_drag * v;
  const double q_he = p.k_he0 * (1.0 - std::exp(-air_flow / p.vair_ref)) * (s.t_u2 - exo.t_amb);
  const double beta = valve_fraction(cmd.u_vlv, exo.xi_th);

  const std::size_t d1 = delay_steps(p.pipe_vol_1, flow, p);
  const std::size_t d2 = delay_steps(p.pipe_vol_2, flow, p);
  const double t_u2_del = s.delay_line_1.at(d1);
  const double t_u1_del = s.delay_line_2.at(d2);

  const double heat_flow = p.rho_cp * flow;
  const double dt_d =
      heat_flow / p.c_mix * (beta * t_u2_del + (1.0 - beta) * t_u1_del - s.t_d);
  const double dt_u1 = (q_ed - heat_flow * (s.t_u1 - s.t_d)) / p.c_1;
  const double dt_u2 = (-q_he + heat_flow * beta * (t_u1_del - s.t_u2)) / p.c_2;

  s.t_d += p.dt * dt_d;
  s.t_u1 += p.dt * dt_u1;
  s.t_u2 += p.dt * dt_u2;
  s.time += p.dt;

  for (double t : {s.t_d, s.t_u1, s.t_u2}) {
    if (!std::isfinite(t) || std::abs(t) > kBlowUpBound) {
      throw NonFiniteState("plant state diverged at t=" + std::to_string(s.time) + " s");
    }
  }
  s.delay_line_1.push(s.t_u2);
  s.delay_line_2.push(s.t_u1);

  if (probe) {
    *probe = {flow, air_flow, q_ed, q_he, beta, t_u1_del, t_u2_del, d1, d2};
  }
}

PlantState step(const PlantState& state, const ActuatorCommand& cmd, const ExogenousInput& exo,
                const PlantParams& params, StepProbe* probe) {
  PlantState next = state;
  step_inplace(next, cmd, exo, params, probe);
  return next;
}

double longitudinal_power(double v, double a, double grade, const VehicleConstants& veh) noexcept {
  if (v <= 0.0) return 0.0;
  const double mg = veh.mass * veh.gravity;
  const double force = veh.mass * a + mg * std::sin(grade) + veh.c_rr * mg * std::cos(grade) +
                       0.5 * veh.rho_air * veh.cd_a * v * v;
  const double mech = force * v;
  return mech >= 0.0 ? mech / veh.eta_drive : mech * veh.eta_regen;
}

}  // namespace thermotune::plant
