#include "thermotune/controller.hpp"

#include <algorithm>
#include <cmath>

namespace thermotune::control {

ParameterTable ParameterTable::constant(double value) {
  ParameterTable t;
  t.values.fill(value);
  return t;
}

ParameterSet ParameterSet::constant(double p_gain, double i_gain) {
  ParameterSet ps;
  for (auto& bank : ps.banks) {
    bank.p = ParameterTable::constant(p_gain);
    bank.i = ParameterTable::constant(i_gain);
  }
  return ps;
}

std::size_t cell_index(const Axis& axis, double x) noexcept {
  for (std::size_t k = 0; k + 2 < axis.size(); ++k) {
    if (x <= axis[k + 1]) return k;
  }
  return axis.size() - 2;
}

double lookup(const ParameterTable& table, double e_t, double dt_amb) noexcept {
  const double x = std::clamp(e_t, table.axis_i.front(), table.axis_i.back());
  const double y = std::clamp(dt_amb, table.axis_j.front(), table.axis_j.back());
  const std::size_t i = cell_index(table.axis_i, x);
  const std::size_t j = cell_index(table.axis_j, y);
  const double tx = (x - table.axis_i[i]) / (table.axis_i[i + 1] - table.axis_i[i]);
  const double ty = (y - table.axis_j[j]) / (table.axis_j[j + 1] - table.axis_j[j]);
  const double v00 = table.at(i, j);
  const double v01 = table.at(i, j + 1);
  const double v10 = table.at(i + 1, j);
  const double v11 = table.at(i + 1, j + 1);
  return (1.0 - tx) * ((1.0 - ty) * v00 + ty * v01) + tx * ((1.0 - ty) * v10 + ty * v11);
}

std::size_t select_bank(plant::ThermalConfig xi_th, int /*xi_el*/) noexcept {
  return xi_th == plant::ThermalConfig::A ? 0 : 1;
}

ControllerState control_step(const ControllerState& cs, const ParameterSet& ps, std::size_t bank,
                             double e_t, double dt_amb, double dt,
                             const ControllerOptions& options) {
  const Bank& b = ps.banks.at(bank);
  const double k_p = lookup(b.p, e_t, dt_amb);
  const double k_i = lookup(b.i, e_t, dt_amb);

  double integrator = std::clamp(cs.integrator + e_t * dt, -options.windup_limit,
                                 options.windup_limit);
  const double candidate = k_p * e_t + k_i * integrator;
  const bool pushes_up = candidate > 1.0 && e_t > 0.0;
  const bool pushes_down = candidate < 0.0 && e_t < 0.0;
  if (pushes_up || pushes_down) integrator = cs.integrator;

  const double raw = k_p * e_t + k_i * integrator;
  return {integrator, std::clamp(raw, 0.0, 1.0)};
}

bool is_valid(const ParameterSet& ps, const GainLimits& limits) {
  auto increasing = [](const Axis& a) {
    for (std::size_t k = 0; k + 1 < a.size(); ++k) {
      if (!(a[k] < a[k + 1])) return false;
    }
    return true;
  };
  for (const auto& bank : ps.banks) {
    for (TableKind kind : {TableKind::P, TableKind::I}) {
      const auto& t = bank.table(kind);
      if (!increasing(t.axis_i) || !increasing(t.axis_j)) return false;
      for (double v : t.values) {
        if (!std::isfinite(v) || v < 0.0 || v > limits.max(kind)) return false;
      }
    }
  }
  return true;
}

}  // namespace thermotune::control
