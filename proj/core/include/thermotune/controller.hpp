#pragma once

#include <array>
#include <cstddef>

#include "thermotune/plant.hpp"

namespace thermotune::control {

inline constexpr std::size_t kTableSize = 5;
inline constexpr std::size_t kBankCount = 2;
inline constexpr std::size_t kTablesPerBank = 2;
inline constexpr std::size_t kParameterCount =
    kBankCount * kTablesPerBank * kTableSize * kTableSize;

using Axis = std::array<double, kTableSize>;

/// Default breakpoints of the control-error axis, K.
inline constexpr Axis kErrorAxis = {-10.0, -3.0, 0.0, 3.0, 10.0};
/// Default breakpoints of the ambient-difference axis, K.
inline constexpr Axis kAmbientAxis = {0.0, 10.0, 25.0, 45.0, 70.0};

/// 5x5 gain map over (control error, ambient difference), row index along the error axis.
struct ParameterTable {
  Axis axis_i = kErrorAxis;
  Axis axis_j = kAmbientAxis;
  std::array<double, kTableSize * kTableSize> values{};

  double& at(std::size_t i, std::size_t j) { return values[i * kTableSize + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * kTableSize + j]; }

  static ParameterTable constant(double value);
  bool operator==(const ParameterTable&) const = default;
};

enum class TableKind : std::size_t { P = 0, I = 1 };

struct Bank {
  ParameterTable p;
  ParameterTable i;

  ParameterTable& table(TableKind k) { return k == TableKind::P ? p : i; }
  const ParameterTable& table(TableKind k) const { return k == TableKind::P ? p : i; }
  bool operator==(const Bank&) const = default;
};

struct ParameterSet {
  std::array<Bank, kBankCount> banks;

  static ParameterSet constant(double p_gain, double i_gain);
  bool operator==(const ParameterSet&) const = default;
};

/// Upper clip limits of the tunable gains.
struct GainLimits {
  double p_max = 2.0;  ///< valve command per K
  double i_max = 0.2;  ///< valve command per K s

  double max(TableKind k) const noexcept { return k == TableKind::P ? p_max : i_max; }
};

struct ControllerState {
  double integrator = 0.0;  ///< K s
  double output = 0.0;
};

struct ControllerOptions {
  double windup_limit = 1.0e4;  ///< K s, hard bound on the integrator magnitude
};

/// Index of the axis cell containing x; out-of-range values map to the edge cells and
/// interior breakpoints belong to the lower cell.
std::size_t cell_index(const Axis& axis, double x) noexcept;

/// Bilinear interpolation with flat extrapolation beyond the axis range.
double lookup(const ParameterTable& table, double e_t, double dt_amb) noexcept;

std::size_t select_bank(plant::ThermalConfig xi_th, int xi_el) noexcept;

/// Gain-scheduled PI step with conditional anti-windup; output clamped to [0,1].
ControllerState control_step(const ControllerState& cs, const ParameterSet& ps, std::size_t bank,
                             double e_t, double dt_amb, double dt,
                             const ControllerOptions& options = {});

/// Every table value finite, inside [0, limit] and with strictly increasing axes.
bool is_valid(const ParameterSet& ps, const GainLimits& limits);

}  // namespace thermotune::control
