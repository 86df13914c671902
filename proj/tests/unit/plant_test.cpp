#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "thermotune/error.hpp"
#include "thermotune/plant.hpp"

using namespace thermotune;
using namespace thermotune::plant;

TEST(ValveFraction, Examples) {
  EXPECT_EQ(valve_fraction(0.0, ThermalConfig::A), 0.0);
  EXPECT_EQ(valve_fraction(0.5, ThermalConfig::A), 0.5);
  EXPECT_DOUBLE_EQ(valve_fraction(0.25, ThermalConfig::A), 0.15625);
  EXPECT_EQ(valve_fraction(1.0, ThermalConfig::A), 1.0);
  EXPECT_EQ(valve_fraction(-3.0, ThermalConfig::A), 0.0);
  EXPECT_EQ(valve_fraction(7.0, ThermalConfig::A), 1.0);
}

TEST(ValveFraction, MonotoneAndSwapped) {
  double prev_a = -1.0, prev_b = 2.0;
  for (int k = 0; k <= 1000; ++k) {
    const double x = k / 1000.0;
    const double a = valve_fraction(x, ThermalConfig::A);
    const double b = valve_fraction(x, ThermalConfig::B);
    EXPECT_GE(a, prev_a);
    EXPECT_LE(b, prev_b);
    EXPECT_NEAR(a + b, 1.0, 1e-15);
    prev_a = a;
    prev_b = b;
  }
}

TEST(PlantStep, SingleEulerStep) {
  PlantParams p;
  p.k_hyd = 0.5;
  p.dt = 0.1;
  // rho_cp * flow * dt / c_mix = 0.1
  p.c_mix = p.rho_cp * 0.5 * p.dt / 0.1;
  const ActuatorCommand cmd{0.5, 1.0, 0.0, 0.0};
  const ExogenousInput exo{0.0, 0.0, 20.0, ThermalConfig::A, 0};

  auto s = PlantState::make(50.0, 60.0, 40.0, p);
  EXPECT_EQ(step(s, cmd, exo, p).t_d, 50.0);

  s = PlantState::make(50.0, 60.0, 30.0, p);
  EXPECT_NEAR(step(s, cmd, exo, p).t_d, 50.0 + 0.1 * (0.5 * 30.0 + 0.5 * 60.0 - 50.0), 1e-12);
}

TEST(PlantStep, RelaxesToAmbientWithoutHeatSource) {
  PlantParams p;
  const ActuatorCommand cmd{0.5, 1.0, 1.0, 0.0};
  const ExogenousInput exo{0.0, 0.0, 20.0, ThermalConfig::A, 0};
  auto s = PlantState::make(80.0, 95.0, 60.0, p);
  // Slowest mode is a few hundred seconds; integrate for 6 h.
  for (int n = 0; n < 216000; ++n) step_inplace(s, cmd, exo, p);
  EXPECT_NEAR(s.t_d, 20.0, 0.1);
  EXPECT_NEAR(s.t_u1, 20.0, 0.1);
  EXPECT_NEAR(s.t_u2, 20.0, 0.1);
}

TEST(PlantStep, FullValveSelectsRadiatorStream) {
  PlantParams p;
  const ActuatorCommand cmd{1.0, 1.0, 0.5, 0.0};
  const ExogenousInput exo{0.0, 0.0, 20.0, ThermalConfig::A, 0};
  auto s = PlantState::make(70.0, 90.0, 40.0, p);
  for (int n = 0; n < 20000; ++n) {
    step_inplace(s, cmd, exo, p);
    s.t_u1 = 90.0;
    s.t_u2 = 40.0;
    s.delay_line_1.fill(40.0);
    s.delay_line_2.fill(90.0);
  }
  EXPECT_NEAR(s.t_d, 40.0, 0.1);
}

TEST(PlantStep, ConvexMixingBound) {
  PlantParams p;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> temp(-30.0, 120.0), unit(0.0, 1.0), speed(0.0, 45.0),
      power(-8e4, 8e4);
  int violations = 0;
  for (int k = 0; k < 100000; ++k) {
    auto s = PlantState::make(temp(rng), temp(rng), temp(rng), p);
    const ActuatorCommand cmd{unit(rng), unit(rng), unit(rng), unit(rng)};
    const ExogenousInput exo{speed(rng), power(rng), temp(rng),
                             unit(rng) < 0.5 ? ThermalConfig::A : ThermalConfig::B, 0};
    StepProbe probe;
    const auto next = step(s, cmd, exo, p, &probe);
    const double lo = std::min({s.t_d, probe.t_u1_delayed, probe.t_u2_delayed});
    const double hi = std::max({s.t_d, probe.t_u1_delayed, probe.t_u2_delayed});
    if (next.t_d < lo - 1e-12 || next.t_d > hi + 1e-12) ++violations;
  }
  EXPECT_EQ(violations, 0);
}

TEST(PlantStep, MoreFanNeverWarmsRadiatorAboveAmbient) {
  PlantParams p;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> temp(20.0, 110.0), unit(0.0, 1.0), amb(-30.0, 20.0);
  for (int k = 0; k < 5000; ++k) {
    const auto s = PlantState::make(temp(rng), temp(rng), temp(rng), p);
    const double f1 = unit(rng), f2 = unit(rng);
    ActuatorCommand lo{unit(rng), unit(rng), std::min(f1, f2), unit(rng)};
    ActuatorCommand hi = lo;
    hi.u_fan = std::max(f1, f2);
    const ExogenousInput exo{10.0 * unit(rng), 1e4 * unit(rng), amb(rng), ThermalConfig::A, 0};
    EXPECT_LE(step(s, hi, exo, p).t_u2, step(s, lo, exo, p).t_u2);
  }
}

TEST(PlantStep, Deterministic) {
  PlantParams p;
  auto run = [&] {
    auto s = PlantState::make(30.0, 45.0, 25.0, p);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> out;
    for (int n = 0; n < 5000; ++n) {
      const ActuatorCommand cmd{unit(rng), 0.6, 0.5, 1.0};
      const ExogenousInput exo{20.0 * unit(rng), 3e4 * unit(rng), 10.0, ThermalConfig::A, 0};
      step_inplace(s, cmd, exo, p);
      out.insert(out.end(), {s.t_d, s.t_u1, s.t_u2});
    }
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(PlantStep, DelayImpulseArrivesOnTime) {
  PlantParams p;
  for (double u_pmp : {1.0, 0.6, 0.3, 0.05}) {
    const double flow = p.k_hyd * u_pmp;
    const auto expected = static_cast<long>(std::llround(p.pipe_vol_2 / flow / p.dt));
    const ActuatorCommand cmd{0.5, u_pmp, 0.0, 0.0};
    const ExogenousInput exo{0.0, 0.0, 20.0, ThermalConfig::A, 0};
    auto s = PlantState::uniform(20.0, p);
    constexpr long inject = 10;
    long arrival = -1;
    for (long n = 0; n < inject + expected + 50 && arrival < 0; ++n) {
      if (n == inject) s.t_u1 = 100.0;
      StepProbe probe;
      step_inplace(s, cmd, exo, p, &probe);
      if (n == inject) s.t_u1 = 20.0;
      EXPECT_EQ(probe.delay_steps_2, static_cast<std::size_t>(expected));
      if (probe.t_u1_delayed > 50.0) arrival = n;
    }
    // The impulse sample is the state at the start of step inject + 1.
    EXPECT_EQ(arrival - (inject + 1), expected) << "u_pmp=" << u_pmp;
  }
}

TEST(PlantStep, DelayUsesFlowFloor) {
  PlantParams p;
  EXPECT_EQ(delay_steps(p.pipe_vol_1, 0.0, p), delay_steps(p.pipe_vol_1, p.min_flow, p));
  const auto s = PlantState::uniform(20.0, p);
  const ActuatorCommand off{0.5, 0.0, 0.0, 0.0};
  const ExogenousInput exo{0.0, 0.0, 20.0, ThermalConfig::A, 0};
  EXPECT_NO_THROW(step(s, off, exo, p));
}

TEST(PlantStep, BlowUpRaisesNonFiniteState) {
  PlantParams p;
  p.c_mix = 1.0;  // rho_cp * flow * dt / c_mix = 180, far outside Euler stability
  const ActuatorCommand cmd{0.3, 1.0, 0.5, 0.0};
  const ExogenousInput exo{0.0, 0.0, 20.0, ThermalConfig::A, 0};
  auto s = PlantState::make(50.0, 90.0, 20.0, p);
  EXPECT_THROW(
      {
        for (int n = 0; n < 10000; ++n) step_inplace(s, cmd, exo, p);
      },
      NonFiniteState);
}

TEST(PlantParams, Validation) {
  PlantParams p;
  EXPECT_NO_THROW(p.validate());
  p.c_mix = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.eta_el = {1.2};
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(DelayLine, PushAndSaturate) {
  DelayLine line(3, 0.0);
  line.push(1.0);
  line.push(2.0);
  EXPECT_EQ(line.at(0), 2.0);
  EXPECT_EQ(line.at(1), 1.0);
  EXPECT_EQ(line.at(2), 0.0);
  EXPECT_EQ(line.at(99), 0.0);
}

TEST(LongitudinalPower, Examples) {
  VehicleConstants veh;
  EXPECT_EQ(longitudinal_power(0.0, 1.0, 0.1, veh), 0.0);
  EXPECT_NEAR(longitudinal_power(20.0, 0.0, 0.0, veh), 7560.0, 1e-9);
  EXPECT_NEAR(longitudinal_power(20.0, -2.0, 0.0, veh), -43917.6, 1e-9);
}
