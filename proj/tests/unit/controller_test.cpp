#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "thermotune/controller.hpp"

using namespace thermotune;
using namespace thermotune::control;

namespace {

ParameterTable random_table(std::mt19937_64& rng, double hi) {
  std::uniform_real_distribution<double> u(0.0, hi);
  ParameterTable t;
  for (double& v : t.values) v = u(rng);
  return t;
}

}  // namespace

TEST(Lookup, ReproducesNodes) {
  std::mt19937_64 rng(1);
  const auto t = random_table(rng, 2.0);
  for (std::size_t i = 0; i < kTableSize; ++i) {
    for (std::size_t j = 0; j < kTableSize; ++j) {
      EXPECT_EQ(lookup(t, t.axis_i[i], t.axis_j[j]), t.at(i, j));
    }
  }
}

TEST(Lookup, CellCenterAveragesCorners) {
  ParameterTable t = ParameterTable::constant(0.0);
  t.at(1, 1) = 1.0;
  t.at(1, 2) = 2.0;
  t.at(2, 1) = 3.0;
  t.at(2, 2) = 4.0;
  const double e = 0.5 * (t.axis_i[1] + t.axis_i[2]);
  const double a = 0.5 * (t.axis_j[1] + t.axis_j[2]);
  EXPECT_DOUBLE_EQ(lookup(t, e, a), 2.5);
}

TEST(Lookup, LinearAlongErrorAxis) {
  ParameterTable t = ParameterTable::constant(0.0);
  t.axis_i = {-2.0, -1.0, 0.0, 1.0, 2.0};
  for (std::size_t j = 0; j < kTableSize; ++j) t.at(3, j) = 10.0;
  EXPECT_NEAR(lookup(t, 0.3, t.axis_j[3]), 3.0, 1e-12);
}

TEST(Lookup, FlatExtrapolation) {
  std::mt19937_64 rng(2);
  const auto t = random_table(rng, 1.0);
  EXPECT_EQ(lookup(t, -1e3, 25.0), lookup(t, t.axis_i.front(), 25.0));
  EXPECT_EQ(lookup(t, 1e3, 1e3), t.at(4, 4));
  EXPECT_EQ(lookup(t, -1e3, -1e3), t.at(0, 0));
}

TEST(Lookup, ContinuousAcrossCellBoundaries) {
  std::mt19937_64 rng(3);
  const auto t = random_table(rng, 1.0);
  for (std::size_t k = 1; k + 1 < kTableSize; ++k) {
    for (double a : {3.0, 17.5, 60.0}) {
      const double x = t.axis_i[k];
      EXPECT_NEAR(lookup(t, x - 1e-9, a), lookup(t, x + 1e-9, a), 1e-8);
      const double y = t.axis_j[k];
      EXPECT_NEAR(lookup(t, x * 0.3, y - 1e-9), lookup(t, x * 0.3, y + 1e-9), 1e-8);
    }
  }
}

TEST(CellIndex, InteriorBreakpointBelongsToLowerCell) {
  EXPECT_EQ(cell_index(kErrorAxis, 0.0), 1u);
  EXPECT_EQ(cell_index(kErrorAxis, -10.0), 0u);
  EXPECT_EQ(cell_index(kErrorAxis, 10.0), 3u);
  EXPECT_EQ(cell_index(kErrorAxis, -99.0), 0u);
  EXPECT_EQ(cell_index(kErrorAxis, 99.0), 3u);
}

TEST(ControlStep, ZeroInputFixedPoint) {
  const auto ps = ParameterSet::constant(0.5, 0.05);
  const auto cs = control_step({}, ps, 0, 0.0, 10.0, 0.1);
  EXPECT_EQ(cs.output, 0.0);
  EXPECT_EQ(cs.integrator, 0.0);
}

TEST(ControlStep, ClosedFormTenSteps) {
  const auto ps = ParameterSet::constant(0.1, 0.01);
  ControllerState cs;
  double sum = 0.0;
  for (int k = 1; k <= 10; ++k) {
    cs = control_step(cs, ps, 0, 2.0, 10.0, 1.0);
    sum += 2.0;
    EXPECT_NEAR(cs.output, 0.1 * 2.0 + 0.01 * sum, 1e-12);
  }
  EXPECT_NEAR(cs.output, 0.4, 1e-12);
}

TEST(ControlStep, SaturationFreezesIntegrator) {
  const auto ps = ParameterSet::constant(1.0, 0.01);
  ControllerState cs{3.0, 0.0};
  cs = control_step(cs, ps, 0, 5.0, 10.0, 0.1);
  EXPECT_EQ(cs.output, 1.0);
  EXPECT_EQ(cs.integrator, 3.0);
}

TEST(ControlStep, ScalarPiOracle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> kp_d(0.0, 2.0), ki_d(0.0, 0.2), e_d(-6.0, 6.0);
  for (int trial = 0; trial < 5; ++trial) {
    const double kp = kp_d(rng), ki = ki_d(rng), dt = 0.1;
    const auto ps = ParameterSet::constant(kp, ki);
    ControllerState cs;
    double integ = 0.0, max_diff = 0.0;
    for (int n = 0; n < 10000; ++n) {
      const double e = e_d(rng);
      double next = integ + e * dt;
      const double cand = kp * e + ki * next;
      if ((cand > 1.0 && e > 0.0) || (cand < 0.0 && e < 0.0)) next = integ;
      integ = next;
      const double u = std::min(1.0, std::max(0.0, kp * e + ki * integ));
      cs = control_step(cs, ps, 1, e, 30.0, dt);
      max_diff = std::max(max_diff, std::abs(cs.output - u));
    }
    EXPECT_LE(max_diff, 1e-9);
  }
}

TEST(ControlStep, OutputBoundedAndIntegratorBounded) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> e_d(-20.0, 20.0), a_d(-10.0, 90.0);
  const auto ps = ParameterSet::constant(0.8, 0.1);
  ControllerOptions opt;
  opt.windup_limit = 50.0;
  ControllerState cs;
  for (int n = 0; n < 20000; ++n) {
    cs = control_step(cs, ps, 0, e_d(rng) + 15.0, a_d(rng), 0.1, opt);
    ASSERT_GE(cs.output, 0.0);
    ASSERT_LE(cs.output, 1.0);
    ASSERT_LE(std::abs(cs.integrator), opt.windup_limit);
  }
}

TEST(ControlStep, RaisingGainsNeverLowersRawOutput) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ControllerOptions opt;
  opt.windup_limit = 1e9;
  for (int k = 0; k < 2000; ++k) {
    ParameterSet lo;
    for (auto& b : lo.banks) {
      b.p = random_table(rng, 1.0);
      b.i = random_table(rng, 0.1);
    }
    ParameterSet hi = lo;
    for (auto& b : hi.banks) {
      for (double& v : b.p.values) v += u(rng);
      for (double& v : b.i.values) v += 0.1 * u(rng);
    }
    // Tiny positive error keeps u_raw inside (0,1) so the clamp does not hide the order.
    const double e = 0.01 * u(rng);
    const ControllerState cs{0.5 * u(rng), 0.0};
    const double dt_amb = 70.0 * u(rng);
    EXPECT_LE(control_step(cs, lo, 0, e, dt_amb, 0.1, opt).output,
              control_step(cs, hi, 0, e, dt_amb, 0.1, opt).output);
  }
}

TEST(SelectBank, ByThermalConfig) {
  using plant::ThermalConfig;
  for (int el : {0, 1}) {
    EXPECT_EQ(select_bank(ThermalConfig::A, el), 0u);
    EXPECT_EQ(select_bank(ThermalConfig::B, el), 1u);
    EXPECT_EQ(select_bank(plant::toggled(plant::toggled(ThermalConfig::B)), el), 1u);
  }
}

TEST(ParameterSet, HoldsOneHundredValuesAndValidates) {
  EXPECT_EQ(kParameterCount, 100u);
  GainLimits lim;
  auto ps = ParameterSet::constant(0.5, 0.05);
  EXPECT_TRUE(is_valid(ps, lim));
  ps.banks[1].i.at(2, 2) = 0.3;
  EXPECT_FALSE(is_valid(ps, lim));
  ps = ParameterSet::constant(0.5, 0.05);
  ps.banks[0].p.axis_j[3] = ps.banks[0].p.axis_j[2];
  EXPECT_FALSE(is_valid(ps, lim));
}
