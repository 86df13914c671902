#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "thermotune/error.hpp"
#include "thermotune/scenario.hpp"

using namespace thermotune;
using namespace thermotune::scenario;

namespace {

UsageDataset dataset_from(std::initializer_list<double> speeds) {
  UsageDataset d;
  d.provenance = "test";
  for (double s : speeds) {
    LayerValues r;
    r[Variable::MeanSpeed] = s;
    r[Variable::Duration] = 100.0;
    d.records.push_back(r);
  }
  return d;
}

StatisticsSet reference_stats() {
  StatisticsSet st;
  const std::array<double, kVariableCount> mu = {20.0, 9.0, 0.01, 600.0, 15.0, 50.0};
  const std::array<double, kVariableCount> sigma = {5.0, 3.0, 0.01, 120.0, 12.0, 15.0};
  const double z = upper_quantile_z();
  for (std::size_t k = 0; k < kVariableCount; ++k) {
    st[k] = {kVariables[k], mu[k], sigma[k], mu[k] - z * sigma[k], mu[k] + z * sigma[k]};
  }
  return st;
}

}  // namespace

TEST(FitStatistics, QuantileConstant) { EXPECT_NEAR(upper_quantile_z(), 1.2815515655446004, 1e-12); }

TEST(FitStatistics, ConstantData) {
  const auto st = fit_layer_statistics(dataset_from({1, 1, 1, 1}));
  const auto& s = st[0];
  EXPECT_EQ(s.mu, 1.0);
  EXPECT_EQ(s.sigma, 0.0);
  EXPECT_EQ(s.clip_lo, 1.0);
  EXPECT_EQ(s.clip_hi, 1.0);
}

TEST(FitStatistics, TwoSamples) {
  const auto s = fit_layer_statistics(dataset_from({0, 2}))[0];
  EXPECT_DOUBLE_EQ(s.mu, 1.0);
  EXPECT_NEAR(s.sigma, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s.clip_lo, -0.8124, 1e-4);
  EXPECT_NEAR(s.clip_hi, 2.8124, 1e-4);
  EXPECT_NEAR(s.clip_lo, 1.0 - 1.281552 * std::sqrt(2.0), 1e-6);
}

TEST(FitStatistics, MonteCarloNormal) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal(0.0, 1.0);
  UsageDataset d;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    LayerValues r;
    r[Variable::MeanSpeed] = normal(rng);
    r[Variable::Duration] = 1.0;
    d.records.push_back(r);
  }
  const auto s = fit_layer_statistics(d)[0];
  EXPECT_LE(std::abs(s.mu), 3.0 / std::sqrt(n));
  EXPECT_NEAR(s.sigma, 1.0, 0.01);
}

TEST(FitStatistics, RejectsTooFewRecords) {
  EXPECT_THROW(fit_layer_statistics(dataset_from({1.0})), InsufficientData);
  EXPECT_THROW(fit_layer_statistics(UsageDataset{}), InsufficientData);
}

TEST(SampleScenario, DegenerateDrawEqualsMeans) {
  auto st = reference_stats();
  for (auto& s : st) s.sigma = 0.0, s.clip_lo = s.clip_hi = s.mu;
  const auto sc = sample_scenario(st, default_edge_cases(), 0.0, 9);
  EXPECT_FALSE(sc.is_edge_case);
  for (std::size_t k = 0; k < kVariableCount; ++k) EXPECT_EQ(sc.layers.values[k], st[k].mu);
}

TEST(SampleScenario, ForcedEdgeCase) {
  const auto edges = default_edge_cases();
  const std::vector<Scenario> one = {edges[1]};
  const auto sc = sample_scenario(reference_stats(), one, 1.0, 3);
  EXPECT_TRUE(sc.is_edge_case);
  EXPECT_EQ(sc.layers, edges[1].layers);
  EXPECT_EQ(sc.id, edges[1].id);
}

TEST(SampleScenario, ClippedMeansAndEdgeRate) {
  const auto st = reference_stats();
  const auto edges = default_edge_cases();
  const int n = 10000;
  std::array<double, kVariableCount> sum{};
  int outside = 0;
  for (int k = 0; k < n; ++k) {
    const auto sc = sample_scenario(st, edges, 0.0, 1000 + k);
    ASSERT_FALSE(sc.is_edge_case);
    for (std::size_t v = 0; v < kVariableCount; ++v) {
      const double x = sc.layers.values[v];
      if (x < st[v].clip_lo || x > st[v].clip_hi) ++outside;
      sum[v] += x;
    }
  }
  EXPECT_EQ(outside, 0);
  for (std::size_t v = 0; v < kVariableCount; ++v) {
    EXPECT_LE(std::abs(sum[v] / n - st[v].mu), 4.0 * st[v].sigma / std::sqrt(n)) << v;
  }

  const double p = 0.05;
  int edge_count = 0;
  for (int k = 0; k < n; ++k) edge_count += sample_scenario(st, edges, p, 50000 + k).is_edge_case;
  EXPECT_LE(std::abs(static_cast<double>(edge_count) / n - p), 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST(SampleScenario, Reproducible) {
  const auto st = reference_stats();
  const plant::VehicleConstants veh;
  const DriverModel drv;
  for (std::uint64_t seed : {0ULL, 1ULL, 123456789ULL}) {
    const auto a = synthesize_drive(sample_scenario(st, default_edge_cases(), 0.3, seed), veh, drv, 0.1);
    const auto b = synthesize_drive(sample_scenario(st, default_edge_cases(), 0.3, seed), veh, drv, 0.1);
    EXPECT_EQ(a.layers, b.layers);
    EXPECT_EQ(a.speed, b.speed);
    EXPECT_EQ(a.power, b.power);
    EXPECT_EQ(a.grade, b.grade);
  }
}

TEST(Driver, RestScenario) {
  const std::vector<double> target(500, 0.0);
  const auto v = simulate_driver(target, 0.0, DriverModel{}, 0.1);
  for (double x : v) EXPECT_EQ(x, 0.0);
  const auto p = traction_power(v, std::vector<double>(500, 0.0), plant::VehicleConstants{}, 0.1);
  for (double x : p) EXPECT_EQ(x, 0.0);
}

TEST(Driver, SteadyCruiseGivesRoadLoad) {
  const plant::VehicleConstants veh;
  const std::vector<double> target(300, 20.0);
  const auto v = simulate_driver(target, 20.0, DriverModel{}, 0.1);
  for (double x : v) EXPECT_EQ(x, 20.0);
  const auto p = traction_power(v, std::vector<double>(300, 0.0), veh, 0.1);
  for (double x : p) EXPECT_NEAR(x, 7560.0, 1e-9);
}

TEST(Driver, AccelerationLimitedStep) {
  DriverModel drv;
  drv.a_max = 3.0;
  drv.gain = 1.5;
  for (double dt : {0.1, 0.05, 0.5}) {
    const std::vector<double> target(static_cast<std::size_t>(40.0 / dt), 30.0);
    const auto v = simulate_driver(target, 0.0, drv, dt);
    std::size_t first = v.size();
    for (std::size_t n = 0; n < v.size(); ++n) {
      if (v[n] >= 30.0 - 1e-9 && first == v.size()) first = n;
      EXPECT_LE(v[n], 30.0 + dt * drv.a_max);
      EXPECT_GE(v[n], 0.0);
      if (n > 0) EXPECT_LE(std::abs(v[n] - v[n - 1]) / dt, drv.a_max + 1e-12);
    }
    ASSERT_LT(first, v.size());
    EXPECT_GE(static_cast<double>(first) * dt, 10.0 - 1e-9);
  }
}

TEST(Driver, SafetyOnSampledDrives) {
  const auto st = reference_stats();
  const DriverModel drv;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto sc = synthesize_drive(sample_scenario(st, default_edge_cases(), 0.2, seed),
                                     plant::VehicleConstants{}, drv, 0.1);
    const auto len = static_cast<std::size_t>(std::llround(sc.duration() / 0.1));
    ASSERT_EQ(sc.speed.size(), std::max<std::size_t>(len, 1));
    ASSERT_EQ(sc.power.size(), sc.speed.size());
    for (std::size_t n = 0; n < sc.speed.size(); ++n) {
      ASSERT_GE(sc.speed[n], 0.0);
      if (n > 0) {
        const double a = (sc.speed[n] - sc.speed[n - 1]) / 0.1;
        ASSERT_LE(a, drv.a_max + 1e-12);
        ASSERT_GE(a, drv.a_min - 1e-12);
      }
    }
  }
}

TEST(Dataset, MergeAndNames) {
  const auto m = merge({dataset_from({1, 2}), dataset_from({3})});
  EXPECT_EQ(m.records.size(), 3u);
  EXPECT_EQ(m.provenance, "test+test");
  for (auto v : kVariables) EXPECT_EQ(variable_from_name(name(v)), v);
  EXPECT_FALSE(variable_from_name("bogus").has_value());
  EXPECT_EQ(layer(Variable::Ambient), 5);
  EXPECT_EQ(layer(Variable::MeanGrade), 1);
}
