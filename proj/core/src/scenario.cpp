#include "thermotune/scenario.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <random>

#include "thermotune/error.hpp"
#include "thermotune/random.hpp"

namespace thermotune::scenario {

namespace {

constexpr std::array<std::string_view, kVariableCount> kNames = {
    "mean_speed", "speed_variance", "mean_grade", "duration", "ambient", "humidity"};
constexpr std::array<int, kVariableCount> kLayers = {2, 2, 1, 2, 5, 5};

// Rejection sampling gives up after this many draws and falls back to the mean.
constexpr int kMaxRejections = 10000;

}  // namespace

std::string_view name(Variable v) noexcept { return kNames[static_cast<std::size_t>(v)]; }

int layer(Variable v) noexcept { return kLayers[static_cast<std::size_t>(v)]; }

std::optional<Variable> variable_from_name(std::string_view n) noexcept {
  for (std::size_t k = 0; k < kVariableCount; ++k) {
    if (kNames[k] == n) return kVariables[k];
  }
  return std::nullopt;
}

void UsageDataset::validate() const {
  for (std::size_t r = 0; r < records.size(); ++r) {
    for (double x : records[r].values) {
      if (!std::isfinite(x)) {
        throw ParseError(provenance, 0, "record " + std::to_string(r) + " is not finite");
      }
    }
    if (!(records[r][Variable::Duration] > 0.0)) {
      throw ParseError(provenance, 0, "record " + std::to_string(r) + " has duration <= 0");
    }
  }
}

double upper_quantile_z() noexcept {
  static const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 0.9);
  return z;
}

StatisticsSet fit_layer_statistics(const UsageDataset& data) {
  const std::size_t n = data.records.size();
  if (n < 2) {
    throw InsufficientData("need at least 2 usage records to fit layer statistics, got " +
                           std::to_string(n));
  }
  data.validate();
  StatisticsSet out;
  const double z = upper_quantile_z();
  for (std::size_t k = 0; k < kVariableCount; ++k) {
    double sum = 0.0;
    for (const auto& r : data.records) sum += r.values[k];
    const double mu = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& r : data.records) ss += (r.values[k] - mu) * (r.values[k] - mu);
    const double sigma = std::sqrt(ss / static_cast<double>(n - 1));
    out[k] = {kVariables[k], mu, sigma, mu - z * sigma, mu + z * sigma};
  }
  return out;
}

UsageDataset merge(const std::vector<UsageDataset>& parts) {
  UsageDataset out;
  for (const auto& p : parts) {
    out.records.insert(out.records.end(), p.records.begin(), p.records.end());
    if (!out.provenance.empty()) out.provenance += "+";
    out.provenance += p.provenance;
  }
  return out;
}

std::vector<Scenario> default_edge_cases() {
  Scenario desert;
  desert.id = "edge-desert";
  desert.is_edge_case = true;
  desert.layers[Variable::MeanSpeed] = 38.0;
  desert.layers[Variable::SpeedVariance] = 1.0;
  desert.layers[Variable::MeanGrade] = 0.02;
  desert.layers[Variable::Duration] = 600.0;
  desert.layers[Variable::Ambient] = 45.0;
  desert.layers[Variable::Humidity] = 15.0;

  Scenario polar;
  polar.id = "edge-subpolar";
  polar.is_edge_case = true;
  polar.layers[Variable::MeanSpeed] = 30.0;
  polar.layers[Variable::SpeedVariance] = 16.0;
  polar.layers[Variable::MeanGrade] = 0.04;
  polar.layers[Variable::Duration] = 600.0;
  polar.layers[Variable::Ambient] = -20.0;
  polar.layers[Variable::Humidity] = 80.0;
  return {desert, polar};
}

Scenario sample_scenario(const StatisticsSet& stats, const std::vector<Scenario>& edge_cases,
                         double p_edge, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  Scenario sc;
  if (!edge_cases.empty() && u < p_edge) {
    std::uniform_int_distribution<std::size_t> pick(0, edge_cases.size() - 1);
    sc = edge_cases[pick(rng)];
    sc.is_edge_case = true;
  } else {
    for (const auto& st : stats) {
      double x = st.mu;
      if (st.sigma > 0.0) {
        std::normal_distribution<double> normal(st.mu, st.sigma);
        for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
          const double draw = normal(rng);
          if (draw >= st.clip_lo && draw <= st.clip_hi) {
            x = draw;
            break;
          }
        }
      }
      sc.layers[st.variable] = x;
    }
    sc.is_edge_case = false;
  }
  sc.seed = seed;
  sc.dt = 0.0;
  sc.target_speed.clear();
  sc.speed.clear();
  sc.grade.clear();
  sc.power.clear();
  return sc;
}

std::vector<double> simulate_driver(const std::vector<double>& target, double v0,
                                    const DriverModel& driver, double dt) {
  std::vector<double> v(target.size());
  double speed = std::max(v0, 0.0);
  for (std::size_t n = 0; n < target.size(); ++n) {
    v[n] = speed;
    const double a = std::clamp(driver.gain * (target[n] - speed), driver.a_min, driver.a_max);
    speed = std::max(speed + a * dt, 0.0);
  }
  return v;
}

std::vector<double> traction_power(const std::vector<double>& speed,
                                   const std::vector<double>& grade,
                                   const plant::VehicleConstants& veh, double dt) {
  std::vector<double> p(speed.size());
  for (std::size_t n = 0; n < speed.size(); ++n) {
    const double next = n + 1 < speed.size() ? speed[n + 1] : speed[n];
    const double a = (next - speed[n]) / dt;
    p[n] = plant::longitudinal_power(speed[n], a, grade[n], veh);
  }
  return p;
}

Scenario synthesize_drive(Scenario sc, const plant::VehicleConstants& veh,
                          const DriverModel& driver, double dt) {
  const auto samples = static_cast<std::size_t>(std::max<long long>(
      1, std::llround(sc.layers[Variable::Duration] / dt)));
  Rng rng(derive_seed(sc.seed, 0x64726976ULL));
  std::uniform_real_distribution<double> seg_len(driver.segment_min, driver.segment_max);
  std::normal_distribution<double> std_normal(0.0, 1.0);

  const double mean_speed = sc.layers[Variable::MeanSpeed];
  const double speed_std = std::sqrt(std::max(sc.layers[Variable::SpeedVariance], 0.0));

  sc.target_speed.assign(samples, 0.0);
  for (std::size_t n = 0; n < samples;) {
    const auto len = static_cast<std::size_t>(std::max(1.0, std::round(seg_len(rng) / dt)));
    const double level = std::clamp(mean_speed + speed_std * std_normal(rng), 0.0, driver.v_max);
    for (std::size_t k = 0; k < len && n < samples; ++k, ++n) sc.target_speed[n] = level;
  }

  // Grade knots around the sampled mean, linearly interpolated.
  const auto knot_step = static_cast<std::size_t>(
      std::max(1.0, std::round(driver.grade_knot_spacing / dt)));
  const std::size_t knots = samples / knot_step + 2;
  std::vector<double> knot_values(knots);
  for (auto& g : knot_values) {
    g = sc.layers[Variable::MeanGrade] + driver.grade_spread * std_normal(rng);
  }
  sc.grade.resize(samples);
  for (std::size_t n = 0; n < samples; ++n) {
    const std::size_t k = n / knot_step;
    const double t = static_cast<double>(n % knot_step) / static_cast<double>(knot_step);
    sc.grade[n] = (1.0 - t) * knot_values[k] + t * knot_values[k + 1];
  }

  sc.speed = simulate_driver(sc.target_speed, sc.target_speed.front(), driver, dt);
  sc.power = traction_power(sc.speed, sc.grade, veh, dt);
  sc.dt = dt;
  return sc;
}

}  // namespace thermotune::scenario
