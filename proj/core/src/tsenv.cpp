#include "thermotune/tsenv.hpp"

#include <algorithm>
#include <cmath>

#include "thermotune/error.hpp"

namespace thermotune::env {

using control::kTableSize;

std::size_t ActionMask::count() const {
  std::size_t n = 0;
  for (const auto& ch : cells) n += static_cast<std::size_t>(std::count(ch.begin(), ch.end(), 1));
  return n;
}

ActionMask ActionMask::all(std::uint8_t value) {
  ActionMask m;
  for (auto& ch : m.cells) ch.fill(value);
  return m;
}

void EnvConfig::validate() const {
  if (window < 1) throw ConfigError("env window must be >= 1");
  if (!(step_fraction > 0.0 && step_fraction <= 1.0)) {
    throw ConfigError("env step_fraction must lie in (0,1]");
  }
  if (!(reward.r_min < 0.0)) throw ConfigError("reward r_min must be negative");
  if (!(reward.b1 >= 0.0 && reward.b2 >= 0.0)) throw ConfigError("reward weights must be >= 0");
  if (!(limits.p_max > 0.0 && limits.i_max > 0.0)) throw ConfigError("gain limits must be > 0");
  for (double u : {u_pmp, u_fan, u_shu}) {
    if (!(u >= 0.0 && u <= 1.0)) throw ConfigError("actuator commands must lie in [0,1]");
  }
  if (!(warmup_hysteresis >= 0.0)) throw ConfigError("warmup_hysteresis must be >= 0");
}

namespace {

struct Stencil {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double t = 0.0;  // weight of hi
};

Stencil stencil(std::size_t index, std::size_t n_in, std::size_t n_out) {
  if (n_out == 1 || n_in == 1) return {0, 0, 0.0};
  const double pos = static_cast<double>(index) * static_cast<double>(n_in - 1) /
                     static_cast<double>(n_out - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  lo = std::min(lo, n_in - 1);
  const std::size_t hi = std::min(lo + 1, n_in - 1);
  return {lo, hi, pos - static_cast<double>(lo)};
}

}  // namespace

std::vector<double> resample_bilinear(std::span<const double> src, std::size_t rows,
                                      std::size_t cols, std::size_t out_rows,
                                      std::size_t out_cols) {
  if (src.size() != rows * cols) throw ShapeMismatch("resample_bilinear: source size mismatch");
  std::vector<double> out(out_rows * out_cols);
  for (std::size_t r = 0; r < out_rows; ++r) {
    const Stencil sr = stencil(r, rows, out_rows);
    for (std::size_t c = 0; c < out_cols; ++c) {
      const Stencil sc = stencil(c, cols, out_cols);
      const double top = (1.0 - sc.t) * src[sr.lo * cols + sc.lo] + sc.t * src[sr.lo * cols + sc.hi];
      const double bottom =
          (1.0 - sc.t) * src[sr.hi * cols + sc.lo] + sc.t * src[sr.hi * cols + sc.hi];
      out[r * out_cols + c] = (1.0 - sr.t) * top + sr.t * bottom;
    }
  }
  return out;
}

ParameterImage upsample_tables(const control::ParameterSet& ps, std::size_t bank,
                               const control::GainLimits& limits) {
  ParameterImage image{};
  const auto& b = ps.banks.at(bank);
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto kind = static_cast<control::TableKind>(c);
    const auto up = resample_bilinear(b.table(kind).values, kTableSize, kTableSize, kImageSize,
                                      kImageSize);
    const double scale = limits.max(kind);
    for (std::size_t k = 0; k < kImageCells; ++k) image[c * kImageCells + k] = up[k] / scale;
  }
  return image;
}

std::array<std::array<double, kTableCells>, kChannels> downsample_action(
    const ActionTensor& delta, const control::GainLimits& limits, double step_fraction) {
  std::array<std::array<double, kTableCells>, kChannels> out{};
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto kind = static_cast<control::TableKind>(c);
    const std::span<const double> channel(delta.data() + c * kImageCells, kImageCells);
    const auto down = resample_bilinear(channel, kImageSize, kImageSize, kTableSize, kTableSize);
    const double max_step = step_fraction * limits.max(kind);
    for (std::size_t k = 0; k < kTableCells; ++k) out[c][k] = down[k] * max_step;
  }
  return out;
}

ActionMask build_mask(std::span<const std::array<double, 2>> trajectory,
                      const control::Axis& axis_i, const control::Axis& axis_j) {
  if (trajectory.empty()) throw EmptyTrajectory("build_mask: trajectory is empty");
  ActionMask mask;
  for (const auto& sample : trajectory) {
    const std::size_t i = control::cell_index(axis_i, sample[0]);
    const std::size_t j = control::cell_index(axis_j, sample[1]);
    for (auto& ch : mask.cells) {
      ch[i * kTableSize + j] = 1;
      ch[i * kTableSize + j + 1] = 1;
      ch[(i + 1) * kTableSize + j] = 1;
      ch[(i + 1) * kTableSize + j + 1] = 1;
    }
  }
  return mask;
}

std::array<std::uint8_t, kActionSize> action_grid_mask(const ActionMask& mask) {
  // Image index p feeds table node n when the downsampling stencil of n has weight on p.
  std::array<std::array<bool, kTableSize>, kImageSize> feeds{};
  for (std::size_t n = 0; n < kTableSize; ++n) {
    const Stencil s = stencil(n, kImageSize, kTableSize);
    if (1.0 - s.t > 0.0) feeds[s.lo][n] = true;
    if (s.t > 0.0) feeds[s.hi][n] = true;
  }
  std::array<std::uint8_t, kActionSize> out{};
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t p = 0; p < kImageSize; ++p) {
      for (std::size_t q = 0; q < kImageSize; ++q) {
        std::uint8_t active = 0;
        for (std::size_t i = 0; i < kTableSize && !active; ++i) {
          if (!feeds[p][i]) continue;
          for (std::size_t j = 0; j < kTableSize; ++j) {
            if (feeds[q][j] && mask.at(c, i, j)) {
              active = 1;
              break;
            }
          }
        }
        out[c * kImageCells + p * kImageSize + q] = active;
      }
    }
  }
  return out;
}

control::ParameterSet apply_action(const control::ParameterSet& ps, std::size_t bank,
                                   const ActionTensor& delta, const ActionMask& mask,
                                   const control::GainLimits& limits, double step_fraction) {
  control::ParameterSet out = ps;
  const auto down = downsample_action(delta, limits, step_fraction);
  auto& b = out.banks.at(bank);
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto kind = static_cast<control::TableKind>(c);
    auto& values = b.table(kind).values;
    for (std::size_t k = 0; k < kTableCells; ++k) {
      if (!mask.cells[c][k]) continue;
      values[k] = std::clamp(values[k] + down[c][k], 0.0, limits.max(kind));
    }
  }
  return out;
}

double compute_reward(std::span<const double> e_t, std::span<const double> u_vlv,
                      const RewardConfig& cfg) {
  if (e_t.empty() || e_t.size() != u_vlv.size()) {
    throw ShapeMismatch("compute_reward: signals must be non-empty and of equal length");
  }
  double cost = 0.0;
  for (std::size_t n = 0; n < e_t.size(); ++n) {
    const double e = e_t[n];
    const double u = u_vlv[n];
    if (!std::isfinite(e) || !std::isfinite(u)) {
      throw NonFiniteSignal("compute_reward: non-finite sample at index " + std::to_string(n));
    }
    cost += cfg.b1 * (std::sqrt(std::abs(e)) + e * e) + cfg.b2 * u * u;
  }
  const double r = -cost / static_cast<double>(e_t.size());
  return std::max(r, cfg.r_min);
}

SignalWindow make_window(const Trajectory& traj, std::size_t samples) {
  SignalWindow w;
  w.samples = samples;
  w.raw.assign(samples * kSignalChannels, 0.0);
  w.normalized.assign(samples * kSignalChannels, 0.0);
  const std::size_t len = traj.size();
  if (len == 0) return w;
  const std::array<const std::vector<double>*, kSignalChannels> src = {&traj.t_d, &traj.e_t,
                                                                       &traj.dt_amb, &traj.u_vlv};
  for (std::size_t k = 0; k < samples; ++k) {
    std::size_t begin = k * len / samples;
    std::size_t end = (k + 1) * len / samples;
    if (end <= begin) {
      begin = std::min(begin, len - 1);
      end = begin + 1;
    }
    for (std::size_t c = 0; c < kSignalChannels; ++c) {
      double sum = 0.0;
      for (std::size_t n = begin; n < end; ++n) sum += (*src[c])[n];
      const double mean = sum / static_cast<double>(end - begin);
      w.raw[k * kSignalChannels + c] = mean;
      w.normalized[k * kSignalChannels + c] =
          (mean - SignalScaling::offset[c]) / SignalScaling::scale[c];
    }
  }
  return w;
}

EvalResult eval_scenario(const scenario::Scenario& sc, const plant::PlantParams& theta,
                         const control::ParameterSet& ps, const EnvConfig& cfg) {
  if (!sc.synthesized()) throw Error("eval_scenario: scenario '" + sc.id + "' is not synthesized");
  EvalResult result;
  Trajectory& tr = result.trajectory;
  tr.dt = theta.dt;
  const std::size_t len = sc.speed.size();
  for (auto* v : {&tr.time, &tr.t_d, &tr.t_d_ref, &tr.e_t, &tr.u_vlv, &tr.speed, &tr.dt_amb,
                  &tr.t_u1, &tr.t_u2, &tr.e_ctrl}) {
    v->reserve(len);
  }
  tr.bank.reserve(len);

  plant::PlantState state = plant::PlantState::uniform(cfg.initial_temperature, theta);
  control::ControllerState cs;
  auto config = plant::ThermalConfig::A;
  std::size_t active_bank = control::select_bank(config, cfg.xi_el);
  const double t_amb = sc.ambient();

  try {
    for (std::size_t n = 0; n < len; ++n) {
      if (config == plant::ThermalConfig::A && state.t_u1 < cfg.warmup_threshold) {
        config = plant::ThermalConfig::B;
      } else if (config == plant::ThermalConfig::B &&
                 state.t_u1 > cfg.warmup_threshold + cfg.warmup_hysteresis) {
        config = plant::ThermalConfig::A;
      }
      const std::size_t bank = control::select_bank(config, cfg.xi_el);
      if (bank != active_bank) {
        cs = {};
        active_bank = bank;
      }
      const double ref =
          config == plant::ThermalConfig::A ? cfg.nominal_setpoint : cfg.warmup_setpoint;
      const double e = state.t_d - ref;
      const double dt_amb = state.t_u1 - t_amb;
      // The swapped ports in ConfigB invert the actuation direction.
      const double e_ctrl = bank == 0 ? e : -e;
      cs = control::control_step(cs, ps, bank, e_ctrl, dt_amb, theta.dt, cfg.controller);

      tr.time.push_back(state.time);
      tr.t_d.push_back(state.t_d);
      tr.t_d_ref.push_back(ref);
      tr.e_t.push_back(e);
      tr.u_vlv.push_back(cs.output);
      tr.speed.push_back(sc.speed[n]);
      tr.dt_amb.push_back(dt_amb);
      tr.t_u1.push_back(state.t_u1);
      tr.t_u2.push_back(state.t_u2);
      tr.bank.push_back(static_cast<std::uint8_t>(bank));
      tr.e_ctrl.push_back(e_ctrl);

      const plant::ActuatorCommand cmd{cs.output, cfg.u_pmp, cfg.u_fan, cfg.u_shu};
      const plant::ExogenousInput exo{sc.speed[n], sc.power[n], t_amb, config, cfg.xi_el};
      plant::step_inplace(state, cmd, exo, theta);
    }
  } catch (const NonFiniteState& err) {
    result.failed = true;
    result.failure = err.what();
  }

  std::size_t count_b1 = 0;
  for (auto b : tr.bank) count_b1 += b;
  result.bank = count_b1 * 2 > tr.bank.size() ? 1 : 0;

  std::vector<std::array<double, 2>> visits;
  visits.reserve(tr.size());
  for (std::size_t n = 0; n < tr.size(); ++n) {
    if (tr.bank[n] == result.bank) visits.push_back({tr.e_ctrl[n], tr.dt_amb[n]});
  }
  const auto& table = ps.banks[result.bank].p;
  if (!visits.empty()) result.mask = build_mask(visits, table.axis_i, table.axis_j);

  Observation& obs = result.observation;
  obs.context.xi_th_one_hot = result.bank == 0 ? std::array<double, 2>{1.0, 0.0}
                                               : std::array<double, 2>{0.0, 1.0};
  const double ref = result.bank == 0 ? cfg.nominal_setpoint : cfg.warmup_setpoint;
  obs.context.setpoint = (ref - SignalScaling::setpoint_offset) / SignalScaling::setpoint_scale;
  obs.image = upsample_tables(ps, result.bank, cfg.limits);
  obs.window = make_window(tr, cfg.window);
  return result;
}

double evaluation_reward(const EvalResult& result, const EnvConfig& cfg) {
  if (result.failed || result.trajectory.size() == 0) return cfg.reward.r_min;
  return compute_reward(result.trajectory.e_t, result.trajectory.u_vlv, cfg.reward);
}

plant::PlantParams jitter_plant(const plant::PlantParams& base, double jitter, Rng& rng) {
  plant::PlantParams p = base;
  std::uniform_real_distribution<double> f(1.0 - jitter, 1.0 + jitter);
  p.c_1 *= f(rng);
  p.c_2 *= f(rng);
  p.c_mix *= f(rng);
  p.k_hyd *= f(rng);
  p.k_he0 *= f(rng);
  p.pipe_vol_1 *= f(rng);
  p.pipe_vol_2 *= f(rng);
  return p;
}

ThermalTuningEnv::ThermalTuningEnv(ThermalEnvSetup setup) : setup_(std::move(setup)) {
  setup_.plant.validate();
  setup_.env.validate();
  theta_ = setup_.plant;
  params_ = setup_.episode.conservative();
}

StepOutcome ThermalTuningEnv::reset(std::uint64_t episode_seed) {
  rng_.seed(episode_seed);
  theta_ = jitter_plant(setup_.plant, setup_.episode.theta_jitter, rng_);

  params_ = setup_.episode.conservative();
  std::uniform_real_distribution<double> f(1.0 - setup_.episode.init_jitter,
                                           1.0 + setup_.episode.init_jitter);
  const double p_scale = f(rng_);
  const double i_scale = f(rng_);
  for (auto& bank : params_.banks) {
    for (double& v : bank.p.values) v = std::min(v * p_scale, setup_.env.limits.p_max);
    for (double& v : bank.i.values) v = std::min(v * i_scale, setup_.env.limits.i_max);
  }

  batch_.clear();
  const std::size_t n = std::max<std::size_t>(setup_.episode.scenario_batch, 1);
  for (std::size_t k = 0; k < n; ++k) {
    auto sc = scenario::sample_scenario(setup_.stats, setup_.edge_cases, setup_.episode.p_edge,
                                        rng_());
    batch_.push_back(scenario::synthesize_drive(std::move(sc), setup_.vehicle, setup_.driver,
                                                theta_.dt));
  }
  return evaluate_next();
}

StepOutcome ThermalTuningEnv::step(const ActionTensor& action) {
  params_ = apply_action(params_, last_.bank, action, last_.mask, setup_.env.limits,
                         setup_.env.step_fraction);
  return evaluate_next();
}

StepOutcome ThermalTuningEnv::evaluate_next() {
  std::uniform_int_distribution<std::size_t> pick(0, batch_.size() - 1);
  const auto& sc = batch_[pick(rng_)];
  last_ = eval_scenario(sc, theta_, params_, setup_.env);
  StepOutcome out;
  out.observation = last_.observation;
  out.mask = last_.mask;
  out.bank = last_.bank;
  out.failed = last_.failed;
  out.reward = evaluation_reward(last_, setup_.env);
  return out;
}

}  // namespace thermotune::env
