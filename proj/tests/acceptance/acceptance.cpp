// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
//   acceptance [--only N[,N...]] [--work DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "thermotune/agent/bowl.hpp"
#include "thermotune/agent/trainer.hpp"
#include "thermotune/error.hpp"
#include "thermotune/evalkit.hpp"
#include "thermotune/io/files.hpp"
#include "thermotune/io/run_config.hpp"
#include "thermotune/io/series.hpp"
#include "thermotune/nn/gradcheck.hpp"
#include "thermotune/nn/layers.hpp"
#include "thermotune/plant.hpp"
#include "thermotune/tsenv.hpp"

using namespace thermotune;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = THERMOTUNE_SOURCE_DIR;
fs::path g_work;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "thermotune");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

// ---- 1: gradient checks ----

using D = double;

nn::Tensor<D> random_tensor(nn::Shape shape, Rng& rng) {
  nn::Tensor<D> t(std::move(shape));
  std::uniform_real_distribution<D> d(-1.0, 1.0);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

nn::Var<D> probe(const nn::Var<D>& y, const nn::Tensor<D>& r) { return nn::sum(nn::mul(y, nn::constant(r))); }

double check_block(const std::string& block, int seed) {
  Rng rng(static_cast<std::uint64_t>(1000 * seed + block.size()));
  std::uniform_int_distribution<int> dim(1, 5);
  std::vector<nn::Var<D>> inputs;
  std::function<nn::Var<D>()> f;
  std::shared_ptr<void> keep;
  if (block == "dense") {
    auto layer = std::make_shared<nn::Linear<D>>(dim(rng), dim(rng), rng);
    auto x = nn::parameter(random_tensor({dim(rng), layer->in_features()}, rng));
    inputs = layer->parameters();
    inputs.push_back(x);
    const auto r = random_tensor(layer->forward(x).shape(), rng);
    f = [layer, x, r] { return probe(layer->forward(x), r); };
    keep = layer;
  } else if (block == "lstm") {
    const int in = dim(rng), hidden = dim(rng), layers = 1 + seed % 2, steps = 1 + dim(rng) % 3;
    auto lstm = std::make_shared<nn::LSTM<D>>(in, hidden, layers, rng);
    auto x = nn::parameter(random_tensor({2, steps, in}, rng));
    inputs = lstm->parameters();
    inputs.push_back(x);
    const auto r = random_tensor(lstm->forward(x).shape(), rng);
    f = [lstm, x, r] { return probe(lstm->forward(x), r); };
    keep = lstm;
  } else if (block == "conv") {
    std::uniform_int_distribution<int> k(1, 3), side(3, 5), pad(0, 1);
    const int c_in = dim(rng) % 3 + 1;
    auto conv = std::make_shared<nn::Conv2d<D>>(c_in, dim(rng) % 3 + 1, k(rng), rng,
                                                nn::Padding{pad(rng), pad(rng), pad(rng), pad(rng)});
    auto x = nn::parameter(random_tensor({2, c_in, side(rng), side(rng)}, rng));
    inputs = conv->parameters();
    inputs.push_back(x);
    const auto r = random_tensor(conv->forward(x).shape(), rng);
    f = [conv, x, r] { return probe(conv->forward(x), r); };
    keep = conv;
  } else if (block == "upsample+conv") {
    const int c_in = dim(rng) % 3 + 1, side = 1 + dim(rng) % 3;
    auto conv = std::make_shared<nn::Conv2d<D>>(c_in, dim(rng) % 3 + 1, 2, rng, nn::Padding{0, 0, 1, 1});
    auto x = nn::parameter(random_tensor({2, c_in, side, side}, rng));
    inputs = conv->parameters();
    inputs.push_back(x);
    const auto r = random_tensor(conv->forward(nn::upsample_nearest2x(x)).shape(), rng);
    f = [conv, x, r] { return probe(conv->forward(nn::upsample_nearest2x(x)), r); };
    keep = conv;
  } else {
    const int features = 1 + dim(rng);
    auto ln = std::make_shared<nn::LayerNorm<D>>(features);
    for (auto& p : ln->parameters()) {
      auto v = p;
      v.mutable_value() = random_tensor(p.shape(), rng);
    }
    auto x = nn::parameter(random_tensor({dim(rng), features}, rng));
    inputs = ln->parameters();
    inputs.push_back(x);
    const auto r = random_tensor(x.shape(), rng);
    f = [ln, x, r] { return probe(ln->forward(x), r); };
    keep = ln;
  }
  return nn::grad_check<D>(f, inputs).max_rel_error;
}

Outcome c1_gradients() {
  double worst = 0.0;
  int cases = 0;
  const double t = seconds([&] {
    for (const char* block : {"dense", "lstm", "conv", "upsample+conv", "layernorm"}) {
      for (int seed = 0; seed < 20; ++seed, ++cases) worst = std::max(worst, check_block(block, seed));
    }
  });
  return {worst <= 1e-4 && t < 60.0,
          std::to_string(cases) + " cases over 5 blocks, max rel err " + fmt("%.2e", worst) + ", " + fmt("%.1f s", t)};
}

// ---- 2: masking ----

double stencil(std::size_t o, std::size_t s, std::size_t n_in, std::size_t n_out) {
  const double pos = static_cast<double>(o) * static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1);
  return std::max(0.0, 1.0 - std::abs(pos - static_cast<double>(s)));
}

Outcome c2_masking() {
  using namespace env;
  control::GainLimits lim;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0), d(-1.0, 1.0);
  std::bernoulli_distribution bit(0.4);
  std::size_t bad_unmasked = 0, bad_masked = 0, masked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    control::ParameterSet ps;
    for (auto& b : ps.banks) {
      for (double& v : b.p.values) v = lim.p_max * u(rng);
      for (double& v : b.i.values) v = lim.i_max * u(rng);
    }
    ActionTensor delta;
    for (double& x : delta) x = d(rng);
    ActionMask mask;
    for (auto& ch : mask.cells)
      for (auto& m : ch) m = bit(rng);
    const std::size_t bank = static_cast<std::size_t>(trial % 2);
    const auto out = apply_action(ps, bank, delta, mask, lim, 0.1);
    if (!(out.banks[1 - bank] == ps.banks[1 - bank])) ++bad_unmasked;
    for (std::size_t c = 0; c < kChannels; ++c) {
      const auto kind = static_cast<control::TableKind>(c);
      for (std::size_t i = 0; i < control::kTableSize; ++i) {
        for (std::size_t j = 0; j < control::kTableSize; ++j) {
          const double before = ps.banks[bank].table(kind).at(i, j), after = out.banks[bank].table(kind).at(i, j);
          if (!mask.at(c, i, j)) {
            if (std::memcmp(&before, &after, sizeof(double)) != 0) ++bad_unmasked;
            continue;
          }
          ++masked;
          double acc = 0.0;
          for (std::size_t p = 0; p < kImageSize; ++p)
            for (std::size_t q = 0; q < kImageSize; ++q)
              acc += stencil(i, p, kImageSize, control::kTableSize) * stencil(j, q, kImageSize, control::kTableSize) *
                     delta[c * kImageCells + p * kImageSize + q];
          const double want = std::clamp(before + acc * 0.1 * lim.max(kind), 0.0, lim.max(kind));
          if (std::abs(after - want) > 1e-15) ++bad_masked;
        }
      }
    }
  }
  return {bad_unmasked == 0 && bad_masked == 0,
          "1000 triples, " + std::to_string(masked) + " masked entries, " + std::to_string(bad_unmasked) +
              " unmasked changes, " + std::to_string(bad_masked) + " oracle mismatches"};
}

// ---- 3: resampling ----

Outcome c3_resampling() {
  using namespace env;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double corner_err = 0.0, round_trip = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> t(kTableCells);
    for (double& v : t) v = u(rng);
    const auto up = resample_bilinear(t, 5, 5, kImageSize, kImageSize);
    const std::size_t n = kImageSize - 1;
    for (auto [a, b] : {std::pair{0, 0}, std::pair{0, 4}, std::pair{4, 0}, std::pair{4, 4}}) {
      const double got = up[(a ? n : 0) * kImageSize + (b ? n : 0)];
      corner_err = std::max(corner_err, std::abs(got - t[static_cast<std::size_t>(a * 5 + b)]));
    }
    const auto down_img = resample_bilinear(up, kImageSize, kImageSize, 5, 5);
    for (auto [a, b] : {std::pair{0, 0}, std::pair{0, 4}, std::pair{4, 0}, std::pair{4, 4}}) {
      const auto k = static_cast<std::size_t>(a * 5 + b);
      corner_err = std::max(corner_err, std::abs(down_img[k] - up[(a ? n : 0) * kImageSize + (b ? n : 0)]));
    }
    const double c0 = u(rng), ci = u(rng), cj = u(rng), cij = u(rng);
    const bool constant = trial % 2 == 0;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        t[i * 5 + j] = constant ? c0 : c0 + ci * i + cj * j + cij * i * j;
    const auto back = resample_bilinear(resample_bilinear(t, 5, 5, kImageSize, kImageSize), kImageSize, kImageSize, 5, 5);
    for (std::size_t k = 0; k < kTableCells; ++k) round_trip = std::max(round_trip, std::abs(back[k] - t[k]));
  }
  return {corner_err == 0.0 && round_trip <= 1e-12,
          "500 tables, corner error " + fmt("%.1e", corner_err) + ", max round-trip error " + fmt("%.2e", round_trip)};
}

// ---- 4: controller oracle ----

Outcome c4_controller() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> kp_d(0.0, 2.0), ki_d(0.0, 0.2), e_d(-6.0, 6.0);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const double kp = kp_d(rng), ki = ki_d(rng), dt = 0.1;
    const auto ps = control::ParameterSet::constant(kp, ki);
    control::ControllerState cs;
    double integ = 0.0;
    for (int n = 0; n < 10000; ++n) {
      const double e = e_d(rng);
      double next = integ + e * dt;
      const double cand = kp * e + ki * next;
      if ((cand > 1.0 && e > 0.0) || (cand < 0.0 && e < 0.0)) next = integ;
      integ = next;
      const double u = std::clamp(kp * e + ki * integ, 0.0, 1.0);
      cs = control::control_step(cs, ps, static_cast<std::size_t>(trial % 2), e, 30.0, dt);
      worst = std::max(worst, std::abs(cs.output - u));
    }
  }
  return {worst <= 1e-9, "5 x 10^4 steps, max |du| " + fmt("%.2e", worst)};
}

// ---- 5: plant physics ----

Outcome c5_plant() {
  using namespace plant;
  PlantParams p;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> temp(-30.0, 120.0), unit(0.0, 1.0), speed(0.0, 45.0), power(-8e4, 8e4);
  int violations = 0;
  for (int k = 0; k < 100000; ++k) {
    auto s = PlantState::make(temp(rng), temp(rng), temp(rng), p);
    const ActuatorCommand cmd{unit(rng), unit(rng), unit(rng), unit(rng)};
    const ExogenousInput exo{speed(rng), power(rng), temp(rng), unit(rng) < 0.5 ? ThermalConfig::A : ThermalConfig::B, 0};
    StepProbe pr;
    const auto next = step(s, cmd, exo, p, &pr);
    const double lo = std::min({s.t_d, pr.t_u1_delayed, pr.t_u2_delayed});
    const double hi = std::max({s.t_d, pr.t_u1_delayed, pr.t_u2_delayed});
    if (next.t_d < lo - 1e-12 || next.t_d > hi + 1e-12) ++violations;
  }

  auto s = PlantState::make(80.0, 95.0, 60.0, p);
  const ActuatorCommand relax{0.5, 1.0, 1.0, 0.0};
  const ExogenousInput still{0.0, 0.0, 20.0, ThermalConfig::A, 0};
  for (int n = 0; n < 216000; ++n) step_inplace(s, relax, still, p);
  const double relax_err = std::max({std::abs(s.t_d - 20.0), std::abs(s.t_u1 - 20.0), std::abs(s.t_u2 - 20.0)});

  int late = 0;
  for (double u_pmp : {1.0, 0.6, 0.3, 0.05}) {
    const long expected = std::llround(p.pipe_vol_2 / (p.k_hyd * u_pmp) / p.dt);
    auto d = PlantState::uniform(20.0, p);
    long arrival = -1;
    for (long n = 0; n < expected + 60 && arrival < 0; ++n) {
      if (n == 10) d.t_u1 = 100.0;
      StepProbe pr;
      step_inplace(d, {0.5, u_pmp, 0.0, 0.0}, still, p, &pr);
      if (n == 10) d.t_u1 = 20.0;
      if (pr.t_u1_delayed > 50.0) arrival = n;
    }
    late += (arrival - 11 != expected);
  }
  return {violations == 0 && relax_err <= 0.1 && late == 0,
          std::to_string(violations) + "/100000 mixing violations, relaxation error " + fmt("%.3f K", relax_err) +
              ", " + std::to_string(4 - late) + "/4 delay impulses on time"};
}

// ---- 6: reward ----

Outcome c6_reward() {
  env::RewardConfig cfg;
  cfg.r_min = -1e300;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> e(-5.0, 5.0), u(0.0, 1.0);
  double worst = 0.0;
  bool sign_ok = env::compute_reward(std::vector<double>(50, 0.0), std::vector<double>(50, 0.0), cfg) == 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial) % 400;
    std::vector<double> et(n), uv(n);
    for (std::size_t k = 0; k < n; ++k) et[k] = e(rng), uv[k] = u(rng);
    if (trial % 3 == 0) std::fill(uv.begin(), uv.end(), 0.0);
    long double cost = 0.0L;
    for (std::size_t k = 0; k < n; ++k) {
      const long double x = et[k], w = uv[k];
      cost += 25.0L * (std::sqrt(std::fabs(x)) + x * x) + 0.1L * w * w;
    }
    const double want = static_cast<double>(-cost / static_cast<long double>(n));
    const double got = env::compute_reward(et, uv, cfg);
    worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
    sign_ok = sign_ok && got < 0.0;
  }

  // Forced divergence: halve the mixing capacity until the closed loop blows up at maximal gains.
  env::EnvConfig ecfg;
  scenario::StatisticsSet st;
  const std::array<double, scenario::kVariableCount> mu = {22.0, 16.0, 0.01, 300.0, 25.0, 50.0};
  for (std::size_t k = 0; k < scenario::kVariableCount; ++k) st[k] = {scenario::kVariables[k], mu[k], 0.0, mu[k], mu[k]};
  const auto sc = scenario::synthesize_drive(scenario::sample_scenario(st, {}, 0.0, 11), plant::VehicleConstants{},
                                             scenario::DriverModel{}, 0.1);
  const auto ps = control::ParameterSet::constant(ecfg.limits.p_max, ecfg.limits.i_max);
  bool clipped = false;
  double c_mix = 3600.0;
  for (; c_mix > 1.0; c_mix *= 0.5) {
    plant::PlantParams theta;
    theta.c_mix = c_mix;
    const auto res = env::eval_scenario(sc, theta, ps, ecfg);
    if (res.failed) {
      clipped = env::evaluation_reward(res, ecfg) == ecfg.reward.r_min;
      break;
    }
  }
  return {worst <= 1e-12 && sign_ok && clipped,
          "1000 windows, max rel err " + fmt("%.1e", worst) + ", zero iff zero " + (sign_ok ? "ok" : "violated") +
              ", divergence at C_mix " + fmt("%.1f", c_mix) + (clipped ? " clipped to r_min" : " NOT clipped")};
}

// ---- 7: scenario statistics ----

Outcome c7_scenarios() {
  const auto st = scenario::fit_layer_statistics(
      scenario::merge({io::load_usage(kSource / "data/usage/cold.json"), io::load_usage(kSource / "data/usage/moderate.json"),
                       io::load_usage(kSource / "data/usage/hot.json")}));
  const auto edges = scenario::default_edge_cases();
  const int n = 10000;
  std::array<double, scenario::kVariableCount> sum{};
  int outside = 0;
  for (int k = 0; k < n; ++k) {
    const auto sc = scenario::sample_scenario(st, edges, 0.0, 70000 + static_cast<std::uint64_t>(k));
    for (std::size_t v = 0; v < scenario::kVariableCount; ++v) {
      const double x = sc.layers.values[v];
      outside += (x < st[v].clip_lo || x > st[v].clip_hi);
      sum[v] += x;
    }
  }
  double worst_z = 0.0;
  for (std::size_t v = 0; v < scenario::kVariableCount; ++v) {
    worst_z = std::max(worst_z, std::abs(sum[v] / n - st[v].mu) / (st[v].sigma / std::sqrt(n)));
  }
  const double p = 0.05;
  int edge = 0;
  for (int k = 0; k < n; ++k) edge += scenario::sample_scenario(st, edges, p, 90000 + static_cast<std::uint64_t>(k)).is_edge_case;
  const double rate = static_cast<double>(edge) / n, band = 4.0 * std::sqrt(p * (1 - p) / n);
  return {outside == 0 && worst_z <= 4.0 && std::abs(rate - p) <= band,
          std::to_string(outside) + " out-of-quantile draws, worst mean offset " + fmt("%.2f sigma/sqrt(n)", worst_z) +
              ", edge rate " + fmt("%.4f", rate) + " (band +/-" + fmt("%.4f)", band)};
}

// ---- 8: metrics ----

Outcome c8_metrics() {
  double err = 0.0;
  auto r = eval::metrics(std::vector<double>{1, -1}, std::vector<double>{0, 1}, std::vector<double>{50, 51}, 1.0);
  err = std::max({std::abs(r.mae - 1.0), std::abs(r.rmse - 1.0), std::abs(r.ms_udot - 0.5), std::abs(r.mtv_y - 1.0)});
  r = eval::metrics(std::vector<double>{3, 4}, std::vector<double>{0, 0}, std::vector<double>{0, 0}, 1.0);
  err = std::max({err, std::abs(r.mae - 3.5), std::abs(r.rmse - std::sqrt(12.5))});
  r = eval::metrics(std::vector<double>{0, 0, 0}, std::vector<double>{0.2, 0.5, 0.1}, std::vector<double>{40, 43, 41}, 0.5);
  // du/dt = 0.6, -0.8 -> (0.36 + 0.64) / 3; |dy| = 3, 2 -> 5 / 2
  err = std::max({err, std::abs(r.ms_udot - 1.0 / 3.0), std::abs(r.mtv_y - 2.5)});

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> e(-5.0, 5.0);
  int inexact = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> et(10 + trial), scaled(et.size()), z(et.size(), 0.0);
    for (double& x : et) x = e(rng);
    const auto base = eval::metrics(et, z, z, 0.1);
    for (double c : {0.25, 4.0, 1024.0}) {
      for (std::size_t k = 0; k < et.size(); ++k) scaled[k] = c * et[k];
      const auto s = eval::metrics(scaled, z, z, 0.1);
      inexact += (s.mae != c * base.mae) + (s.rmse != c * base.rmse);
    }
  }
  return {err <= 1e-12 && inexact == 0,
          "worked examples max err " + fmt("%.1e", err) + ", " + std::to_string(inexact) + "/1200 inexact scalings"};
}

// ---- 9: bowl ----

Outcome c9_bowl() {
  std::ostringstream detail;
  bool pass = true;
  const double t = seconds([&] {
    for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
      const auto run = agent::run_bowl_sanity(seed);
      const double ratio = run.final_decile_distance / run.first_episode_distance;
      pass = pass && ratio <= 0.5;
      detail << "seed " << seed << " " << fmt("%.2f", run.first_episode_distance) << "->"
             << fmt("%.2f", run.final_decile_distance) << " (" << fmt("%.0f%%", 100 * ratio) << "); ";
    }
  });
  detail << fmt("%.0f s", t);
  return {pass && t < 600.0, detail.str()};
}

// ---- 10-12: training pipeline ----

struct DeskRun {
  std::vector<agent::EpisodeLogRow> log;
  fs::path dir;
  double seconds = 0.0;
  bool ok = false;
};

std::array<DeskRun, 3> g_desk;

double mean_of(const std::vector<double>& v, std::size_t from, std::size_t to) {
  return std::accumulate(v.begin() + static_cast<long>(from), v.begin() + static_cast<long>(to), 0.0) /
         static_cast<double>(to - from);
}

Outcome c10_desk_training() {
  const auto cfg_path = kSource / "configs/desk.json";
  const auto cfg = io::load_run_config(cfg_path);
  const std::size_t total_steps = cfg.train.envs * cfg.train.steps_per_episode * cfg.train.episodes;
  int wins = 0;
  double total = 0.0;
  std::ostringstream detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto& r = g_desk[seed];
    r.dir = g_work / ("desk-seed" + std::to_string(seed));
    fs::remove_all(r.dir);
    int code = 0;
    r.seconds = seconds([&] {
      code = run_cli({"train", "--config", cfg_path.string(), "--seed", std::to_string(seed), "--quiet", "--run-dir", r.dir.string()});
    });
    total += r.seconds;
    if (code != 0) {
      detail << "seed " << seed << " train exit " << code << "; ";
      continue;
    }
    r.ok = true;
    r.log = io::parse_training_log(io::read_text(r.dir / "training_log.tsv"), "log");
    const auto curve = io::reward_curve(r.log, 15);
    std::vector<double> base_curve;
    for (const auto& row : r.log) base_curve.push_back(row.baseline_mean);
    base_curve = agent::rolling_mean(base_curve, 15);
    const std::size_t n = r.log.size(), decile = std::max<std::size_t>(n / 10, 1);
    const double first = mean_of(curve.rolling_mean, 0, decile);
    const double last = mean_of(curve.rolling_mean, n - decile, n);
    const double frozen = mean_of(base_curve, n - decile, n);
    const bool win = last > first && last > frozen;
    wins += win;
    detail << "seed " << seed << " first " << fmt("%.2f", first) << " last " << fmt("%.2f", last) << " frozen "
           << fmt("%.2f", frozen) << (win ? " ok" : " no") << "; ";
  }
  detail << total_steps << " steps/run, " << fmt("%.0f s", total);
  return {wins >= 2 && total_steps <= 15000 && cfg.train.envs == 4 && cfg.train.steps_per_episode == 25 && total <= 3600.0,
          detail.str()};
}

Outcome c11_heldout() {
  const auto& r = g_desk[0];
  if (!r.ok) return {false, "needs the seed-0 desk run of criterion 10"};
  const auto cfg = io::load_run_config(kSource / "configs/desk.json");
  const auto suite_path = g_work / "heldout-suite.json";
  if (run_cli({"gen-scenarios", "--stats", (kSource / "configs" / cfg.stats_file).string(), "--count",
               std::to_string(cfg.evaluation.suite_size), "--seed", std::to_string(cfg.evaluation.seed), "--p-edge",
               fmt("%.17g", cfg.evaluation.p_edge), "--out", suite_path.string(), "--run-dir", (g_work / "gen").string()}) != 0) {
    return {false, "gen-scenarios failed"};
  }
  std::vector<scenario::Scenario> suite;
  for (const auto& sc : io::load_suite(suite_path)) {
    suite.push_back(scenario::synthesize_drive(sc, cfg.vehicle, cfg.driver, cfg.plant.dt));
  }
  const auto tuned = io::load_calibration(r.dir / "calibration.txt");
  const auto base = io::load_calibration(r.dir / "conservative.txt");
  const auto table = eval::compare({{"conservative", base.params}, {"tuned", tuned.params}}, suite, cfg.plant, cfg.env, 1);
  std::size_t wins = 0;
  double mae_base = 0.0, mae_tuned = 0.0;
  for (std::size_t s = 0; s < suite.size(); ++s) {
    mae_base += table.at(s, 0).report.mae;
    mae_tuned += table.at(s, 1).report.mae;
    wins += table.at(s, 1).report.mae < table.at(s, 0).report.mae;
  }
  const double n = static_cast<double>(suite.size());
  const double share = static_cast<double>(wins) / n;
  return {suite.size() == 50 && share >= 0.7 && mae_tuned < mae_base,
          "tuned wins MAE on " + std::to_string(wins) + "/" + std::to_string(suite.size()) + " held-out scenarios, mean MAE " +
              fmt("%.3f", mae_tuned / n) + " vs " + fmt("%.3f K", mae_base / n)};
}

Outcome c12_determinism() {
  const auto cfg = (kSource / "configs/smoke.json").string();
  const auto a = g_work / "det-a", b = g_work / "det-b";
  fs::remove_all(a);
  fs::remove_all(b);
  if (run_cli({"train", "--config", cfg, "--quiet", "--run-dir", a.string()}) != 0 ||
      run_cli({"train", "--config", cfg, "--quiet", "--run-dir", b.string()}) != 0) {
    return {false, "train failed"};
  }
  const bool cal = io::read_text(a / "calibration.txt") == io::read_text(b / "calibration.txt");
  const bool log = io::read_text(a / "training_log.tsv") == io::read_text(b / "training_log.tsv");
  return {cal && log, std::string("calibration ") + (cal ? "identical" : "DIFFERS") + ", training log " +
                          (log ? "identical" : "DIFFERS") + " (sha256 " +
                          io::sha256_file(a / "calibration.txt").substr(0, 12) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  g_work = fs::temp_directory_path() / "thermotune-acceptance";
  for (int k = 1; k < argc; ++k) {
    const std::string a = argv[k];
    if (a == "--only" && k + 1 < argc) {
      std::stringstream list(argv[++k]);
      for (std::string item; std::getline(list, item, ',');) only.insert(std::stoi(item));
    } else if (a == "--work" && k + 1 < argc) {
      g_work = argv[++k];
    } else {
      std::cerr << "usage: acceptance [--only N[,N...]] [--work DIR]\n";
      return 2;
    }
  }
  if (only.count(11)) only.insert(10);
  fs::create_directories(g_work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient checks", c1_gradients},
      {"masking suite", c2_masking},
      {"resampling suite", c3_resampling},
      {"controller oracle", c4_controller},
      {"plant physics", c5_plant},
      {"reward suite", c6_reward},
      {"scenario statistics", c7_scenarios},
      {"metric oracle", c8_metrics},
      {"bowl sanity", c9_bowl},
      {"desk-scale training", c10_desk_training},
      {"held-out comparison", c11_heldout},
      {"training determinism", c12_determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << id << "  " << criteria[k].first << ": " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
