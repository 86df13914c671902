#include <benchmark/benchmark.h>

#include <random>

#include "thermotune/agent/replay.hpp"
#include "thermotune/agent/sac.hpp"
#include "thermotune/controller.hpp"
#include "thermotune/evalkit.hpp"
#include "thermotune/plant.hpp"
#include "thermotune/scenario.hpp"
#include "thermotune/tsenv.hpp"

using namespace thermotune;

namespace {

// The mutable-reference DoNotOptimize overload miscompiles doubles under GCC in this benchmark release.
void keep(const double& x) { benchmark::DoNotOptimize(x); }

scenario::Scenario cruise(double seconds) {
  scenario::StatisticsSet st;
  const std::array<double, scenario::kVariableCount> mu = {20.0, 9.0, 0.01, seconds, 25.0, 50.0};
  for (std::size_t k = 0; k < scenario::kVariableCount; ++k) st[k] = {scenario::kVariables[k], mu[k], 0.0, mu[k], mu[k]};
  return scenario::synthesize_drive(scenario::sample_scenario(st, {}, 0.0, 1), plant::VehicleConstants{},
                                    scenario::DriverModel{}, 0.1);
}

agent::AgentConfig desk_agent() {
  agent::AgentConfig a;
  a.window = 32;
  a.batch_size = 64;
  a.net.context_hidden = 32;
  a.net.context_latent = 16;
  a.net.lstm_hidden = 16;
  a.net.lstm_layers = 1;
  a.net.critic_hidden = 64;
  return a;
}

agent::PackedObservation random_obs(std::mt19937_64& rng, std::size_t window) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  env::Observation o;
  for (double& v : o.image) v = u(rng);
  o.window.samples = window;
  o.window.raw.assign(window * env::kSignalChannels, 0.0);
  o.window.normalized.resize(window * env::kSignalChannels);
  for (double& v : o.window.normalized) v = 2.0 * u(rng) - 1.0;
  return agent::pack(o, env::ActionMask::all(1), window);
}

}  // namespace

static void BM_PlantStep(benchmark::State& state) {
  plant::PlantParams p;
  auto s = plant::PlantState::uniform(50.0, p);
  const plant::ActuatorCommand cmd{0.5, 0.6, 0.5, 1.0};
  const plant::ExogenousInput exo{20.0, 15000.0, 25.0, plant::ThermalConfig::A, 0};
  for (auto _ : state) {
    plant::step_inplace(s, cmd, exo, p);
    keep(s.t_d);
  }
}
BENCHMARK(BM_PlantStep);

static void BM_ControlStep(benchmark::State& state) {
  const auto ps = control::ParameterSet::constant(0.5, 0.05);
  control::ControllerState cs;
  double e = -4.0;
  for (auto _ : state) {
    cs = control::control_step(cs, ps, 0, e, 20.0, 0.1);
    e = e > 4.0 ? -4.0 : e + 0.01;
    keep(cs.output);
  }
}
BENCHMARK(BM_ControlStep);

static void BM_ApplyAction(benchmark::State& state) {
  const auto ps = control::ParameterSet::constant(0.5, 0.05);
  env::ActionTensor a;
  a.fill(0.3);
  const auto mask = env::ActionMask::all(1);
  for (auto _ : state) {
    auto next = env::apply_action(ps, 0, a, mask, {}, 0.1);
    keep(next.banks[0].p.values[0]);
  }
}
BENCHMARK(BM_ApplyAction);

static void BM_EvalScenario(benchmark::State& state) {
  const auto sc = cruise(static_cast<double>(state.range(0)));
  const auto ps = control::ParameterSet::constant(0.5, 0.05);
  env::EnvConfig cfg;
  for (auto _ : state) {
    auto res = env::eval_scenario(sc, plant::PlantParams{}, ps, cfg);
    benchmark::DoNotOptimize(res.failed);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sc.speed.size()));
}
BENCHMARK(BM_EvalScenario)->Arg(60)->Arg(600)->Unit(benchmark::kMillisecond);

static void BM_Metrics(benchmark::State& state) {
  std::vector<double> e(6000), u(6000), y(6000);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (std::size_t k = 0; k < e.size(); ++k) e[k] = n(rng), u[k] = 0.5 + 0.1 * n(rng), y[k] = 50 + n(rng);
  for (auto _ : state) {
    auto r = eval::metrics(e, u, y, 0.1);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_Metrics);

static void BM_AgentAct(benchmark::State& state) {
  agent::Agent ag(desk_agent());
  std::mt19937_64 rng(1);
  const auto obs = random_obs(rng, 32);
  for (auto _ : state) {
    auto a = ag.act(obs, true);
    benchmark::DoNotOptimize(a);
  }
}
BENCHMARK(BM_AgentAct)->Unit(benchmark::kMicrosecond);

static void BM_AgentUpdate(benchmark::State& state) {
  auto cfg = desk_agent();
  agent::Agent ag(cfg);
  agent::ReplayBuffer buffer(1024);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 256; ++k) {
    agent::Transition t;
    t.obs = random_obs(rng, cfg.window);
    t.next = random_obs(rng, cfg.window);
    for (double& a : t.action) a = u(rng);
    t.reward = u(rng);
    buffer.push(std::move(t));
  }
  for (auto _ : state) {
    auto stats = ag.update(buffer);
    benchmark::DoNotOptimize(stats);
  }
}
BENCHMARK(BM_AgentUpdate)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
