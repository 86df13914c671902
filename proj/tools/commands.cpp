#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "cli.hpp"
#include "thermotune/agent/replay.hpp"
#include "thermotune/agent/sac.hpp"
#include "thermotune/agent/trainer.hpp"
#include "thermotune/error.hpp"
#include "thermotune/evalkit.hpp"
#include "thermotune/io/files.hpp"
#include "thermotune/io/run_config.hpp"
#include "thermotune/io/series.hpp"
#include "thermotune/random.hpp"

namespace thermotune::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kOutputEnv = "THERMOTUNE_OUTPUT_DIR";

struct OutputOptions {
  std::string output_dir;  ///< base directory; the run directory is stamped below it
  std::string run_dir;     ///< exact run directory, skips stamping
};

/// Collects the artifacts of one command and writes the manifest at the end.
class Run {
 public:
  Run(std::string command, std::vector<std::string> args, const OutputOptions& opt,
      const std::string& configured_base)
      : command_(std::move(command)), args_(std::move(args)) {
    if (!opt.run_dir.empty()) {
      dir_ = opt.run_dir;
    } else {
      fs::path base = "runs";
      if (!opt.output_dir.empty()) {
        base = opt.output_dir;
      } else if (const char* env = std::getenv(kOutputEnv); env && *env) {
        base = env;
      } else if (!configured_base.empty()) {
        base = configured_base;
      }
      dir_ = stamped(base);
    }
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }

  void input(const fs::path& path) { inputs_.push_back(path); }
  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }

  fs::path write(const std::string& name, std::string_view text) {
    const fs::path path = dir_ / name;
    io::write_text(path, text);
    outputs_.push_back(path);
    return path;
  }

  void output(const fs::path& path) { outputs_.push_back(path); }

  void finish() const {
    json in = json::array(), out = json::array();
    for (const auto& p : inputs_) in.push_back({{"path", p.string()}, {"sha256", io::sha256_file(p)}});
    for (const auto& p : outputs_) {
      out.push_back({{"path", fs::relative(p, dir_).string()},
                     {"bytes", fs::file_size(p)},
                     {"sha256", io::sha256_file(p)}});
    }
    const json doc = {{"format", "thermotune-manifest"},
                      {"version", io::kFormatVersion},
                      {"tool_version", kVersion},
                      {"command", command_},
                      {"arguments", args_},
                      {"seeds", seeds_},
                      {"inputs", in},
                      {"outputs", out}};
    io::write_text(dir_ / "manifest.json", doc.dump(1) + "\n");
  }

 private:
  fs::path stamped(const fs::path& base) const {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
    fs::path dir = base / (std::string(stamp) + "-" + command_);
    for (int k = 1; fs::exists(dir); ++k) dir = base / (std::string(stamp) + "-" + command_ + "-" + std::to_string(k));
    return dir;
  }

  std::string command_;
  std::vector<std::string> args_;
  fs::path dir_;
  std::vector<fs::path> inputs_, outputs_;
  std::map<std::string, std::uint64_t> seeds_;
};

fs::path resolve(const fs::path& relative_to_file, const std::string& path) {
  const fs::path p(path);
  if (p.is_absolute() || relative_to_file.parent_path().empty()) return p;
  return relative_to_file.parent_path() / p;
}

std::string fixed(double x, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

io::RunConfig config_or_default(const std::string& path) {
  return path.empty() ? io::RunConfig{} : io::load_run_config(path);
}

std::vector<scenario::Scenario> synthesized(const std::vector<scenario::Scenario>& suite,
                                            const io::RunConfig& cfg) {
  std::vector<scenario::Scenario> out;
  out.reserve(suite.size());
  for (const auto& sc : suite) out.push_back(scenario::synthesize_drive(sc, cfg.vehicle, cfg.driver, cfg.plant.dt));
  return out;
}

void add_output_options(CLI::App* cmd, OutputOptions& opt) {
  cmd->add_option("--output-dir", opt.output_dir, "Base directory for run-stamped output (overrides $" + std::string(kOutputEnv) + ")");
  cmd->add_option("--run-dir", opt.run_dir, "Exact output directory, no stamping");
}

// ---- commands ----

int fit_stats(const std::vector<std::string>& usage, const std::string& out_path,
              const OutputOptions& opt, const std::vector<std::string>& args, std::ostream& out) {
  std::vector<scenario::UsageDataset> parts;
  for (const auto& u : usage) parts.push_back(io::load_usage(u));
  const auto data = scenario::merge(parts);
  const auto stats = scenario::fit_layer_statistics(data);
  const std::string text = io::format_statistics(stats, data.provenance);

  Run run("fit-stats", args, opt, "");
  for (const auto& u : usage) run.input(u);
  run.write("stats.json", text);
  if (!out_path.empty()) io::write_text(out_path, text);
  run.finish();

  out << "records " << data.records.size() << "  provenance " << data.provenance << "\n";
  out << std::left << std::setw(16) << "variable" << std::right << std::setw(14) << "mu" << std::setw(14)
      << "sigma" << std::setw(14) << "clip_lo" << std::setw(14) << "clip_hi" << "\n";
  for (const auto& s : stats) {
    out << std::left << std::setw(16) << scenario::name(s.variable) << std::right << std::setw(14)
        << fixed(s.mu) << std::setw(14) << fixed(s.sigma) << std::setw(14) << fixed(s.clip_lo)
        << std::setw(14) << fixed(s.clip_hi) << "\n";
  }
  out << "wrote " << (run.dir() / "stats.json").string() << "\n";
  return kSuccess;
}

int gen_scenarios(const std::string& stats_path, std::size_t count, std::uint64_t seed, double p_edge,
                  const std::string& out_path, const OutputOptions& opt,
                  const std::vector<std::string>& args, std::ostream& out) {
  if (count == 0) throw ConfigError("--count must be positive");
  if (!(p_edge >= 0.0 && p_edge <= 1.0)) throw ConfigError("--p-edge must be in [0, 1]");
  const auto stats = io::load_statistics(stats_path);
  const auto edges = scenario::default_edge_cases();
  std::vector<scenario::Scenario> suite;
  for (std::size_t k = 0; k < count; ++k) {
    auto sc = scenario::sample_scenario(stats, edges, p_edge, derive_seed(seed, 0x7375697465ULL, k));
    char id[32];
    std::snprintf(id, sizeof id, "s%04zu", k);
    if (!sc.is_edge_case) sc.id = id;
    else sc.id = std::string(id) + "-" + sc.id;
    suite.push_back(std::move(sc));
  }
  const std::string text = io::format_suite(suite);
  Run run("gen-scenarios", args, opt, "");
  run.input(stats_path);
  run.seed("seed", seed);
  run.write("suite.json", text);
  if (!out_path.empty()) io::write_text(out_path, text);
  run.finish();
  std::size_t edge = 0;
  for (const auto& s : suite) edge += s.is_edge_case;
  out << "scenarios " << suite.size() << "  edge cases " << edge << "\n";
  out << "wrote " << (run.dir() / "suite.json").string() << "\n";
  return kSuccess;
}

int simulate(const std::string& cal_path, const std::string& suite_path, const std::string& cfg_path,
             const std::string& only, const OutputOptions& opt, const std::vector<std::string>& args,
             std::ostream& out) {
  const auto cfg = config_or_default(cfg_path);
  const auto cal = io::load_calibration(cal_path);
  const auto suite = synthesized(io::load_suite(suite_path), cfg);
  Run run("simulate", args, opt, cfg.output_dir);
  run.input(cal_path);
  run.input(suite_path);
  if (!cfg_path.empty()) run.input(cfg_path);
  std::size_t done = 0;
  bool any_failed = false;
  for (const auto& sc : suite) {
    if (!only.empty() && sc.id != only) continue;
    const auto res = env::eval_scenario(sc, cfg.plant, cal.params, cfg.env);
    run.write("trajectory-" + sc.id + ".tsv", io::format_trajectory(res.trajectory, sc.id));
    out << sc.id;
    if (res.failed) {
      out << "  FAILED " << res.failure << "\n";
      any_failed = true;
    } else {
      const auto& t = res.trajectory;
      const auto m = eval::metrics(t.e_t, t.u_vlv, t.t_d, t.dt);
      out << "  MAE " << fixed(m.mae) << "  RMSE " << fixed(m.rmse) << "  reward "
          << fixed(env::evaluation_reward(res, cfg.env)) << "\n";
    }
    ++done;
  }
  if (done == 0) throw ConfigError("no scenario matches \"" + only + "\"");
  run.finish();
  out << "wrote " << done << " trajectories to " << run.dir().string() << "\n";
  return any_failed ? kRuntimeFailure : kSuccess;
}

int train(const std::string& cfg_path, const std::string& stats_override, std::optional<std::uint64_t> seed,
          bool quiet, const OutputOptions& opt, const std::vector<std::string>& args, std::ostream& out) {
  auto cfg = io::load_run_config(cfg_path);
  if (seed) cfg.seed = *seed;
  const std::string stats_path = !stats_override.empty() ? stats_override : resolve(cfg_path, cfg.stats_file).string();
  if (stats_path.empty()) throw ConfigError(cfg_path + ": stats_file is required for training");
  const auto stats = io::load_statistics(stats_path);

  Run run("train", args, opt, cfg.output_dir);
  run.input(cfg_path);
  run.input(stats_path);
  run.seed("seed", cfg.seed);
  run.write("config.json", io::format_run_config(cfg));

  const auto setup = cfg.thermal_setup(stats);
  agent::Agent agent(cfg.agent_config());
  const auto tcfg = cfg.train_config();
  const auto result = agent::train(
      agent, [&](std::size_t) { return std::make_unique<env::ThermalTuningEnv>(setup); }, tcfg,
      [&](const agent::EpisodeLogRow& row) {
        if (quiet || (row.episode + 1) % 10 != 0) return;
        out << "episode " << row.episode + 1 << "  steps " << row.steps << "  reward "
            << fixed(row.reward_mean) << "  alpha " << fixed(row.alpha, 5) << "\n";
      });

  run.write("training_log.tsv", io::format_training_log(result.log));
  run.write("calibration.txt", io::format_calibration({result.best, cfg.env.limits}));
  run.write("conservative.txt", io::format_calibration({cfg.episode.conservative(), cfg.env.limits}));
  agent.save(run.dir() / "agent.ckpt");
  run.output(run.dir() / "agent.ckpt");
  run.finish();
  out << "best episode " << result.best_episode << " (env " << result.best_env << ") reward "
      << fixed(result.best_reward) << "\n";
  out << "wrote " << run.dir().string() << "\n";
  return kSuccess;
}

int evaluate(const std::vector<std::string>& cals, const std::string& suite_path,
             const std::string& cfg_path, unsigned threads, const OutputOptions& opt,
             const std::vector<std::string>& args, std::ostream& out) {
  const auto cfg = config_or_default(cfg_path);
  std::vector<eval::LabeledSet> sets;
  for (const auto& spec : cals) {
    // label=path, or the file stem as label
    const auto eq = spec.find('=');
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    const std::string label = eq == std::string::npos ? fs::path(path).stem().string() : spec.substr(0, eq);
    sets.push_back({label, io::load_calibration(path).params});
  }
  const auto suite = synthesized(io::load_suite(suite_path), cfg);
  const auto table = eval::compare(sets, suite, cfg.plant, cfg.env, std::max(1u, threads));

  Run run("evaluate", args, opt, cfg.output_dir);
  for (const auto& spec : cals) {
    const auto eq = spec.find('=');
    run.input(eq == std::string::npos ? spec : spec.substr(eq + 1));
  }
  run.input(suite_path);
  run.write("report.tsv", eval::format_table(table));

  std::ostringstream summary;
  summary << "label\tmean_MAE\tmean_RMSE\tfailed";
  if (sets.size() >= 2) summary << "\tbest_MAE_share";
  summary << "\n";
  for (std::size_t s = 0; s < sets.size(); ++s) {
    double mae = 0.0, rmse = 0.0;
    std::size_t failed = 0, best = 0;
    for (std::size_t k = 0; k < suite.size(); ++k) {
      const auto& row = table.at(k, s);
      mae += row.report.mae;
      rmse += row.report.rmse;
      failed += row.report.failed;
      best += row.best[0];
    }
    const double n = static_cast<double>(suite.size());
    summary << sets[s].label << '\t' << fixed(mae / n) << '\t' << fixed(rmse / n) << '\t' << failed;
    if (sets.size() >= 2) summary << '\t' << fixed(static_cast<double>(best) / n, 3);
    summary << "\n";
  }
  run.write("summary.tsv", summary.str());
  run.finish();
  out << summary.str() << "wrote " << run.dir().string() << "\n";
  return kSuccess;
}

int export_calibration(const std::string& cfg_path, const std::string& checkpoint, std::uint64_t episode_seed,
                       const OutputOptions& opt, const std::vector<std::string>& args, std::ostream& out) {
  const auto cfg = config_or_default(cfg_path);
  Run run("export-calibration", args, opt, cfg.output_dir);
  if (!cfg_path.empty()) run.input(cfg_path);
  control::ParameterSet ps = cfg.episode.conservative();
  if (!checkpoint.empty()) {
    // Roll the deterministic policy out for one episode from the conservative start.
    const std::string stats_path = resolve(cfg_path, cfg.stats_file).string();
    if (cfg_path.empty() || cfg.stats_file.empty()) throw ConfigError("--checkpoint needs --config with a stats_file");
    run.input(checkpoint);
    run.input(stats_path);
    run.seed("episode_seed", episode_seed);
    agent::Agent agent(cfg.agent_config());
    agent.load(checkpoint);
    env::ThermalTuningEnv env(cfg.thermal_setup(io::load_statistics(stats_path)));
    auto step = env.reset(episode_seed);
    Rng unused(0);
    for (std::size_t k = 0; k < cfg.train.steps_per_episode; ++k) {
      const auto action = agent.act(agent::pack(step.observation, step.mask, cfg.env.window), false, unused);
      step = env.step(action);
    }
    ps = env.parameters();
  }
  run.write("calibration.txt", io::format_calibration({ps, cfg.env.limits}));
  run.finish();
  out << "wrote " << (run.dir() / "calibration.txt").string() << "\n";
  return kSuccess;
}

int plot_data(const std::string& log_path, const std::string& traj_path, std::size_t window,
              const OutputOptions& opt, const std::vector<std::string>& args, std::ostream& out) {
  if (log_path.empty() == traj_path.empty()) throw ConfigError("give exactly one of --log or --trajectory");
  Run run("plot-data", args, opt, "");
  if (!log_path.empty()) {
    run.input(log_path);
    const auto rows = io::parse_training_log(io::read_text(log_path), log_path);
    run.write("reward_curve.tsv", io::format_reward_curve(io::reward_curve(rows, window)));
    out << "episodes " << rows.size() << "\n";
  } else {
    run.input(traj_path);
    const auto traces = io::parse_trajectory(io::read_text(traj_path), traj_path);
    run.write("signals-" + traces.scenario_id + ".tsv", io::format_signal_traces(traces));
    out << "samples " << traces.time.size() << "\n";
  }
  run.finish();
  out << "wrote " << run.dir().string() << "\n";
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tunes gain-scheduled PI calibrations of a simulated BEV thermal system"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  OutputOptions opt;
  const std::vector<std::string> recorded(args.begin() + (args.empty() ? 0 : 1), args.end());

  std::vector<std::string> usage;
  std::string out_path, stats_path, cfg_path, cal_path, suite_path, scenario_id, checkpoint, log_path, traj_path;
  std::vector<std::string> cals;
  std::size_t count = 50, window = 15;
  std::uint64_t seed = 0;
  double p_edge = 0.05;
  unsigned threads = 1;
  bool quiet = false;

  auto* fit = app.add_subcommand("fit-stats", "Fit per-variable usage statistics");
  fit->add_option("--usage", usage, "Usage dataset (repeatable)")->required();
  fit->add_option("--out", out_path, "Also write the statistics here");
  add_output_options(fit, opt);

  auto* gen = app.add_subcommand("gen-scenarios", "Sample a scenario suite from statistics");
  gen->add_option("--stats", stats_path, "Statistics file from fit-stats")->required();
  gen->add_option("--count", count, "Number of scenarios");
  gen->add_option("--seed", seed, "Suite seed");
  gen->add_option("--p-edge", p_edge, "Edge-case probability");
  gen->add_option("--out", out_path, "Also write the suite here");
  add_output_options(gen, opt);

  auto* sim = app.add_subcommand("simulate", "Closed-loop simulation with one calibration, trajectory dumps");
  sim->add_option("--calibration", cal_path, "Calibration text file")->required();
  sim->add_option("--suite", suite_path, "Scenario suite")->required();
  sim->add_option("--config", cfg_path, "Run config (defaults if omitted)");
  sim->add_option("--scenario", scenario_id, "Only this scenario id");
  add_output_options(sim, opt);

  auto* tr = app.add_subcommand("train", "Train the agent and export the best calibration");
  tr->add_option("--config", cfg_path, "Run config")->required();
  tr->add_option("--stats", stats_path, "Override the configured stats file");
  std::optional<std::uint64_t> train_seed;
  tr->add_option("--seed", train_seed, "Override the configured seed");
  tr->add_flag("--quiet", quiet, "No per-episode progress");
  add_output_options(tr, opt);

  auto* ev = app.add_subcommand("evaluate", "Compare calibrations on a scenario suite");
  ev->add_option("--calibration", cals, "Calibration file or label=file (repeatable)")->required();
  ev->add_option("--suite", suite_path, "Scenario suite")->required();
  ev->add_option("--config", cfg_path, "Run config (defaults if omitted)");
  ev->add_option("--threads", threads, "Scenario workers")->check(CLI::Range(1u, 256u));
  add_output_options(ev, opt);

  auto* ex = app.add_subcommand("export-calibration", "Write the conservative or a policy-tuned calibration");
  ex->add_option("--config", cfg_path, "Run config (defaults if omitted)");
  ex->add_option("--checkpoint", checkpoint, "Agent checkpoint; rolls out one deterministic episode");
  ex->add_option("--episode-seed", seed, "Scenario seed of the policy rollout");
  add_output_options(ex, opt);

  auto* plot = app.add_subcommand("plot-data", "Plot-ready series from a training log or trajectory");
  plot->add_option("--log", log_path, "Training log");
  plot->add_option("--trajectory", traj_path, "Trajectory from simulate");
  plot->add_option("--window", window, "Rolling window in episodes")->check(CLI::PositiveNumber);
  add_output_options(plot, opt);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*fit) return fit_stats(usage, out_path, opt, recorded, out);
    if (*gen) return gen_scenarios(stats_path, count, seed, p_edge, out_path, opt, recorded, out);
    if (*sim) return simulate(cal_path, suite_path, cfg_path, scenario_id, opt, recorded, out);
    if (*tr) return train(cfg_path, stats_path, train_seed, quiet, opt, recorded, out);
    if (*ev) return evaluate(cals, suite_path, cfg_path, threads, opt, recorded, out);
    if (*ex) return export_calibration(cfg_path, checkpoint, seed, opt, recorded, out);
    if (*plot) return plot_data(log_path, traj_path, window, opt, recorded, out);
  } catch (const io::CardinalityError& e) {
    err << "error: cardinality: " << e.what() << "\n";
    return kUsageError;
  } catch (const ParseError& e) {
    err << "error: parse: " << e.what() << "\n";
    return kUsageError;
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << "\n";
    return kUsageError;
  } catch (const InsufficientData& e) {
    err << "error: InsufficientData: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kUsageError;
}

}  // namespace thermotune::cli
