#include "thermotune/io/run_config.hpp"

#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>

#include "thermotune/error.hpp"
#include "thermotune/io/files.hpp"

namespace thermotune::io {

using nlohmann::json;

namespace {

/// Reads or writes one JSON object; every field declares its range once.
class Binder {
 public:
  enum class Mode { Read, Write };

  Binder(Mode mode, json& node, std::string path) : mode_(mode), node_(node), path_(std::move(path)) {
    if (mode_ == Mode::Read && !node_.is_object()) fail("", "expected an object");
  }

  void real(const char* key, double& v, double lo, double hi, bool open_lo = false) {
    if (mode_ == Mode::Write) {
      node_[key] = v;
      return;
    }
    if (!take(key)) return;
    const auto& x = node_[key];
    if (!x.is_number()) fail(key, "expected a number");
    const double d = x.get<double>();
    if (!std::isfinite(d) || d < lo || d > hi || (open_lo && d == lo)) {
      fail(key, "value " + x.dump() + " outside " + (open_lo ? "(" : "[") + x_str(lo) + ", " + x_str(hi) + "]");
    }
    v = d;
  }

  void positive(const char* key, double& v, double hi) { real(key, v, 0.0, hi, true); }

  template <class T>
  void integer(const char* key, T& v, long long lo, long long hi) {
    if (mode_ == Mode::Write) {
      node_[key] = v;
      return;
    }
    if (!take(key)) return;
    const auto& x = node_[key];
    if (!x.is_number_integer()) fail(key, "expected an integer");
    const long long d = x.get<long long>();
    if (d < lo || d > hi) fail(key, "value " + x.dump() + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    v = static_cast<T>(d);
  }

  void seed(const char* key, std::uint64_t& v) {
    if (mode_ == Mode::Write) {
      node_[key] = v;
      return;
    }
    if (!take(key)) return;
    if (!node_[key].is_number_unsigned()) fail(key, "expected a non-negative integer");
    v = node_[key].get<std::uint64_t>();
  }

  void boolean(const char* key, bool& v) {
    if (mode_ == Mode::Write) {
      node_[key] = v;
      return;
    }
    if (!take(key)) return;
    if (!node_[key].is_boolean()) fail(key, "expected true or false");
    v = node_[key].get<bool>();
  }

  void text(const char* key, std::string& v) {
    if (mode_ == Mode::Write) {
      node_[key] = v;
      return;
    }
    if (!take(key)) return;
    if (!node_[key].is_string()) fail(key, "expected a string");
    v = node_[key].get<std::string>();
  }

  template <class T>
  void list(const char* key, std::vector<T>& v, double lo, double hi, std::size_t min_size,
            std::size_t max_size) {
    if (mode_ == Mode::Write) {
      node_[key] = v;
      return;
    }
    if (!take(key)) return;
    const auto& x = node_[key];
    if (!x.is_array() || x.size() < min_size || x.size() > max_size) {
      fail(key, "expected an array of " + std::to_string(min_size) + " to " + std::to_string(max_size) + " numbers");
    }
    std::vector<T> out;
    for (const auto& e : x) {
      if (!e.is_number() || (std::is_integral_v<T> && !e.is_number_integer())) fail(key, "bad array element " + e.dump());
      const double d = e.get<double>();
      if (!std::isfinite(d) || d < lo || d > hi) fail(key, "element " + e.dump() + " out of range");
      out.push_back(e.get<T>());
    }
    v = std::move(out);
  }

  void axis(const char* key, control::Axis& a) {
    std::vector<double> v(a.begin(), a.end());
    list(key, v, -1e6, 1e6, a.size(), a.size());
    for (std::size_t k = 1; k < v.size(); ++k) {
      if (!(v[k] > v[k - 1])) fail(key, "breakpoints must increase strictly");
    }
    std::copy(v.begin(), v.end(), a.begin());
  }

  template <class F>
  void object(const char* key, F&& fill) {
    if (mode_ == Mode::Write) {
      json child = json::object();
      Binder b(mode_, child, path_ + key + ".");
      fill(b);
      node_[key] = std::move(child);
      return;
    }
    if (!take(key)) return;
    Binder b(mode_, node_[key], path_ + key + ".");
    fill(b);
    b.finish();
  }

  void finish() const {
    if (mode_ != Mode::Read) return;
    for (const auto& [key, _] : node_.items()) {
      if (!used_.count(key)) fail(key, "unknown key");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(path_ + key + ": " + what);
  }

 private:
  static std::string x_str(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return json(x).dump();
  }

  bool take(const char* key) {
    used_.insert(key);
    return node_.contains(key);
  }

  Mode mode_;
  json& node_;
  std::string path_;
  std::set<std::string> used_;
};

void bind(Binder& b, RunConfig& c) {
  b.seed("seed", c.seed);
  b.boolean("deterministic", c.deterministic);
  b.integer("threads", c.threads, 1, 256);
  b.text("output_dir", c.output_dir);
  b.text("stats_file", c.stats_file);

  b.object("plant", [&](Binder& p) {
    auto& t = c.plant;
    p.positive("k_hyd", t.k_hyd, 1e3);
    p.positive("c_1", t.c_1, 1e9);
    p.positive("c_2", t.c_2, 1e9);
    p.positive("c_mix", t.c_mix, 1e9);
    p.positive("rho_cp", t.rho_cp, 1e7);
    p.real("k_he0", t.k_he0, 0.0, 1e7);
    p.positive("vair_ref", t.vair_ref, 1e6);
    p.real("c_fan", t.c_fan, 0.0, 1e6);
    p.real("c_shu", t.c_shu, 0.0, 1e6);
    p.list("eta_el", t.eta_el, 1e-3, 1.0, 1, 8);
    p.real("k_drag", t.k_drag, 0.0, 1e6);
    p.positive("pipe_vol_1", t.pipe_vol_1, 1e3);
    p.positive("pipe_vol_2", t.pipe_vol_2, 1e3);
    p.positive("min_flow", t.min_flow, 1e3);
    p.positive("dt", t.dt, 10.0);
  });

  b.object("vehicle", [&](Binder& p) {
    auto& v = c.vehicle;
    p.positive("mass", v.mass, 1e5);
    p.positive("gravity", v.gravity, 100.0);
    p.real("c_rr", v.c_rr, 0.0, 1.0);
    p.real("cd_a", v.cd_a, 0.0, 100.0);
    p.real("rho_air", v.rho_air, 0.0, 10.0);
    p.positive("eta_drive", v.eta_drive, 1.0);
    p.real("eta_regen", v.eta_regen, 0.0, 1.0);
  });

  b.object("driver", [&](Binder& p) {
    auto& d = c.driver;
    p.positive("gain", d.gain, 100.0);
    p.real("a_min", d.a_min, -50.0, -1e-6);
    p.positive("a_max", d.a_max, 50.0);
    p.positive("v_max", d.v_max, 100.0);
    p.positive("segment_min", d.segment_min, 1e5);
    p.positive("segment_max", d.segment_max, 1e5);
    p.positive("grade_knot_spacing", d.grade_knot_spacing, 1e5);
    p.real("grade_spread", d.grade_spread, 0.0, 1.0);
  });

  b.object("controller", [&](Binder& p) {
    p.axis("axis_error", c.episode.axis_error);
    p.axis("axis_ambient", c.episode.axis_ambient);
    p.positive("p_max", c.env.limits.p_max, 1e3);
    p.positive("i_max", c.env.limits.i_max, 1e3);
    p.positive("windup_limit", c.env.controller.windup_limit, 1e9);
  });

  b.object("env", [&](Binder& p) {
    auto& e = c.env;
    p.real("nominal_setpoint", e.nominal_setpoint, -50.0, 150.0);
    p.real("warmup_setpoint", e.warmup_setpoint, -50.0, 150.0);
    p.real("warmup_threshold", e.warmup_threshold, -50.0, 150.0);
    p.real("warmup_hysteresis", e.warmup_hysteresis, 0.0, 50.0);
    p.real("initial_temperature", e.initial_temperature, -50.0, 150.0);
    p.real("u_pmp", e.u_pmp, 0.0, 1.0);
    p.real("u_fan", e.u_fan, 0.0, 1.0);
    p.real("u_shu", e.u_shu, 0.0, 1.0);
    p.integer("xi_el", e.xi_el, 0, 7);
    p.integer("window", e.window, 2, 100000);
    p.positive("step_fraction", e.step_fraction, 1.0);
    p.object("reward", [&](Binder& r) {
      r.positive("b1", e.reward.b1, 1e6);
      r.real("b2", e.reward.b2, 0.0, 1e6);
      r.real("r_min", e.reward.r_min, -1e9, -1e-12);
    });
  });

  b.object("episode", [&](Binder& p) {
    auto& s = c.episode;
    p.integer("scenario_batch", s.scenario_batch, 1, 10000);
    p.real("p_edge", s.p_edge, 0.0, 1.0);
    p.real("theta_jitter", s.theta_jitter, 0.0, 0.9);
    p.real("init_jitter", s.init_jitter, 0.0, 0.9);
    p.real("conservative_p", s.conservative_p, 0.0, 1e3);
    p.real("conservative_i", s.conservative_i, 0.0, 1e3);
  });

  b.object("agent", [&](Binder& p) {
    auto& a = c.agent;
    p.real("gamma", a.gamma, 0.0, 0.999999);
    p.positive("lr", a.lr, 1.0);
    p.integer("critic_updates", a.critic_updates, 0, 1000);
    p.integer("actor_updates", a.actor_updates, 0, 1000);
    p.integer("batch_size", a.batch_size, 1, 1000000);
    p.positive("tau", a.tau, 1.0);
    p.positive("initial_alpha", a.initial_alpha, 1e3);
    p.boolean("auto_alpha", a.auto_alpha);
    p.positive("reward_scale", a.reward_scale, 1e6);
    p.integer("replay_capacity", a.replay_capacity, 1, 100000000);
    p.integer("warmup", a.warmup, 0, 100000000);
    p.object("network", [&](Binder& n) {
      auto& net = a.net;
      n.integer("context_hidden", net.context_hidden, 1, 65536);
      n.integer("context_latent", net.context_latent, 1, 65536);
      n.integer("lstm_hidden", net.lstm_hidden, 1, 65536);
      n.integer("lstm_layers", net.lstm_layers, 1, 16);
      n.list("encoder_channels", net.encoder_channels, 1, 65536, 2, 16);
      n.list("encoder_kernels", net.encoder_kernels, 1, 64, 1, 15);
      n.list("decoder_channels", net.decoder_channels, 1, 65536, 2, 16);
      n.list("decoder_kernels", net.decoder_kernels, 1, 64, 1, 15);
      n.integer("critic_hidden", net.critic_hidden, 1, 65536);
      n.real("dropout", net.dropout, 0.0, 0.99);
    });
  });

  b.object("train", [&](Binder& p) {
    auto& t = c.train;
    p.integer("envs", t.envs, 1, 4096);
    p.integer("steps_per_episode", t.steps_per_episode, 1, 1000000);
    p.integer("episodes", t.episodes, 1, 10000000);
    p.integer("max_total_steps", t.max_total_steps, 0, 1000000000000LL);
    p.positive("best_window", t.best_window, 1.0);
    p.boolean("frozen_baseline", t.frozen_baseline);
  });

  b.object("evaluation", [&](Binder& p) {
    p.integer("suite_size", c.evaluation.suite_size, 1, 100000);
    p.real("p_edge", c.evaluation.p_edge, 0.0, 1.0);
    p.seed("seed", c.evaluation.seed);
  });
}

json to_json(const RunConfig& cfg) {
  RunConfig copy = cfg;
  json doc = {{"format", kConfigFormat}, {"version", kFormatVersion}};
  Binder b(Binder::Mode::Write, doc, "");
  bind(b, copy);
  return doc;
}

void cross_check(const RunConfig& c) {
  auto wrap = [](const char* what, auto&& f) {
    try {
      f();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string(what) + ": " + e.what());
    }
  };
  wrap("plant", [&] { c.plant.validate(); });
  wrap("env", [&] { c.env.validate(); });
  wrap("agent", [&] { c.agent_config().validate(); });
  wrap("train", [&] { c.train_config().validate(); });
  if (static_cast<std::size_t>(c.env.xi_el) >= c.plant.eta_el.size()) {
    throw ConfigError("env.xi_el: no drive efficiency for electrical state " + std::to_string(c.env.xi_el));
  }
  if (c.episode.conservative_p > c.env.limits.p_max || c.episode.conservative_i > c.env.limits.i_max) {
    throw ConfigError("episode: conservative gains exceed controller limits");
  }
  if (c.driver.segment_min > c.driver.segment_max) {
    throw ConfigError("driver: segment_min exceeds segment_max");
  }
}

}  // namespace

void RunConfig::validate() const {
  // Re-reading the serialized form applies the same range checks as loading.
  const RunConfig back = parse_run_config(to_json(*this).dump(), "config");
  (void)back;
}

env::ThermalEnvSetup RunConfig::thermal_setup(const scenario::StatisticsSet& stats) const {
  env::ThermalEnvSetup s;
  s.stats = stats;
  s.edge_cases = scenario::default_edge_cases();
  s.plant = plant;
  s.vehicle = vehicle;
  s.driver = driver;
  s.env = env;
  s.episode = episode;
  return s;
}

agent::AgentConfig RunConfig::agent_config() const {
  agent::AgentConfig a = agent;
  a.window = env.window;
  a.seed = seed;
  return a;
}

agent::TrainConfig RunConfig::train_config() const {
  agent::TrainConfig t = train;
  t.seed = seed;
  t.threads = deterministic ? 1 : threads;
  return t;
}

bool RunConfig::operator==(const RunConfig& other) const { return to_json(*this) == to_json(other); }

RunConfig parse_run_config(std::string_view text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(source + ": expected a JSON object");
  if (doc.value("format", std::string()) != kConfigFormat) {
    throw ConfigError(source + ": expected format \"" + std::string(kConfigFormat) + "\"");
  }
  if (!doc.contains("version") || doc["version"] != kFormatVersion) {
    throw ConfigError(source + ": unsupported config version " + (doc.contains("version") ? doc["version"].dump() : "(missing)"));
  }
  RunConfig cfg;
  try {
    Binder b(Binder::Mode::Read, doc, "");
    int version = 0;
    b.integer("version", version, kFormatVersion, kFormatVersion);
    std::string format;
    b.text("format", format);
    bind(b, cfg);
    b.finish();
    cross_check(cfg);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text(path), path.string());
}

std::string format_run_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace thermotune::io
