#include "thermotune/io/series.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "thermotune/error.hpp"
#include "thermotune/io/files.hpp"

namespace thermotune::io {

namespace {

// Shortest text that reads back to the same double.
std::string num(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

constexpr const char* kLogHeader =
    "episode\tsteps\treward_mean\treward_std\talpha\tcritic_loss\tactor_loss\tbaseline_mean";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) return out;
    start = tab + 1;
  }
}

double field(const std::string& s, const std::string& source, int line) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) throw ParseError(source, line, "not a number: \"" + s + "\"");
  return x;
}

std::string expect_version_line(std::istringstream& in, std::string_view format,
                                 const std::string& source, int& line) {
  std::string first;
  if (!std::getline(in, first)) throw ParseError(source, 1, "empty file");
  ++line;
  std::istringstream words(first);
  std::string hash, fmt, version;
  words >> hash >> fmt >> version;
  if (hash != "#" || fmt != format) {
    throw ParseError(source, line, "expected \"# " + std::string(format) + " <version>\"");
  }
  if (version != std::to_string(kFormatVersion)) {
    throw ParseError(source, line, "unsupported " + std::string(format) + " version " + version);
  }
  std::string rest;
  std::getline(words, rest);
  return rest;
}

}  // namespace

std::string format_training_log(const std::vector<agent::EpisodeLogRow>& rows) {
  std::ostringstream out;
  out << "# " << kTrainingLogFormat << ' ' << kFormatVersion << "\n" << kLogHeader << "\n";
  for (const auto& r : rows) {
    out << r.episode << '\t' << r.steps << '\t' << num(r.reward_mean) << '\t' << num(r.reward_std)
        << '\t' << num(r.alpha) << '\t' << num(r.critic_loss) << '\t' << num(r.actor_loss) << '\t'
        << num(r.baseline_mean) << "\n";
  }
  return out.str();
}

std::vector<agent::EpisodeLogRow> parse_training_log(std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  int line = 0;
  expect_version_line(in, kTrainingLogFormat, source, line);
  std::string s;
  if (!std::getline(in, s) || s != kLogHeader) throw ParseError(source, line + 1, "unexpected column header");
  ++line;
  std::vector<agent::EpisodeLogRow> rows;
  while (std::getline(in, s)) {
    ++line;
    if (s.empty()) continue;
    const auto f = split_tabs(s);
    if (f.size() != 8) throw ParseError(source, line, "expected 8 columns");
    agent::EpisodeLogRow r;
    const double ep = field(f[0], source, line), st = field(f[1], source, line);
    if (ep < 0 || st < 0 || ep != std::floor(ep) || st != std::floor(st)) {
      throw ParseError(source, line, "episode and steps must be non-negative integers");
    }
    r.episode = static_cast<std::size_t>(ep);
    r.steps = static_cast<std::size_t>(st);
    r.reward_mean = field(f[2], source, line);
    r.reward_std = field(f[3], source, line);
    r.alpha = field(f[4], source, line);
    r.critic_loss = field(f[5], source, line);
    r.actor_loss = field(f[6], source, line);
    r.baseline_mean = field(f[7], source, line);
    rows.push_back(r);
  }
  return rows;
}

RewardCurve reward_curve(const std::vector<agent::EpisodeLogRow>& rows, std::size_t window) {
  if (window == 0) throw Error("rolling window must be positive");
  RewardCurve c;
  for (const auto& r : rows) {
    c.episode.push_back(static_cast<double>(r.episode));
    c.reward.push_back(r.reward_mean);
    c.baseline.push_back(r.baseline_mean);
  }
  c.rolling_mean = agent::rolling_mean(c.reward, window);
  for (std::size_t n = 0; n < c.reward.size(); ++n) {
    const std::size_t first = n + 1 >= window ? n + 1 - window : 0;
    const double m = c.rolling_mean[n];
    double ss = 0.0;
    for (std::size_t k = first; k <= n; ++k) ss += (c.reward[k] - m) * (c.reward[k] - m);
    const double sd = std::sqrt(ss / static_cast<double>(n + 1 - first));
    c.band_lo.push_back(m - sd);
    c.band_hi.push_back(m + sd);
  }
  return c;
}

std::string format_reward_curve(const RewardCurve& c) {
  std::ostringstream out;
  out << "episode\treward\trolling_mean\tband_lo\tband_hi\tbaseline\n";
  for (std::size_t n = 0; n < c.reward.size(); ++n) {
    out << num(c.episode[n]) << '\t' << num(c.reward[n]) << '\t' << num(c.rolling_mean[n]) << '\t'
        << num(c.band_lo[n]) << '\t' << num(c.band_hi[n]) << '\t' << num(c.baseline[n]) << "\n";
  }
  return out.str();
}

SignalTraces parse_trajectory(std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  int line = 0;
  SignalTraces t;
  std::istringstream rest(expect_version_line(in, kTrajectoryFormat, source, line));
  std::string key;
  rest >> key >> t.scenario_id;
  std::string s;
  if (!std::getline(in, s) || s != "time_s\te_T_K\tu_vlv\tv_m_per_s\tdT_amb_K") {
    throw ParseError(source, line + 1, "unexpected column header");
  }
  ++line;
  while (std::getline(in, s)) {
    ++line;
    if (s.empty()) continue;
    const auto f = split_tabs(s);
    if (f.size() != 5) throw ParseError(source, line, "expected 5 columns");
    t.time.push_back(field(f[0], source, line));
    t.e_t.push_back(field(f[1], source, line));
    t.u_vlv.push_back(field(f[2], source, line));
    t.speed.push_back(field(f[3], source, line));
    t.dt_amb.push_back(field(f[4], source, line));
  }
  if (t.time.empty()) throw ParseError(source, 0, "trajectory without samples");
  return t;
}

std::string format_signal_traces(const SignalTraces& t) {
  std::ostringstream out;
  out << "# scenario " << t.scenario_id << "\n";
  out << "time_s\te_T_K\tu_vlv\tv_m_per_s\tdT_amb_K\n";
  for (std::size_t n = 0; n < t.time.size(); ++n) {
    out << num(t.time[n]) << '\t' << num(t.e_t[n]) << '\t' << num(t.u_vlv[n]) << '\t'
        << num(t.speed[n]) << '\t' << num(t.dt_amb[n]) << "\n";
  }
  return out.str();
}

}  // namespace thermotune::io
