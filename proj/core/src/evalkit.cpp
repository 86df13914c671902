#include "thermotune/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <thread>

#include "thermotune/error.hpp"

namespace thermotune::eval {

MetricReport metrics(std::span<const double> e_t, std::span<const double> u_vlv,
                     std::span<const double> t_d, double dt) {
  const std::size_t n = e_t.size();
  if (n < 2) throw TooShort("metrics: need at least 2 samples, got " + std::to_string(n));
  if (u_vlv.size() != n || t_d.size() != n) throw ShapeMismatch("metrics: length mismatch");
  MetricReport r;
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (double e : e_t) {
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  r.mae = abs_sum / static_cast<double>(n);
  r.rmse = std::sqrt(sq_sum / static_cast<double>(n));
  double rate_sq = 0.0;
  double variation = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double rate = (u_vlv[k + 1] - u_vlv[k]) / dt;
    rate_sq += rate * rate;
    variation += std::abs(t_d[k + 1] - t_d[k]);
  }
  r.ms_udot = rate_sq / static_cast<double>(n);
  r.mtv_y = variation / static_cast<double>(n - 1);
  return r;
}

namespace {

ComparisonRow evaluate_one(const LabeledSet& set, const scenario::Scenario& sc,
                           const plant::PlantParams& theta, const env::EnvConfig& cfg) {
  const auto result = env::eval_scenario(sc, theta, set.params, cfg);
  ComparisonRow row;
  const auto& tr = result.trajectory;
  if (result.failed || tr.size() < 2) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    row.report.mae = row.report.rmse = row.report.ms_udot = row.report.mtv_y = inf;
    row.report.failed = true;
  } else {
    row.report = metrics(tr.e_t, tr.u_vlv, tr.t_d, tr.dt);
  }
  row.report.scenario_id = sc.id;
  row.report.label = set.label;
  row.reward = env::evaluation_reward(result, cfg);
  return row;
}

double metric_value(const MetricReport& r, std::size_t k) {
  switch (k) {
    case 0: return r.mae;
    case 1: return r.rmse;
    case 2: return r.ms_udot;
    default: return r.mtv_y;
  }
}

}  // namespace

ComparisonTable compare(const std::vector<LabeledSet>& sets,
                        const std::vector<scenario::Scenario>& suite,
                        const plant::PlantParams& theta, const env::EnvConfig& cfg,
                        unsigned threads) {
  if (sets.empty() || suite.empty()) throw Error("compare: need at least one set and one scenario");
  ComparisonTable table;
  for (const auto& s : sets) table.labels.push_back(s.label);
  for (const auto& sc : suite) table.scenarios.push_back(sc.id);
  const std::size_t total = sets.size() * suite.size();
  table.rows.resize(total);

  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t k = begin; k < total; k += stride) {
      table.rows[k] = evaluate_one(sets[k % sets.size()], suite[k / sets.size()], theta, cfg);
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }

  if (sets.size() >= 2) {
    for (std::size_t s = 0; s < suite.size(); ++s) {
      for (std::size_t m = 0; m < kMetricCount; ++m) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < sets.size(); ++k) {
          const auto& row = table.rows[s * sets.size() + k];
          if (!row.report.failed) best = std::min(best, metric_value(row.report, m));
        }
        for (std::size_t k = 0; k < sets.size(); ++k) {
          auto& row = table.rows[s * sets.size() + k];
          row.best[m] = !row.report.failed && metric_value(row.report, m) == best;
        }
      }
    }
  }
  return table;
}

std::string format_table(const ComparisonTable& table) {
  const bool flags_column = table.labels.size() >= 2;
  std::string out = "scenario\tlabel\tMAE\tRMSE\tMS_udot\tMTV_y\treward";
  out += flags_column ? "\tbest\n" : "\n";
  char buf[64];
  for (const auto& row : table.rows) {
    out += row.report.scenario_id + "\t" + row.report.label;
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      std::snprintf(buf, sizeof buf, "\t%.9g", metric_value(row.report, m));
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "\t%.9g", row.reward);
    out += buf;
    if (!flags_column) {
      out += "\n";
      continue;
    }
    std::string flags;
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      if (!row.best[m]) continue;
      if (!flags.empty()) flags += ",";
      flags += kMetricNames[m];
    }
    if (row.report.failed) flags = "FAILED";
    out += "\t" + (flags.empty() ? std::string("-") : flags) + "\n";
  }
  return out;
}

}  // namespace thermotune::eval
