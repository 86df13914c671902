#include "thermotune/io/files.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <sstream>

namespace thermotune::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Shortest text that reads back to the same double.
std::string num(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

int line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

json parse_json(std::string_view text, const std::string& source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(source, line_of(text, e.byte), e.what());
  }
}

void check_header(const json& doc, std::string_view format, const std::string& source) {
  if (!doc.is_object()) throw ParseError(source, 0, "expected a JSON object");
  if (!doc.contains("format") || doc["format"] != format) {
    throw ParseError(source, 0, "expected format \"" + std::string(format) + "\"");
  }
  if (!doc.contains("version") || !doc["version"].is_number_integer()) {
    throw ParseError(source, 0, "missing integer version");
  }
  const int v = doc["version"].get<int>();
  if (v != kFormatVersion) {
    throw ParseError(source, 0, "unsupported " + std::string(format) + " version " + std::to_string(v));
  }
}

double number_at(const json& obj, const std::string& key, const std::string& source,
                 const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_number()) {
    throw ParseError(source, 0, where + ": missing numeric field \"" + key + "\"");
  }
  return obj[key].get<double>();
}

scenario::LayerValues layers_from(const json& obj, const std::string& source, const std::string& where) {
  if (!obj.is_object()) throw ParseError(source, 0, where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!scenario::variable_from_name(key)) {
      throw ParseError(source, 0, where + ": unknown variable \"" + key + "\"");
    }
  }
  scenario::LayerValues v;
  for (auto var : scenario::kVariables) {
    v[var] = number_at(obj, std::string(scenario::name(var)), source, where);
  }
  return v;
}

json layers_to(const scenario::LayerValues& v) {
  json obj = json::object();
  for (auto var : scenario::kVariables) obj[std::string(scenario::name(var))] = v[var];
  return obj;
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

scenario::UsageDataset parse_usage(std::string_view text, const std::string& source) {
  scenario::UsageDataset data;
  data.provenance = source;
  if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) {
    return data;
  }
  const json doc = parse_json(text, source);
  check_header(doc, kUsageFormat, source);
  if (doc.contains("provenance") && doc["provenance"].is_string()) {
    data.provenance = doc["provenance"].get<std::string>();
  }
  if (!doc.contains("records") || !doc["records"].is_array()) {
    throw ParseError(source, 0, "missing \"records\" array");
  }
  const auto& records = doc["records"];
  for (std::size_t r = 0; r < records.size(); ++r) {
    data.records.push_back(layers_from(records[r], source, "record " + std::to_string(r)));
  }
  data.validate();
  return data;
}

scenario::UsageDataset load_usage(const fs::path& path) {
  return parse_usage(read_text(path), path.string());
}

std::string format_statistics(const scenario::StatisticsSet& stats, const std::string& provenance) {
  json vars = json::array();
  for (const auto& s : stats) {
    vars.push_back({{"variable", std::string(scenario::name(s.variable))},
                    {"layer", scenario::layer(s.variable)},
                    {"mu", s.mu},
                    {"sigma", s.sigma},
                    {"clip_lo", s.clip_lo},
                    {"clip_hi", s.clip_hi}});
  }
  const json doc = {{"format", kStatsFormat},
                    {"version", kFormatVersion},
                    {"provenance", provenance},
                    {"variables", vars}};
  return doc.dump(1) + "\n";
}

scenario::StatisticsSet parse_statistics(std::string_view text, const std::string& source) {
  const json doc = parse_json(text, source);
  check_header(doc, kStatsFormat, source);
  if (!doc.contains("variables") || !doc["variables"].is_array()) {
    throw ParseError(source, 0, "missing \"variables\" array");
  }
  scenario::StatisticsSet out;
  std::array<bool, scenario::kVariableCount> seen{};
  for (const auto& v : doc["variables"]) {
    const auto name = v.value("variable", std::string());
    const auto var = scenario::variable_from_name(name);
    if (!var) throw ParseError(source, 0, "unknown variable \"" + name + "\"");
    const auto k = static_cast<std::size_t>(*var);
    if (seen[k]) throw ParseError(source, 0, "duplicate variable \"" + name + "\"");
    seen[k] = true;
    out[k] = {*var, number_at(v, "mu", source, name), number_at(v, "sigma", source, name),
              number_at(v, "clip_lo", source, name), number_at(v, "clip_hi", source, name)};
    if (!(out[k].sigma >= 0.0) || !(out[k].clip_lo <= out[k].clip_hi)) {
      throw ParseError(source, 0, name + ": sigma must be >= 0 and clip_lo <= clip_hi");
    }
  }
  for (std::size_t k = 0; k < seen.size(); ++k) {
    if (!seen[k]) {
      throw ParseError(source, 0, "missing variable \"" + std::string(scenario::name(scenario::kVariables[k])) + "\"");
    }
  }
  return out;
}

scenario::StatisticsSet load_statistics(const fs::path& path) {
  return parse_statistics(read_text(path), path.string());
}

std::string format_suite(const std::vector<scenario::Scenario>& suite) {
  json items = json::array();
  for (const auto& sc : suite) {
    items.push_back({{"id", sc.id},
                     {"seed", sc.seed},
                     {"edge_case", sc.is_edge_case},
                     {"layers", layers_to(sc.layers)}});
  }
  const json doc = {{"format", kSuiteFormat}, {"version", kFormatVersion}, {"scenarios", items}};
  return doc.dump(1) + "\n";
}

std::vector<scenario::Scenario> parse_suite(std::string_view text, const std::string& source) {
  const json doc = parse_json(text, source);
  check_header(doc, kSuiteFormat, source);
  if (!doc.contains("scenarios") || !doc["scenarios"].is_array()) {
    throw ParseError(source, 0, "missing \"scenarios\" array");
  }
  std::vector<scenario::Scenario> out;
  for (const auto& item : doc["scenarios"]) {
    scenario::Scenario sc;
    sc.id = item.value("id", std::string());
    if (sc.id.empty()) throw ParseError(source, 0, "scenario without id");
    if (!item.contains("seed") || !item["seed"].is_number_unsigned()) {
      throw ParseError(source, 0, sc.id + ": missing unsigned seed");
    }
    sc.seed = item["seed"].get<std::uint64_t>();
    sc.is_edge_case = item.value("edge_case", false);
    sc.layers = layers_from(item.value("layers", json()), source, sc.id);
    if (!(sc.duration() > 0.0)) throw ParseError(source, 0, sc.id + ": duration must be positive");
    out.push_back(std::move(sc));
  }
  if (out.empty()) throw ParseError(source, 0, "empty scenario suite");
  return out;
}

std::vector<scenario::Scenario> load_suite(const fs::path& path) {
  return parse_suite(read_text(path), path.string());
}

std::string format_calibration(const Calibration& cal) {
  std::ostringstream out;
  out << "format " << kCalibrationFormat << ' ' << kFormatVersion << "\n";
  out << "# gains of the valve PI controller, rows along the error axis\n";
  out << "limits " << num(cal.limits.p_max) << ' ' << num(cal.limits.i_max) << "\n";
  for (std::size_t b = 0; b < control::kBankCount; ++b) {
    out << "bank " << b << "\n";
    for (auto kind : {control::TableKind::P, control::TableKind::I}) {
      const auto& t = cal.params.banks[b].table(kind);
      out << "table " << (kind == control::TableKind::P ? "P unit 1/K" : "I unit 1/(K*s)") << "\n";
      out << "axis_error K";
      for (double x : t.axis_i) out << ' ' << num(x);
      out << "\naxis_ambient K";
      for (double x : t.axis_j) out << ' ' << num(x);
      out << "\n";
      for (std::size_t i = 0; i < control::kTableSize; ++i) {
        out << "row";
        for (std::size_t j = 0; j < control::kTableSize; ++j) out << ' ' << num(t.at(i, j));
        out << "\n";
      }
    }
  }
  out << "end\n";
  return out.str();
}

namespace {

struct Line {
  int number = 0;
  std::vector<std::string> tokens;
};

std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> lines;
  std::istringstream in{std::string(text)};
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream words(raw);
    Line line{number, {}};
    for (std::string w; words >> w;) line.tokens.push_back(w);
    if (!line.tokens.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

double parse_number(const std::string& token, const std::string& source, int line) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || !std::isfinite(x)) {
    throw ParseError(source, line, "not a finite number: \"" + token + "\"");
  }
  return x;
}

control::Axis parse_axis(const Line& line, const std::string& source) {
  if (line.tokens.size() != 2 + control::kTableSize || line.tokens[1] != "K") {
    throw ParseError(source, line.number, line.tokens[0] + " expects the unit K and 5 breakpoints");
  }
  control::Axis a{};
  for (std::size_t k = 0; k < control::kTableSize; ++k) a[k] = parse_number(line.tokens[k + 2], source, line.number);
  for (std::size_t k = 1; k < a.size(); ++k) {
    if (!(a[k] > a[k - 1])) throw ParseError(source, line.number, "axis breakpoints must increase");
  }
  return a;
}

}  // namespace

Calibration parse_calibration(std::string_view text, const std::string& source) {
  const auto lines = tokenize(text);
  if (lines.empty()) throw ParseError(source, 0, "empty calibration");
  const auto& head = lines.front();
  if (head.tokens.size() != 3 || head.tokens[0] != "format" || head.tokens[1] != kCalibrationFormat) {
    throw ParseError(source, head.number, "expected \"format thermotune-calibration <version>\"");
  }
  if (head.tokens[2] != std::to_string(kFormatVersion)) {
    throw ParseError(source, head.number, "unsupported calibration version " + head.tokens[2]);
  }

  // Cardinality first so a missing or extra gain is reported as such.
  std::size_t gains = 0;
  for (const auto& l : lines) {
    if (l.tokens[0] == "row") gains += l.tokens.size() - 1;
  }
  if (gains != control::kParameterCount) {
    throw CardinalityError(source, 0, "expected " + std::to_string(control::kParameterCount) +
                                          " gain values (2 banks x 2 tables x 5x5), found " +
                                          std::to_string(gains));
  }

  Calibration cal;
  bool have_limits = false, ended = false;
  std::array<std::array<bool, control::kTablesPerBank>, control::kBankCount> seen{};
  int bank = -1;
  control::ParameterTable* table = nullptr;
  int axes = 0;
  std::size_t rows = 0;
  auto finish_table = [&](int line) {
    if (table && (axes != 3 || rows != control::kTableSize)) {
      throw ParseError(source, line, "incomplete table: needs both axes and 5 rows");
    }
  };

  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto& l = lines[n];
    const auto& key = l.tokens[0];
    if (ended) throw ParseError(source, l.number, "content after end");
    if (key == "limits") {
      if (l.tokens.size() != 3) throw ParseError(source, l.number, "limits expects p_max i_max");
      cal.limits.p_max = parse_number(l.tokens[1], source, l.number);
      cal.limits.i_max = parse_number(l.tokens[2], source, l.number);
      if (!(cal.limits.p_max > 0.0) || !(cal.limits.i_max > 0.0)) {
        throw ParseError(source, l.number, "limits must be positive");
      }
      have_limits = true;
    } else if (key == "bank") {
      finish_table(l.number);
      table = nullptr;
      if (l.tokens.size() != 2 || (l.tokens[1] != "0" && l.tokens[1] != "1")) {
        throw ParseError(source, l.number, "bank expects 0 or 1");
      }
      bank = l.tokens[1][0] - '0';
    } else if (key == "table") {
      finish_table(l.number);
      if (bank < 0) throw ParseError(source, l.number, "table before bank");
      if (l.tokens.size() != 4 || (l.tokens[1] != "P" && l.tokens[1] != "I") || l.tokens[2] != "unit") {
        throw ParseError(source, l.number, "table expects <P|I> unit <unit>");
      }
      const bool p = l.tokens[1] == "P";
      const std::string unit = p ? "1/K" : "1/(K*s)";
      if (l.tokens[3] != unit) throw ParseError(source, l.number, "table " + l.tokens[1] + " must use unit " + unit);
      auto& flag = seen[bank][p ? 0 : 1];
      if (flag) throw ParseError(source, l.number, "duplicate table");
      flag = true;
      table = &cal.params.banks[bank].table(p ? control::TableKind::P : control::TableKind::I);
      axes = 0;
      rows = 0;
    } else if (key == "axis_error" || key == "axis_ambient") {
      if (!table) throw ParseError(source, l.number, key + " outside a table");
      const int bit = key == "axis_error" ? 1 : 2;
      if (axes & bit) throw ParseError(source, l.number, "duplicate " + key);
      (key == "axis_error" ? table->axis_i : table->axis_j) = parse_axis(l, source);
      axes |= bit;
    } else if (key == "row") {
      if (!table) throw ParseError(source, l.number, "row outside a table");
      if (l.tokens.size() != 1 + control::kTableSize) throw ParseError(source, l.number, "row expects 5 values");
      if (rows >= control::kTableSize) throw ParseError(source, l.number, "more than 5 rows");
      for (std::size_t j = 0; j < control::kTableSize; ++j) {
        table->at(rows, j) = parse_number(l.tokens[j + 1], source, l.number);
      }
      ++rows;
    } else if (key == "end") {
      finish_table(l.number);
      table = nullptr;
      ended = true;
    } else {
      throw ParseError(source, l.number, "unknown keyword \"" + key + "\"");
    }
  }
  if (!ended) throw ParseError(source, 0, "missing end");
  if (!have_limits) throw ParseError(source, 0, "missing limits");
  for (std::size_t b = 0; b < control::kBankCount; ++b) {
    if (!seen[b][0] || !seen[b][1]) throw ParseError(source, 0, "bank " + std::to_string(b) + " is incomplete");
  }
  if (!control::is_valid(cal.params, cal.limits)) {
    throw ParseError(source, 0, "gain values outside [0, limit]");
  }
  return cal;
}

Calibration load_calibration(const fs::path& path) {
  return parse_calibration(read_text(path), path.string());
}

std::string format_trajectory(const env::Trajectory& traj, const std::string& scenario_id) {
  std::ostringstream out;
  out << "# " << kTrajectoryFormat << ' ' << kFormatVersion << " scenario " << scenario_id << "\n";
  out << "time_s\te_T_K\tu_vlv\tv_m_per_s\tdT_amb_K\n";
  for (std::size_t n = 0; n < traj.size(); ++n) {
    out << num(traj.time[n]) << '\t' << num(traj.e_t[n]) << '\t' << num(traj.u_vlv[n]) << '\t'
        << num(traj.speed[n]) << '\t' << num(traj.dt_amb[n]) << "\n";
  }
  return out.str();
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string s;
  for (unsigned int k = 0; k < len; ++k) {
    s += hex[digest[k] >> 4];
    s += hex[digest[k] & 15];
  }
  return s;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

}  // namespace thermotune::io
