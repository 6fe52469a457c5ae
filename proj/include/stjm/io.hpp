#pragma once

// File formats.
//
// Panel CSV (long format), one row per (time, location):
//   time,location,x,y,<feature>...      planar coordinates
//   time,location,lat,lon,<feature>...  geographic coordinates
// Empty fields are missing values. `time` is either a number (hours) or
// an ISO-8601 timestamp "YYYY-MM-DD[T ]HH:MM[:SS]".
//
// Schema JSON, declaring categorical features (undeclared columns are
// continuous):
//   {"features": [{"name": "windy", "kind": "categorical",
//                  "levels": ["1", "2", "3"]}, ...]}
//
// State CSV: time,location,state with 1-based state labels.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "stjm/error.hpp"
#include "stjm/fit.hpp"
#include "stjm/panel.hpp"
#include "stjm/simgen.hpp"

namespace stjm {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// CSV primitives

/// Split one CSV line. Supports double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Shortest text that reads back to the same double (max 17 significant digits).
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

// ---------------------------------------------------------------------------
// Time parsing

namespace detail {

// Days since 1970-01-01 for a proleptic Gregorian date.
constexpr long days_from_civil(long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

inline std::optional<double> parse_iso_hours(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  char sep = 0;
  int consumed = 0;
  const int n = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
  if (n < 6 || (sep != 'T' && sep != ' ')) return std::nullopt;
  std::string_view rest(s.c_str() + consumed);
  if (!rest.empty() && rest.front() == ':') {
    rest.remove_prefix(1);
    std::size_t len = 0;
    while (len < rest.size() && (std::isdigit(static_cast<unsigned char>(rest[len])) || rest[len] == '.')) ++len;
    const auto v = parse_double(rest.substr(0, len));
    if (!v) return std::nullopt;
    sec = *v;
    rest.remove_prefix(len);
  }
  if (!rest.empty() && rest != "Z") return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59) {
    return std::nullopt;
  }
  const long days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  return static_cast<double>(days) * 24.0 + h + mi / 60.0 + sec / 3600.0;
}

}  // namespace detail

/// Hours represented by a time field: a plain number is taken as hours,
/// otherwise an ISO-8601 timestamp is converted to hours since the epoch.
inline double parse_time_hours(const std::string& s) {
  if (const auto v = parse_double(s)) return *v;
  if (const auto v = detail::parse_iso_hours(s)) return *v;
  throw Error("unparseable time value '" + s + "'");
}

// ---------------------------------------------------------------------------
// Schema

inline FeatureSpec read_schema_json(const json& j, const std::vector<std::string>& columns) {
  std::map<std::string, Feature> declared;
  if (j.contains("features")) {
    for (const auto& f : j.at("features")) {
      const std::string name = f.at("name").get<std::string>();
      const std::string kind = f.value("kind", "continuous");
      if (kind == "categorical") {
        declared[name] = Feature::categorical(name, f.at("levels").get<std::vector<std::string>>());
      } else if (kind == "continuous") {
        declared[name] = Feature::continuous(name);
      } else {
        throw Error("schema: unknown feature kind '" + kind + "'");
      }
    }
  }
  std::vector<Feature> features;
  for (const auto& c : columns) {
    const auto it = declared.find(c);
    features.push_back(it == declared.end() ? Feature::continuous(c) : it->second);
    if (it != declared.end()) declared.erase(it);
  }
  if (!declared.empty()) {
    throw Error("schema declares feature '" + declared.begin()->first + "' absent from the data");
  }
  return FeatureSpec(std::move(features));
}

inline json schema_json(const FeatureSpec& spec) {
  json features = json::array();
  for (const auto& f : spec.features()) {
    json entry = {{"name", f.name}, {"kind", f.is_categorical() ? "categorical" : "continuous"}};
    if (f.is_categorical()) entry["levels"] = f.levels;
    features.push_back(std::move(entry));
  }
  return json{{"features", std::move(features)}};
}

inline void write_schema(const FeatureSpec& spec, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << schema_json(spec).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Panel ingestion / emission

/// Read a long-format panel. The time grid is the sorted union of observed
/// timestamps and tau is hours since the first one; (time, location) pairs
/// absent from the file are entirely missing.
inline PanelDataset ingest_panel(const std::filesystem::path& csv_path,
                                 const std::optional<std::filesystem::path>& schema_path = std::nullopt) {
  const auto rows = read_csv(csv_path);
  if (rows.empty()) throw Error("empty panel file " + csv_path.string());
  const auto& header = rows.front();
  auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_time = col("time");
  const auto c_loc = col("location");
  if (!c_time || !c_loc) throw Error("panel header needs 'time' and 'location' columns");
  CoordSystem system = CoordSystem::planar;
  std::optional<std::size_t> c_a = col("x"), c_b = col("y");
  if (!c_a || !c_b) {
    c_a = col("lat");
    c_b = col("lon");
    system = CoordSystem::geographic;
  }
  if (!c_a || !c_b) throw Error("panel header needs 'x','y' or 'lat','lon' columns");

  std::vector<std::size_t> feature_cols;
  std::vector<std::string> feature_names;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i == *c_time || i == *c_loc || i == *c_a || i == *c_b) continue;
    feature_cols.push_back(i);
    feature_names.push_back(header[i]);
  }
  if (feature_cols.empty()) throw Error("panel has no feature columns");

  json schema = json::object();
  if (schema_path) {
    std::ifstream in(*schema_path);
    if (!in) throw Error("cannot open schema " + schema_path->string());
    try {
      schema = json::parse(in);
    } catch (const json::exception& e) {
      throw Error("invalid schema JSON: " + std::string(e.what()));
    }
  }
  FeatureSpec spec = read_schema_json(schema, feature_names);
  const std::size_t P = spec.size();

  std::map<double, std::string> time_labels;
  std::vector<std::string> loc_ids;
  std::unordered_map<std::string, std::size_t> loc_index;
  std::vector<Coord> coords;
  struct Record {
    double hours;
    std::size_t loc;
    std::size_t row;
  };
  std::vector<Record> records;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw Error("line " + std::to_string(r + 1) + ": expected " + std::to_string(header.size()) +
                  " fields, got " + std::to_string(row.size()));
    }
    const double hours = parse_time_hours(row[*c_time]);
    time_labels.emplace(hours, row[*c_time]);
    const auto a = parse_double(row[*c_a]);
    const auto b = parse_double(row[*c_b]);
    if (!a || !b) throw Error("line " + std::to_string(r + 1) + ": invalid coordinates");
    const Coord c{*a, *b};
    const auto [it, inserted] = loc_index.emplace(row[*c_loc], loc_ids.size());
    if (inserted) {
      loc_ids.push_back(row[*c_loc]);
      coords.push_back(c);
    } else if (!(coords[it->second] == c)) {
      throw Error("inconsistent coordinates for location '" + row[*c_loc] + "'");
    }
    records.push_back({hours, it->second, r});
  }
  if (records.empty()) throw Error("panel file has no data rows");

  std::map<double, std::size_t> time_index;
  std::vector<double> times;
  std::vector<std::string> labels;
  const double origin = time_labels.begin()->first;
  for (const auto& [h, label] : time_labels) {
    time_index.emplace(h, times.size());
    times.push_back(h - origin);
    labels.push_back(label);
  }

  const std::size_t T = times.size();
  const std::size_t M = coords.size();
  std::vector<double> values(T * M * P, kMissing);
  std::vector<bool> seen(T * M, false);
  for (const auto& rec : records) {
    const std::size_t t = time_index.at(rec.hours);
    const std::size_t cell = t * M + rec.loc;
    if (seen[cell]) {
      throw Error("duplicate row for time '" + labels[t] + "' and location '" + loc_ids[rec.loc] + "'");
    }
    seen[cell] = true;
    const auto& row = rows[rec.row];
    for (std::size_t p = 0; p < P; ++p) {
      const std::string& field = row[feature_cols[p]];
      if (field.empty()) continue;
      double v = 0.0;
      if (spec.is_categorical(p)) {
        const auto& levels = spec[p].levels;
        const auto it = std::find(levels.begin(), levels.end(), field);
        if (it == levels.end()) {
          throw Error("unknown categorical level '" + field + "' for feature '" + spec[p].name + "'");
        }
        v = static_cast<double>(it - levels.begin());
      } else {
        const auto parsed = parse_double(field);
        if (!parsed) {
          throw Error("line " + std::to_string(rec.row + 1) + ": invalid number '" + field + "'");
        }
        v = *parsed;
      }
      values[cell * P + p] = v;
    }
  }

  PanelDataset panel(std::move(spec), std::move(times), std::move(coords), system, std::move(values));
  panel.set_location_ids(std::move(loc_ids));
  panel.set_time_labels(std::move(labels));
  return panel;
}

inline std::string time_label(const PanelDataset& panel, std::size_t t) {
  return panel.time_labels().empty() ? format_double(panel.times()[t]) : panel.time_labels()[t];
}

inline std::string cell_text(const PanelDataset& panel, std::size_t p, double v) {
  if (is_missing(v)) return "";
  if (panel.spec().is_categorical(p)) return panel.spec()[p].levels[static_cast<std::size_t>(v)];
  return format_double(v);
}

/// Write a panel in the long CSV layout read by ingest_panel.
inline void write_panel_csv(const PanelDataset& panel, const std::filesystem::path& path) {
  auto out = open_output(path);
  const bool geo = panel.coord_system() == CoordSystem::geographic;
  out << "time,location," << (geo ? "lat,lon" : "x,y");
  for (const auto& f : panel.spec().features()) out << ',' << csv_escape(f.name);
  out << '\n';
  for (std::size_t t = 0; t < panel.n_times(); ++t) {
    for (std::size_t m = 0; m < panel.n_locations(); ++m) {
      const auto& c = panel.coords()[m];
      out << csv_escape(time_label(panel, t)) << ',' << csv_escape(panel.location_label(m)) << ','
          << format_double(c.first) << ',' << format_double(c.second);
      const auto row = panel.row(t, m);
      for (std::size_t p = 0; p < panel.n_features(); ++p) {
        out << ',' << csv_escape(cell_text(panel, p, row[p]));
      }
      out << '\n';
    }
  }
}

/// Write states as time,location,state with 1-based labels.
inline void write_states_csv(const PanelDataset& panel, const StateMatrix& S,
                             const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "time,location,state\n";
  for (std::size_t t = 0; t < S.n_times(); ++t) {
    for (std::size_t m = 0; m < S.n_locations(); ++m) {
      out << csv_escape(time_label(panel, t)) << ',' << csv_escape(panel.location_label(m)) << ','
          << S(t, m) + 1 << '\n';
    }
  }
}

/// Read a state CSV aligned to `panel`'s time and location labels.
inline StateMatrix read_states_csv(const PanelDataset& panel, int K, const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty() || rows.front() != std::vector<std::string>{"time", "location", "state"}) {
    throw Error("state file needs header time,location,state");
  }
  std::unordered_map<std::string, std::size_t> t_index, m_index;
  for (std::size_t t = 0; t < panel.n_times(); ++t) t_index[time_label(panel, t)] = t;
  for (std::size_t m = 0; m < panel.n_locations(); ++m) m_index[panel.location_label(m)] = m;

  std::vector<int> states(panel.n_times() * panel.n_locations(), -1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 3) throw Error("state file line " + std::to_string(r + 1) + ": need 3 fields");
    const auto t = t_index.find(row[0]);
    const auto m = m_index.find(row[1]);
    const auto s = parse_double(row[2]);
    if (t == t_index.end() || m == m_index.end()) {
      throw Error("state file line " + std::to_string(r + 1) + ": unknown time or location");
    }
    if (!s || *s != std::floor(*s) || *s < 1 || *s > K) {
      throw Error("state file line " + std::to_string(r + 1) + ": state must be in 1..K");
    }
    states[t->second * panel.n_locations() + m->second] = static_cast<int>(*s) - 1;
  }
  if (std::find(states.begin(), states.end(), -1) != states.end()) {
    throw Error("state file does not cover every (time, location) cell");
  }
  return StateMatrix(panel.n_times(), panel.n_locations(), K, std::move(states));
}

// ---------------------------------------------------------------------------
// Feature engineering

/// Append, for every continuous feature, its trailing mean and sample
/// standard deviation over observations with tau in (tau_t - window, tau_t]
/// at the same location. Fewer than two observations give a missing sd;
/// no observations give a missing mean. window_hours = 0 returns the panel
/// unchanged.
inline PanelDataset rolling_features(const PanelDataset& panel, double window_hours) {
  if (window_hours == 0.0) return panel;
  if (!(window_hours >= 2.0)) throw Error("rolling window must be >= 2 hours (or 0 to disable)");

  const std::size_t T = panel.n_times();
  const std::size_t M = panel.n_locations();
  const std::size_t P0 = panel.n_features();
  std::vector<std::size_t> cont;
  for (std::size_t p = 0; p < P0; ++p) {
    if (!panel.spec().is_categorical(p)) cont.push_back(p);
  }
  if (cont.empty()) return panel;

  std::vector<Feature> features = panel.spec().features();
  const std::string suffix = format_double(window_hours) + "h";
  for (std::size_t p : cont) {
    features.push_back(Feature::continuous(panel.spec()[p].name + "_mean" + suffix));
    features.push_back(Feature::continuous(panel.spec()[p].name + "_sd" + suffix));
  }
  const std::size_t P = features.size();

  std::vector<double> values(T * M * P, kMissing);
  const auto& times = panel.times();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t m = 0; m < M; ++m) {
      const auto row = panel.row(t, m);
      std::copy(row.begin(), row.end(), values.begin() + static_cast<std::ptrdiff_t>((t * M + m) * P));
    }
  }
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t c = 0; c < cont.size(); ++c) {
      const std::size_t p = cont[c];
      std::size_t start = 0;
      for (std::size_t t = 0; t < T; ++t) {
        while (times[start] <= times[t] - window_hours) ++start;
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t s = start; s <= t; ++s) {
          const double v = panel(s, m, p);
          if (is_missing(v)) continue;
          sum += v;
          ++n;
        }
        double* out = values.data() + (t * M + m) * P + P0 + 2 * c;
        if (n == 0) continue;
        const double mean = sum / static_cast<double>(n);
        out[0] = mean;
        if (n < 2) continue;
        double ss = 0.0;
        for (std::size_t s = start; s <= t; ++s) {
          const double v = panel(s, m, p);
          if (!is_missing(v)) ss += (v - mean) * (v - mean);
        }
        out[1] = std::sqrt(ss / static_cast<double>(n - 1));
      }
    }
  }

  PanelDataset out(FeatureSpec(std::move(features)), panel.times(), panel.coords(),
                   panel.coord_system(), std::move(values));
  if (!panel.location_ids().empty()) out.set_location_ids(panel.location_ids());
  if (!panel.time_labels().empty()) out.set_time_labels(panel.time_labels());
  return out;
}

// ---------------------------------------------------------------------------
// Result emission

/// Fraction of all cells in each state.
inline std::vector<double> state_occupancy(const StateMatrix& S) {
  std::vector<double> occ(static_cast<std::size_t>(S.n_states()), 0.0);
  for (int s : S.data()) occ[static_cast<std::size_t>(s)] += 1.0;
  for (double& v : occ) v /= static_cast<double>(S.data().size());
  return occ;
}

inline json fit_summary_json(const FitResult& result, const PanelDataset& panel) {
  const StateMatrix& S = result.states;
  const int K = S.n_states();
  const std::size_t T = S.n_times();
  const std::size_t M = S.n_locations();

  json occupancy = json::object();
  const auto occ = state_occupancy(S);
  for (int k = 0; k < K; ++k) occupancy[std::to_string(k + 1)] = occ[static_cast<std::size_t>(k)];

  json per_location = json::array();
  for (std::size_t m = 0; m < M; ++m) {
    std::vector<double> prop(static_cast<std::size_t>(K), 0.0);
    for (std::size_t t = 0; t < T; ++t) prop[static_cast<std::size_t>(S(t, m))] += 1.0 / static_cast<double>(T);
    per_location.push_back({{"location", panel.location_label(m)}, {"proportions", prop}});
  }

  json per_time = json::array();
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<int> counts(static_cast<std::size_t>(K), 0);
    for (std::size_t m = 0; m < M; ++m) ++counts[static_cast<std::size_t>(S(t, m))];
    per_time.push_back({{"time", time_label(panel, t)}, {"counts", counts}});
  }

  return json{{"K", K},
              {"objective", result.objective()},
              {"objective_trace", result.objective_trace},
              {"iterations", result.n_iter},
              {"converged", result.converged},
              {"start_index", result.start_index},
              {"reseeded_states", result.n_reseeded},
              {"warnings", result.warnings},
              {"occupancy", std::move(occupancy)},
              {"per_location", std::move(per_location)},
              {"per_time", std::move(per_time)}};
}

/// Write states.csv, prototypes.csv, summary.json and heatmap.csv into out_dir.
inline void emit_results(const FitResult& result, const PanelDataset& panel,
                         const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory " + out_dir.string() + ": " + ec.message());

  const StateMatrix& S = result.states;
  write_states_csv(panel, S, out_dir / "states.csv");

  {
    auto out = open_output(out_dir / "prototypes.csv");
    out << "state";
    for (const auto& f : panel.spec().features()) out << ',' << csv_escape(f.name);
    out << '\n';
    for (int k = 0; k < result.prototypes.n_states(); ++k) {
      out << k + 1;
      for (std::size_t p = 0; p < panel.n_features(); ++p) {
        out << ',' << csv_escape(cell_text(panel, p, result.prototypes(k, p)));
      }
      out << '\n';
    }
  }

  {
    auto out = open_output(out_dir / "summary.json");
    out << fit_summary_json(result, panel).dump(2) << '\n';
  }

  {
    auto out = open_output(out_dir / "heatmap.csv");
    out << "location";
    for (std::size_t t = 0; t < S.n_times(); ++t) out << ',' << csv_escape(time_label(panel, t));
    out << '\n';
    for (std::size_t m = 0; m < S.n_locations(); ++m) {
      out << csv_escape(panel.location_label(m));
      for (std::size_t t = 0; t < S.n_times(); ++t) out << ',' << S(t, m) + 1;
      out << '\n';
    }
  }
}

inline json scenario_json(const ScenarioSpec& s) {
  return json{{"T", s.T},         {"M", s.M},       {"P", s.P},
              {"K", s.K},         {"alpha", s.alpha}, {"beta", s.beta},
              {"mu", s.mu},       {"rho", s.rho},   {"gap_fraction", s.gap_fraction},
              {"missing_fraction", s.missing_fraction}, {"seed", s.seed}};
}

/// panel.csv, schema.json, truth.csv and scenario.json for a simulated panel.
inline void write_simulation(const SimulatedPanel& sim, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory " + out_dir.string() + ": " + ec.message());
  write_panel_csv(sim.data, out_dir / "panel.csv");
  write_schema(sim.data.spec(), out_dir / "schema.json");
  write_states_csv(sim.data, sim.truth, out_dir / "truth.csv");
  auto out = open_output(out_dir / "scenario.json");
  out << scenario_json(sim.scenario).dump(2) << '\n';
}

}  // namespace stjm
