#pragma once

// Experiment reports as a CSV table (one row per scenario x method) and a
// JSON twin that also carries per-replicate scores and seeds.

#include <filesystem>
#include <string>

#include "stjm/eval.hpp"
#include "stjm/io.hpp"

namespace stjm {

inline void write_report_csv(const ExperimentReport& report, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "scenario,T,M,P,gap_fraction,missing_fraction,method,lambda,gamma,mean_bac,sd_bac,n_reps\n";
  for (const auto& row : report.rows) {
    const auto& s = row.scenario;
    out << row.scenario_index + 1 << ',' << s.T << ',' << s.M << ',' << s.P << ','
        << format_double(s.gap_fraction) << ',' << format_double(s.missing_fraction) << ','
        << method_name(row.method) << ',' << format_double(row.lambda) << ','
        << format_double(row.gamma) << ',' << format_double(row.mean_bac) << ','
        << format_double(row.sd_bac) << ',' << row.bac.size() << '\n';
  }
}

inline json report_json(const ExperimentReport& report) {
  json rows = json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"scenario_index", row.scenario_index + 1},
                    {"scenario", scenario_json(row.scenario)},
                    {"method", method_name(row.method)},
                    {"lambda", row.lambda},
                    {"gamma", row.gamma},
                    {"mean_bac", row.mean_bac},
                    {"sd_bac", row.sd_bac},
                    {"bac", row.bac},
                    {"seeds", row.seeds},
                    {"absent_class_events", row.absent_class_events}});
  }
  return json{{"n_reps", report.n_reps}, {"seed", report.seed}, {"rows", std::move(rows)}};
}

inline void write_report_json(const ExperimentReport& report, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << report_json(report).dump(2) << '\n';
}

inline void write_grid_csv(const GridSearchResult& g, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "lambda,gamma,bac\n";
  for (std::size_t i = 0; i < g.lambdas.size(); ++i) {
    for (std::size_t j = 0; j < g.gammas.size(); ++j) {
      out << format_double(g.lambdas[i]) << ',' << format_double(g.gammas[j]) << ','
          << format_double(g.bac(i, j)) << '\n';
    }
  }
}

}  // namespace stjm
