#pragma once

// Command-line front end: fit | simulate | evaluate | grid.
//
// Options may also come from a flat key=value file given by --config
// (keys are long flag names without dashes, '#' starts a comment);
// flags on the command line take precedence over the file.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "stjm/error.hpp"
#include "stjm/eval.hpp"
#include "stjm/fit.hpp"
#include "stjm/io.hpp"
#include "stjm/parallel.hpp"
#include "stjm/report.hpp"
#include "stjm/simgen.hpp"

namespace stjm {

struct RunConfig {
  std::string command;
  std::string input;
  std::string schema;
  std::string truth;
  std::string out;
  std::string scenario = "custom";
  int K = 3;
  double lambda = 0.05;
  double gamma = 0.05;
  std::string metric = "euclidean";
  double scale = 1.0;
  std::optional<double> cutoff;
  double window = 5.0;
  int starts = 10;
  int max_iter = 10;
  std::string rule = "mean";
  std::uint64_t seed = 1;
  std::size_t reps = 20;
  std::size_t T = 50;
  std::size_t M = 50;
  std::size_t P = 10;
  double gaps = 0.0;
  double missing = 0.0;
  double alpha = 0.01;
  double beta = 0.90;
  double mu = 0.50;
  double rho = 0.20;
  double grid_max = 0.25;
  double grid_step = 0.05;

  Hyperparams hyperparams() const {
    Hyperparams hp;
    hp.K = K;
    hp.lambda = lambda;
    hp.gamma = gamma;
    hp.metric = metric == "haversine" ? DistanceMetric::haversine : DistanceMetric::euclidean;
    hp.distance_scale = scale;
    hp.neighborhood_cutoff = cutoff;
    hp.n_starts = starts;
    hp.max_iter = max_iter;
    hp.seed = seed;
    return hp;
  }

  FitConfig fit_config() const {
    FitConfig cfg;
    cfg.hyperparams = hyperparams();
    cfg.prototype_rule = rule == "median" ? PrototypeRule::median : PrototypeRule::mean;
    cfg.threads = default_thread_count();
    return cfg;
  }

  ScenarioSpec scenario_spec() const {
    ScenarioSpec s;
    s.T = T;
    s.M = M;
    s.P = P;
    s.K = K;
    s.alpha = alpha;
    s.beta = beta;
    s.mu = mu;
    s.rho = rho;
    s.gap_fraction = gaps;
    s.missing_fraction = missing;
    s.seed = seed;
    return s;
  }
};

namespace detail {

// Flat key=value file -> "--key value" tokens.
inline std::vector<std::string> config_tokens(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line without '=': " + line);
    tokens.push_back("--" + trim(line.substr(0, eq)));
    tokens.push_back(trim(line.substr(eq + 1)));
  }
  return tokens;
}

inline PanelDataset load_input_panel(const RunConfig& rc) {
  std::optional<std::filesystem::path> schema;
  if (!rc.schema.empty()) schema = rc.schema;
  return rolling_features(ingest_panel(rc.input, schema), rc.window);
}

inline int run_fit(const RunConfig& rc, std::ostream& out) {
  const PanelDataset panel = load_input_panel(rc);
  const FitResult result = fit(panel, rc.fit_config());
  emit_results(result, panel, rc.out);
  out << "fit: T=" << panel.n_times() << " M=" << panel.n_locations() << " P=" << panel.n_features()
      << " K=" << rc.K << " objective=" << format_double(result.objective())
      << " iterations=" << result.n_iter << (result.converged ? " (converged)" : "") << '\n';
  for (const auto& w : result.warnings) out << "warning: " << w << '\n';
  return 0;
}

inline int run_simulate(const RunConfig& rc, std::ostream& out) {
  const SimulatedPanel sim = generate_scenario(rc.scenario_spec());
  write_simulation(sim, rc.out);
  out << "simulate: wrote T=" << sim.data.n_times() << " M=" << sim.data.n_locations()
      << " P=" << sim.data.n_features() << " to " << rc.out << '\n';
  return 0;
}

inline std::vector<ScenarioSpec> evaluation_scenarios(const RunConfig& rc) {
  std::vector<ScenarioSpec> specs;
  if (rc.scenario == "custom") {
    specs.push_back(rc.scenario_spec());
  } else if (rc.scenario.rfind("table", 0) == 0 && rc.scenario.size() == 6) {
    specs = table_scenarios(rc.scenario[5] - '0');
    for (auto& s : specs) s.K = rc.K;
  } else {
    throw Error("unknown scenario preset '" + rc.scenario + "'");
  }
  return specs;
}

inline int run_evaluate(const RunConfig& rc, std::ostream& out) {
  MonteCarloOptions opts;
  opts.n_starts = rc.starts;
  opts.max_iter = rc.max_iter;
  opts.prototype_rule = rc.rule == "median" ? PrototypeRule::median : PrototypeRule::mean;
  opts.threads = default_thread_count();
  const auto report = run_monte_carlo(evaluation_scenarios(rc), {Method::stjm, Method::kprot},
                                      rc.reps, rc.lambda, rc.gamma, rc.seed, opts);
  std::filesystem::path csv = rc.out;
  if (csv.has_parent_path()) std::filesystem::create_directories(csv.parent_path());
  write_report_csv(report, csv);
  write_report_json(report, std::filesystem::path(csv).replace_extension(".json"));
  for (const auto& row : report.rows) {
    out << "T=" << row.scenario.T << " M=" << row.scenario.M << " P=" << row.scenario.P << ' '
        << method_name(row.method) << ": " << format_double(row.mean_bac) << " ("
        << format_double(row.sd_bac) << ")\n";
  }
  return 0;
}

inline int run_grid(const RunConfig& rc, std::ostream& out) {
  PanelDataset panel;
  StateMatrix truth;
  if (!rc.input.empty()) {
    if (rc.truth.empty()) throw Error("grid with --input also needs --truth");
    panel = load_input_panel(rc);
    truth = read_states_csv(panel, rc.K, rc.truth);
  } else {
    SimulatedPanel sim = generate_scenario(rc.scenario_spec());
    panel = std::move(sim.data);
    truth = std::move(sim.truth);
  }
  const auto grid = make_grid(0.0, rc.grid_max, rc.grid_step);
  FitConfig cfg = rc.fit_config();
  const auto result = grid_search(panel, truth, rc.K, grid, grid, cfg, default_thread_count());

  std::filesystem::create_directories(rc.out);
  write_grid_csv(result, std::filesystem::path(rc.out) / "surface.csv");
  {
    auto f = open_output(std::filesystem::path(rc.out) / "best.json");
    f << json{{"lambda", result.best_lambda}, {"gamma", result.best_gamma}, {"bac", result.best_bac}}
             .dump(2)
      << '\n';
  }
  out << "grid: best lambda=" << format_double(result.best_lambda)
      << " gamma=" << format_double(result.best_gamma) << " BAC=" << format_double(result.best_bac)
      << '\n';
  return 0;
}

}  // namespace detail

/// Entry point shared by the stjm executable and the tests. Returns 0 on
/// success, 1 on a runtime failure and 2 on a usage error.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  RunConfig rc;
  CLI::App app{"Spatio-temporal jump model: clustering of geo-referenced panels", "stjm"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  app.add_option("--config", config_path, "flat key=value options file");

  auto* fit_cmd = app.add_subcommand("fit", "fit a model to a panel CSV");
  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic panel with ground truth");
  auto* eval_cmd = app.add_subcommand("evaluate", "Monte Carlo BAC study against k-prototypes");
  auto* grid_cmd = app.add_subcommand("grid", "BAC surface over a (lambda, gamma) grid");
  for (auto* sub : {fit_cmd, sim_cmd, eval_cmd, grid_cmd}) {
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  auto model_options = [&](CLI::App* sub) {
    sub->add_option("--k", rc.K, "number of states")->check(CLI::PositiveNumber);
    sub->add_option("--lambda", rc.lambda, "temporal jump penalty")->check(CLI::NonNegativeNumber);
    sub->add_option("--gamma", rc.gamma, "spatial agreement reward")->check(CLI::NonNegativeNumber);
    sub->add_option("--starts", rc.starts, "random restarts")->check(CLI::PositiveNumber);
    sub->add_option("--max-iter", rc.max_iter, "passes per restart")->check(CLI::PositiveNumber);
    sub->add_option("--rule", rc.rule, "continuous prototype rule")
        ->check(CLI::IsMember({"mean", "median"}));
    sub->add_option("--seed", rc.seed, "random seed");
  };
  auto input_options = [&](CLI::App* sub) {
    sub->add_option("--schema", rc.schema, "schema JSON declaring categorical features");
    sub->add_option("--metric", rc.metric, "location distance")
        ->check(CLI::IsMember({"euclidean", "haversine"}));
    sub->add_option("--scale", rc.scale, "distance divisor before exp(-d)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--cutoff", rc.cutoff, "zero weights beyond this distance");
    sub->add_option("--window", rc.window, "rolling mean/sd window in hours (0 disables)")
        ->check(CLI::NonNegativeNumber);
  };
  auto scenario_options = [&](CLI::App* sub) {
    sub->add_option("--t", rc.T, "retained time points")->check(CLI::PositiveNumber);
    sub->add_option("--m", rc.M, "locations")->check(CLI::PositiveNumber);
    sub->add_option("--p", rc.P, "features")->check(CLI::PositiveNumber);
    sub->add_option("--gaps", rc.gaps, "fraction of time points dropped")->check(CLI::Range(0.0, 0.99));
    sub->add_option("--missing", rc.missing, "fraction of cells masked")->check(CLI::Range(0.0, 0.99));
    sub->add_option("--alpha", rc.alpha, "spatial correlation decay");
    sub->add_option("--beta", rc.beta, "temporal persistence");
    sub->add_option("--mu", rc.mu, "state mean separation");
    sub->add_option("--rho", rc.rho, "feature correlation");
  };

  fit_cmd->add_option("--input", rc.input, "panel CSV")->required();
  fit_cmd->add_option("--out", rc.out, "output directory")->required();
  model_options(fit_cmd);
  input_options(fit_cmd);

  sim_cmd->add_option("--out", rc.out, "output directory")->required();
  sim_cmd->add_option("--k", rc.K, "number of states")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", rc.seed, "random seed");
  scenario_options(sim_cmd);

  eval_cmd->add_option("--out", rc.out, "report CSV path (JSON twin written alongside)")->required();
  eval_cmd->add_option("--scenario", rc.scenario, "table1 | table2 | table3 | custom")
      ->check(CLI::IsMember({"table1", "table2", "table3", "custom"}));
  eval_cmd->add_option("--reps", rc.reps, "replicates per scenario")->check(CLI::PositiveNumber);
  model_options(eval_cmd);
  scenario_options(eval_cmd);

  grid_cmd->add_option("--out", rc.out, "output directory")->required();
  grid_cmd->add_option("--input", rc.input, "panel CSV (simulated from scenario flags if absent)");
  grid_cmd->add_option("--truth", rc.truth, "ground-truth state CSV for --input");
  grid_cmd->add_option("--grid-max", rc.grid_max, "largest lambda/gamma")->check(CLI::NonNegativeNumber);
  grid_cmd->add_option("--grid-step", rc.grid_step, "grid increment")->check(CLI::PositiveNumber);
  model_options(grid_cmd);
  input_options(grid_cmd);
  scenario_options(grid_cmd);

  // Splice config-file tokens right after the subcommand so that explicit
  // flags, which come later, win under TakeLast.
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    for (std::size_t i = 0; i < args.size();) {
      if (args[i] == "--config" && i + 1 < args.size()) {
        config_path = args[i + 1];
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      } else if (args[i].rfind("--config=", 0) == 0) {
        config_path = args[i].substr(9);
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        ++i;
      }
    }
    if (!config_path.empty()) {
      const auto tokens = detail::config_tokens(config_path);
      std::size_t pos = 0;
      while (pos < args.size() && args[pos] != "fit" && args[pos] != "simulate" &&
             args[pos] != "evaluate" && args[pos] != "grid") {
        ++pos;
      }
      if (pos < args.size()) args.insert(args.begin() + static_cast<std::ptrdiff_t>(pos + 1), tokens.begin(), tokens.end());
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return 2;
  }

  try {
    if (fit_cmd->parsed()) return detail::run_fit(rc, out);
    if (sim_cmd->parsed()) return detail::run_simulate(rc, out);
    if (eval_cmd->parsed()) return detail::run_evaluate(rc, out);
    if (grid_cmd->parsed()) return detail::run_grid(rc, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace stjm
