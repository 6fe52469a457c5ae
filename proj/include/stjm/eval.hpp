#pragma once

// Scoring fitted state matrices against ground truth: confusion counts,
// balanced accuracy under the best label permutation, hyperparameter grid
// search and the replicated Monte Carlo experiment runner.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "stjm/error.hpp"
#include "stjm/fit.hpp"
#include "stjm/panel.hpp"
#include "stjm/parallel.hpp"
#include "stjm/random.hpp"
#include "stjm/simgen.hpp"

namespace stjm {

/// counts(k, j) = number of cells with true state k and estimated state j.
class ConfusionTensor {
 public:
  ConfusionTensor(const StateMatrix& truth, const StateMatrix& est, int K)
      : K_(K), counts_(static_cast<std::size_t>(K) * static_cast<std::size_t>(K), 0) {
    if (truth.n_times() != est.n_times() || truth.n_locations() != est.n_locations()) {
      throw Error("confusion: state matrix shapes differ");
    }
    if (truth.n_states() > K || est.n_states() > K) throw Error("confusion: labels exceed K");
    const auto& a = truth.data();
    const auto& b = est.data();
    for (std::size_t i = 0; i < a.size(); ++i) ++counts_[index(a[i], b[i])];
  }

  int n_states() const noexcept { return K_; }
  std::size_t operator()(int truth, int est) const { return counts_[index(truth, est)]; }
  std::size_t true_positives(int k) const { return (*this)(k, k); }
  std::size_t false_negatives(int k) const { return class_total(k) - true_positives(k); }
  std::size_t class_total(int k) const {
    std::size_t n = 0;
    for (int j = 0; j < K_; ++j) n += (*this)(k, j);
    return n;
  }
  std::size_t total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

 private:
  std::size_t index(int a, int b) const {
    return static_cast<std::size_t>(a) * static_cast<std::size_t>(K_) + static_cast<std::size_t>(b);
  }

  int K_;
  std::vector<std::size_t> counts_;
};

struct BalancedAccuracy {
  double value = 0.0;
  std::vector<double> recall;       // NaN for classes absent from truth
  std::vector<int> absent_classes;  // excluded from the mean
};

/// Mean per-class recall tp_k / (tp_k + fn_k) over classes present in
/// truth. Labels are compared as given; align them first.
inline BalancedAccuracy balanced_accuracy_detail(const StateMatrix& truth, const StateMatrix& est,
                                                 int K) {
  const ConfusionTensor c(truth, est, K);
  BalancedAccuracy out;
  out.recall.assign(static_cast<std::size_t>(K), std::nan(""));
  double sum = 0.0;
  int present = 0;
  for (int k = 0; k < K; ++k) {
    const std::size_t n = c.class_total(k);
    if (n == 0) {
      out.absent_classes.push_back(k);
      continue;
    }
    const double r = static_cast<double>(c.true_positives(k)) / static_cast<double>(n);
    out.recall[static_cast<std::size_t>(k)] = r;
    sum += r;
    ++present;
  }
  if (present == 0) throw Error("balanced_accuracy: no class present in truth");
  out.value = sum / present;
  return out;
}

inline double balanced_accuracy(const StateMatrix& truth, const StateMatrix& est, int K) {
  return balanced_accuracy_detail(truth, est, K).value;
}

inline StateMatrix relabel(const StateMatrix& S, const std::vector<int>& perm) {
  std::vector<int> out(S.data().size());
  std::transform(S.data().begin(), S.data().end(), out.begin(),
                 [&](int s) { return perm[static_cast<std::size_t>(s)]; });
  return StateMatrix(S.n_times(), S.n_locations(), S.n_states(), std::move(out));
}

inline constexpr int kMaxAlignK = 8;

/// Permutation perm (estimated label -> truth label) maximizing
/// BAC(truth, perm(est)). Exhaustive over K! candidates in lexicographic
/// order; the first maximizer wins.
inline std::vector<int> align_labels(const StateMatrix& truth, const StateMatrix& est, int K) {
  if (K > kMaxAlignK) {
    throw Error("align_labels: K > 8 needs an assignment solver; not supported");
  }
  const ConfusionTensor c(truth, est, K);
  std::vector<std::size_t> totals(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) totals[static_cast<std::size_t>(k)] = c.class_total(k);

  std::vector<int> perm(static_cast<std::size_t>(K));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_score = -1.0;
  do {
    // BAC up to the constant 1 / #present: sum of recalls.
    double score = 0.0;
    for (int j = 0; j < K; ++j) {
      const int k = perm[static_cast<std::size_t>(j)];
      const std::size_t n = totals[static_cast<std::size_t>(k)];
      if (n > 0) score += static_cast<double>(c(k, j)) / static_cast<double>(n);
    }
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// BAC after optimal label alignment.
inline double aligned_balanced_accuracy(const StateMatrix& truth, const StateMatrix& est, int K) {
  return balanced_accuracy(truth, relabel(est, align_labels(truth, est, K)), K);
}

struct GridSearchResult {
  double best_lambda = 0.0;
  double best_gamma = 0.0;
  double best_bac = 0.0;
  std::vector<double> lambdas;
  std::vector<double> gammas;
  std::vector<double> surface;  // |lambdas| x |gammas|, row-major

  double bac(std::size_t i, std::size_t j) const { return surface[i * gammas.size() + j]; }
};

/// Fit at every (lambda, gamma) grid point and pick the BAC maximizer;
/// ties go to the smaller lambda, then the smaller gamma.
inline GridSearchResult grid_search(const PanelDataset& panel, const StateMatrix& truth, int K,
                                    const std::vector<double>& lambdas,
                                    const std::vector<double>& gammas, const FitConfig& cfg,
                                    unsigned threads = 1) {
  if (lambdas.empty() || gammas.empty()) throw Error("grid_search: empty grid");
  GridSearchResult out;
  out.lambdas = lambdas;
  out.gammas = gammas;
  out.surface.assign(lambdas.size() * gammas.size(), 0.0);
  parallel_for(out.surface.size(), threads, [&](std::size_t idx) {
    FitConfig point = cfg;
    point.threads = 1;
    point.hyperparams.K = K;
    point.hyperparams.lambda = lambdas[idx / gammas.size()];
    point.hyperparams.gamma = gammas[idx % gammas.size()];
    const FitResult r = fit(panel, point);
    out.surface[idx] = aligned_balanced_accuracy(truth, r.states, K);
  });

  bool have = false;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    for (std::size_t j = 0; j < gammas.size(); ++j) {
      const double b = out.bac(i, j);
      const bool better =
          !have || b > out.best_bac ||
          (b == out.best_bac &&
           (lambdas[i] < out.best_lambda ||
            (lambdas[i] == out.best_lambda && gammas[j] < out.best_gamma)));
      if (better) {
        have = true;
        out.best_bac = b;
        out.best_lambda = lambdas[i];
        out.best_gamma = gammas[j];
      }
    }
  }
  return out;
}

/// Evenly spaced grid lo, lo + step, ..., hi (inclusive, rounded to step).
inline std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw Error("make_grid: invalid bounds");
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Round to 12 decimals so 0.05 * 3 prints and compares as 0.15.
    g[i] = std::round((lo + step * static_cast<double>(i)) * 1e12) / 1e12;
  }
  return g;
}

enum class Method : std::uint8_t { stjm, kprot };

inline std::string method_name(Method m) { return m == Method::stjm ? "ST-JM" : "k-prot"; }

struct ReportRow {
  std::size_t scenario_index = 0;
  ScenarioSpec scenario;
  Method method = Method::stjm;
  double lambda = 0.0;
  double gamma = 0.0;
  double mean_bac = 0.0;
  double sd_bac = 0.0;
  std::vector<double> bac;             // per replicate
  std::vector<std::uint64_t> seeds;    // per replicate scenario seed
  std::size_t absent_class_events = 0; // replicates where truth lacked a class
};

struct ExperimentReport {
  std::size_t n_reps = 0;
  std::uint64_t seed = 0;
  std::vector<ReportRow> rows;  // ordered by (scenario, method)
};

struct MonteCarloOptions {
  int n_starts = 10;
  int max_iter = 10;
  PrototypeRule prototype_rule = PrototypeRule::mean;
  unsigned threads = 1;
};

/// Seed of replicate `rep` of scenario `scenario_index` under master seed.
inline std::uint64_t replicate_seed(std::uint64_t seed, std::size_t scenario_index,
                                    std::size_t rep) {
  return derive_seed(derive_seed(seed, scenario_index), rep);
}

inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// For each scenario, simulate n_reps panels (shared by all methods), fit
/// every method, align labels and score. The first failing replicate aborts
/// the run with its seed in the message.
inline ExperimentReport run_monte_carlo(const std::vector<ScenarioSpec>& scenarios,
                                        const std::vector<Method>& methods, std::size_t n_reps,
                                        double lambda, double gamma, std::uint64_t seed,
                                        const MonteCarloOptions& opts = {}) {
  if (n_reps < 1) throw Error("run_monte_carlo: n_reps must be >= 1");
  ExperimentReport report;
  report.n_reps = n_reps;
  report.seed = seed;

  const std::size_t n_methods = methods.size();
  const std::size_t n_jobs = scenarios.size() * n_reps;
  std::vector<double> bac(n_jobs * n_methods, 0.0);
  std::vector<std::uint8_t> absent(n_jobs * n_methods, 0);
  std::vector<std::uint64_t> seeds(n_jobs, 0);

  parallel_for(n_jobs, opts.threads, [&](std::size_t job) {
    const std::size_t sc = job / n_reps;
    const std::size_t rep = job % n_reps;
    ScenarioSpec spec = scenarios[sc];
    spec.seed = replicate_seed(seed, sc, rep);
    seeds[job] = spec.seed;
    try {
      const SimulatedPanel sim = generate_scenario(spec);
      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        FitConfig cfg;
        cfg.hyperparams.K = spec.K;
        cfg.hyperparams.lambda = methods[mi] == Method::stjm ? lambda : 0.0;
        cfg.hyperparams.gamma = methods[mi] == Method::stjm ? gamma : 0.0;
        cfg.hyperparams.n_starts = opts.n_starts;
        cfg.hyperparams.max_iter = opts.max_iter;
        cfg.hyperparams.seed = derive_seed(spec.seed, 100);
        cfg.prototype_rule = opts.prototype_rule;
        const FitResult r = fit(sim.data, cfg);
        const auto aligned = relabel(r.states, align_labels(sim.truth, r.states, spec.K));
        const auto score = balanced_accuracy_detail(sim.truth, aligned, spec.K);
        bac[job * n_methods + mi] = score.value;
        absent[job * n_methods + mi] = !score.absent_classes.empty();
      }
    } catch (const std::exception& e) {
      throw Error("replicate " + std::to_string(rep) + " of scenario " + std::to_string(sc) +
                  " failed (seed " + std::to_string(spec.seed) + "): " + e.what());
    }
  });

  for (std::size_t sc = 0; sc < scenarios.size(); ++sc) {
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      ReportRow row;
      row.scenario_index = sc;
      row.scenario = scenarios[sc];
      row.method = methods[mi];
      row.lambda = methods[mi] == Method::stjm ? lambda : 0.0;
      row.gamma = methods[mi] == Method::stjm ? gamma : 0.0;
      for (std::size_t rep = 0; rep < n_reps; ++rep) {
        const std::size_t job = sc * n_reps + rep;
        row.bac.push_back(bac[job * n_methods + mi]);
        row.seeds.push_back(seeds[job]);
        row.absent_class_events += absent[job * n_methods + mi];
      }
      row.mean_bac =
          std::accumulate(row.bac.begin(), row.bac.end(), 0.0) / static_cast<double>(n_reps);
      row.sd_bac = sample_sd(row.bac);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

/// Preset scenario lists mirroring the published tables: P in {10, 20},
/// T in {10, 50}, M in {10, 50}. Table 1 drops 20% of time points; tables
/// 2 and 3 mask 5% and 20% of cells on a regular time grid.
inline std::vector<ScenarioSpec> table_scenarios(int table) {
  double gaps = 0.0;
  double missing = 0.0;
  switch (table) {
    case 1: gaps = 0.20; break;
    case 2: missing = 0.05; break;
    case 3: missing = 0.20; break;
    default: throw Error("unknown table preset: " + std::to_string(table));
  }
  std::vector<ScenarioSpec> out;
  for (std::size_t P : {10u, 20u}) {
    for (std::size_t T : {10u, 50u}) {
      for (std::size_t M : {10u, 50u}) {
        ScenarioSpec s;
        s.T = T;
        s.M = M;
        s.P = P;
        s.gap_fraction = gaps;
        s.missing_fraction = missing;
        out.push_back(s);
      }
    }
  }
  return out;
}

}  // namespace stjm
