#pragma once

// Model estimation by coordinate descent:
//
//   impute missing cells with global means/modes, seed states (k-means++
//   under Gower), then repeat { fit prototypes -> re-impute missing cells
//   from their state's prototype -> decode each location in turn } until
//   the state matrix stops changing or max_iter passes have run.
//
// Several seeded starts are run and the lowest final objective wins.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "stjm/decode.hpp"
#include "stjm/error.hpp"
#include "stjm/gower.hpp"
#include "stjm/objective.hpp"
#include "stjm/panel.hpp"
#include "stjm/parallel.hpp"
#include "stjm/random.hpp"
#include "stjm/spatial.hpp"

namespace stjm {

enum class PrototypeRule : std::uint8_t { mean, median };

struct FitConfig {
  Hyperparams hyperparams;
  PrototypeRule prototype_rule = PrototypeRule::mean;
  unsigned threads = 1;  // workers for the multi-start loop
};

struct FitResult {
  StateMatrix states;
  PrototypeSet prototypes;
  PanelDataset imputed_data;
  std::vector<double> objective_trace;  // one value per pass
  int n_iter = 0;
  int start_index = 0;
  bool converged = false;
  int n_reseeded = 0;  // empty-state repairs across all passes
  std::vector<std::string> warnings;

  double objective() const {
    return objective_trace.empty() ? std::numeric_limits<double>::infinity()
                                   : objective_trace.back();
  }
};

namespace detail {

// Mode of level indices; ties go to the lowest level.
inline double mode_of(const std::vector<std::size_t>& counts) {
  std::size_t best = 0;
  for (std::size_t l = 1; l < counts.size(); ++l) {
    if (counts[l] > counts[best]) best = l;
  }
  return static_cast<double>(best);
}

// Median with the arithmetic midpoint for even counts. Reorders `v`.
inline double median_of(std::vector<double>& v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

inline void require_complete(const PanelDataset& data, const char* who) {
  if (data.missing_count() != 0) {
    throw Error(std::string(who) + ": data must be fully imputed");
  }
}

}  // namespace detail

/// Replace each missing cell by its feature's observed mean (continuous) or
/// mode (categorical, ties to the lowest level).
inline PanelDataset initial_impute(const PanelDataset& data) {
  const std::size_t T = data.n_times();
  const std::size_t M = data.n_locations();
  const std::size_t P = data.n_features();
  const auto& spec = data.spec();

  std::vector<double> fill(P, 0.0);
  for (std::size_t p = 0; p < P; ++p) {
    std::size_t n = 0;
    double sum = 0.0;
    std::vector<std::size_t> counts(spec.is_categorical(p) ? spec[p].levels.size() : 0, 0);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t m = 0; m < M; ++m) {
        const double v = data(t, m, p);
        if (is_missing(v)) continue;
        ++n;
        if (spec.is_categorical(p)) {
          ++counts[static_cast<std::size_t>(v)];
        } else {
          sum += v;
        }
      }
    }
    if (n == 0) throw Error("feature fully missing: '" + spec[p].name + "'");
    fill[p] = spec.is_categorical(p) ? detail::mode_of(counts) : sum / static_cast<double>(n);
  }

  PanelDataset out = data;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t p = 0; p < P; ++p) {
        if (out.missing(t, m, p)) out.set(t, m, p, fill[p]);
      }
    }
  }
  return out;
}

/// k-means++ seeding over all T*M feature vectors with Gower dissimilarity,
/// then nearest-seed assignment. If fewer than K distinct vectors exist the
/// remaining seeds are drawn uniformly with replacement and a warning is
/// appended to `warnings` (when given).
inline StateMatrix initialize_states(const PanelDataset& data, int K, std::uint64_t seed,
                                     const FeatureRanges& ranges,
                                     std::vector<std::string>* warnings = nullptr) {
  detail::require_complete(data, "initialize_states");
  if (K < 1) throw Error("initialize_states: K must be >= 1");
  const std::size_t T = data.n_times();
  const std::size_t M = data.n_locations();
  const std::size_t N = T * M;
  const auto& spec = data.spec();
  auto row = [&](std::size_t c) { return data.row(c / M, c % M); };

  Rng rng(seed);
  std::vector<std::size_t> seeds;
  seeds.reserve(static_cast<std::size_t>(K));
  seeds.push_back(uniform_index(rng, N));

  std::vector<double> nearest(N, std::numeric_limits<double>::infinity());
  bool fell_back = false;
  while (seeds.size() < static_cast<std::size_t>(K)) {
    const auto last = row(seeds.back());
    double total = 0.0;
    for (std::size_t c = 0; c < N; ++c) {
      nearest[c] = std::min(nearest[c], detail::gower_unchecked(row(c), last, spec, ranges));
      total += nearest[c] * nearest[c];
    }
    if (!(total > 0.0)) {
      fell_back = true;
      seeds.push_back(uniform_index(rng, N));
      continue;
    }
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t pick = N;
    for (std::size_t c = 0; c < N; ++c) {
      acc += nearest[c] * nearest[c];
      if (acc > target && nearest[c] > 0.0) {
        pick = c;
        break;
      }
    }
    if (pick == N) {
      // Rounding left the target past the last positive mass.
      for (std::size_t c = N; c-- > 0;) {
        if (nearest[c] > 0.0) {
          pick = c;
          break;
        }
      }
    }
    seeds.push_back(pick);
  }
  if (fell_back && warnings != nullptr) {
    warnings->push_back("K exceeds the number of distinct feature vectors; "
                        "seeds sampled with replacement");
  }

  StateMatrix S(T, M, K);
  for (std::size_t c = 0; c < N; ++c) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      const double d = detail::gower_unchecked(row(c), row(seeds[static_cast<std::size_t>(k)]),
                                               spec, ranges);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    S.set(c / M, c % M, best);
  }
  return S;
}

struct PrototypeFit {
  PrototypeSet prototypes;
  std::vector<int> reseeded;  // states that had no cells and were re-seeded
};

/// Per-state mean (or median) of continuous features and mode of
/// categorical ones. An empty state takes the feature vector of the cell
/// worst fitted by its own prototype.
inline PrototypeFit fit_prototypes(const PanelDataset& data, const StateMatrix& S, int K,
                                   PrototypeRule rule, const FeatureRanges& ranges) {
  detail::require_complete(data, "fit_prototypes");
  if (S.n_times() != data.n_times() || S.n_locations() != data.n_locations() ||
      S.n_states() != K) {
    throw Error("fit_prototypes: state matrix does not match data");
  }
  const std::size_t T = data.n_times();
  const std::size_t M = data.n_locations();
  const std::size_t P = data.n_features();
  const auto& spec = data.spec();

  std::vector<std::size_t> occupancy(static_cast<std::size_t>(K), 0);
  for (int s : S.data()) ++occupancy[static_cast<std::size_t>(s)];

  PrototypeFit out{PrototypeSet(K, P), {}};
  std::vector<double> column;
  for (std::size_t p = 0; p < P; ++p) {
    if (spec.is_categorical(p)) {
      const std::size_t L = spec[p].levels.size();
      std::vector<std::size_t> counts(static_cast<std::size_t>(K) * L, 0);
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t m = 0; m < M; ++m) {
          const auto k = static_cast<std::size_t>(S(t, m));
          ++counts[k * L + static_cast<std::size_t>(data(t, m, p))];
        }
      }
      for (int k = 0; k < K; ++k) {
        const auto first = counts.begin() + static_cast<std::ptrdiff_t>(k * L);
        out.prototypes(k, p) = detail::mode_of({first, first + static_cast<std::ptrdiff_t>(L)});
      }
    } else if (rule == PrototypeRule::mean) {
      std::vector<double> sum(static_cast<std::size_t>(K), 0.0);
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t m = 0; m < M; ++m) sum[static_cast<std::size_t>(S(t, m))] += data(t, m, p);
      }
      for (int k = 0; k < K; ++k) {
        const auto n = occupancy[static_cast<std::size_t>(k)];
        if (n > 0) out.prototypes(k, p) = sum[static_cast<std::size_t>(k)] / static_cast<double>(n);
      }
    } else {
      for (int k = 0; k < K; ++k) {
        if (occupancy[static_cast<std::size_t>(k)] == 0) continue;
        column.clear();
        for (std::size_t t = 0; t < T; ++t) {
          for (std::size_t m = 0; m < M; ++m) {
            if (S(t, m) == k) column.push_back(data(t, m, p));
          }
        }
        out.prototypes(k, p) = detail::median_of(column);
      }
    }
  }

  std::vector<bool> used(T * M, false);
  for (int k = 0; k < K; ++k) {
    if (occupancy[static_cast<std::size_t>(k)] != 0) continue;
    std::size_t worst = 0;
    double worst_d = -1.0;
    for (std::size_t c = 0; c < T * M; ++c) {
      if (used[c]) continue;
      const std::size_t t = c / M;
      const std::size_t m = c % M;
      const double d =
          detail::gower_unchecked(data.row(t, m), out.prototypes.row(S(t, m)), spec, ranges);
      if (d > worst_d) {
        worst_d = d;
        worst = c;
      }
    }
    used[worst] = true;
    const auto src = data.row(worst / M, worst % M);
    std::copy(src.begin(), src.end(), out.prototypes.row(k).begin());
    out.reseeded.push_back(k);
  }
  return out;
}

/// Fill every cell missing in `raw` with the prototype of its current
/// state; observed cells are copied unchanged.
inline PanelDataset impute_missing(const PanelDataset& raw, const StateMatrix& S,
                                   const PrototypeSet& mu) {
  if (S.n_times() != raw.n_times() || S.n_locations() != raw.n_locations()) {
    throw Error("impute_missing: state matrix does not match data");
  }
  if (mu.n_states() != S.n_states() || mu.n_features() != raw.n_features()) {
    throw Error("impute_missing: prototype shape mismatch");
  }
  PanelDataset out = raw;
  for (std::size_t t = 0; t < raw.n_times(); ++t) {
    for (std::size_t m = 0; m < raw.n_locations(); ++m) {
      for (std::size_t p = 0; p < raw.n_features(); ++p) {
        if (raw.missing(t, m, p)) out.set(t, m, p, mu(S(t, m), p));
      }
    }
  }
  return out;
}

/// One coordinate-descent run from a given initial state matrix.
/// `imputed` must be `raw` with its missing cells filled.
inline FitResult fit_from(const PanelDataset& raw, PanelDataset imputed, StateMatrix S,
                          const FitConfig& cfg, const SpatialWeights& w,
                          const FeatureRanges& ranges) {
  const Hyperparams& hp = cfg.hyperparams;
  const int K = hp.K;
  FitResult result;
  PrototypeSet mu;
  for (int iter = 0; iter < hp.max_iter; ++iter) {
    auto protos = fit_prototypes(imputed, S, K, cfg.prototype_rule, ranges);
    result.n_reseeded += static_cast<int>(protos.reseeded.size());
    mu = std::move(protos.prototypes);
    imputed = impute_missing(raw, S, mu);

    const StateMatrix previous = S;
    for (std::size_t m = 0; m < raw.n_locations(); ++m) {
      const auto decoded = decode_location(m, imputed, mu, S, hp, w, ranges);
      for (std::size_t t = 0; t < raw.n_times(); ++t) S.set(t, m, decoded.states[t]);
    }
    result.objective_trace.push_back(objective(imputed, S, mu, hp, w, ranges));
    result.n_iter = iter + 1;
    if (S == previous) {
      result.converged = true;
      break;
    }
  }
  result.states = std::move(S);
  result.prototypes = std::move(mu);
  result.imputed_data = std::move(imputed);
  return result;
}

/// Fit with cfg.hyperparams.n_starts seeded restarts (start s uses seed + s)
/// and keep the start with the lowest final objective (ties: lowest start).
inline FitResult fit(const PanelDataset& raw, const FitConfig& cfg) {
  const Hyperparams& hp = cfg.hyperparams;
  hp.validate();
  const FeatureRanges ranges = feature_ranges(raw);
  const SpatialWeights w = spatial_weights(raw.coords(), hp);
  const PanelDataset start_data = initial_impute(raw);

  std::vector<FitResult> runs(static_cast<std::size_t>(hp.n_starts));
  parallel_for(runs.size(), cfg.threads, [&](std::size_t s) {
    std::vector<std::string> warnings;
    StateMatrix S0 = initialize_states(start_data, hp.K, hp.seed + s, ranges, &warnings);
    runs[s] = fit_from(raw, start_data, std::move(S0), cfg, w, ranges);
    runs[s].start_index = static_cast<int>(s);
    runs[s].warnings = std::move(warnings);
  });

  std::size_t best = 0;
  for (std::size_t s = 1; s < runs.size(); ++s) {
    if (runs[s].objective() < runs[best].objective()) best = s;
  }
  return std::move(runs[best]);
}

/// The k-prototypes special case: no jump penalty and no spatial reward.
inline FitResult kprototypes_fit(const PanelDataset& raw, int K, const FitConfig& cfg) {
  FitConfig plain = cfg;
  plain.hyperparams.K = K;
  plain.hyperparams.lambda = 0.0;
  plain.hyperparams.gamma = 0.0;
  return fit(raw, plain);
}

}  // namespace stjm
