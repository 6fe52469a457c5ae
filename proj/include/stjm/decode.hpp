#pragma once

// Exact per-location state-sequence decoding. Given per-time state costs,
// a backward value recursion
//
//   V(T-1, s) = c(T-1, s)
//   V(t, s)   = c(t, s) + min_j [ V(t+1, j) + lambda [s != j] / (tau_{t+1} - tau_t) ]
//
// is followed by forward argmin backtracking. O(T K^2).

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "stjm/error.hpp"
#include "stjm/gower.hpp"
#include "stjm/objective.hpp"
#include "stjm/panel.hpp"
#include "stjm/spatial.hpp"

namespace stjm {

struct DecodedSequence {
  std::vector<int> states;  // length T, labels 0..K-1
  double value = 0.0;       // minimal total cost
};

/// Minimize sum_t cost(t, s_t) + sum_t lambda [s_{t+1} != s_t] / (tau_{t+1} - tau_t)
/// over all K^T sequences. `cost` is T x K row-major. Ties go to the lowest
/// state index.
inline DecodedSequence decode_sequence(std::span<const double> cost, std::size_t K,
                                       std::span<const double> times, double lambda) {
  const std::size_t T = times.size();
  if (K == 0 || T == 0) throw Error("decode_sequence: empty problem");
  if (cost.size() != T * K) throw Error("decode_sequence: cost must be T x K");

  std::vector<double> value(cost.begin(), cost.end());
  for (std::size_t t = T - 1; t-- > 0;) {
    const double jump = lambda / (times[t + 1] - times[t]);
    const double* next = value.data() + (t + 1) * K;
    for (std::size_t s = 0; s < K; ++s) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < K; ++j) {
        const double v = next[j] + (s != j ? jump : 0.0);
        if (v < best) best = v;
      }
      value[t * K + s] += best;
    }
  }

  DecodedSequence out;
  out.states.resize(T);
  std::size_t prev = 0;
  for (std::size_t t = 0; t < T; ++t) {
    const double jump = t == 0 ? 0.0 : lambda / (times[t] - times[t - 1]);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < K; ++j) {
      const double v = value[t * K + j] + (t > 0 && j != prev ? jump : 0.0);
      if (v < best) {
        best = v;
        arg = j;
      }
    }
    if (t == 0) out.value = best;
    out.states[t] = static_cast<int>(arg);
    prev = arg;
  }
  return out;
}

/// Per-time state costs for location m: Gower distance to each prototype
/// minus gamma times the agreement with the other locations' current states.
inline std::vector<double> location_costs(std::size_t m, const PanelDataset& data,
                                          const PrototypeSet& mu, const StateMatrix& S,
                                          const Hyperparams& hp, const SpatialWeights& w,
                                          const FeatureRanges& ranges) {
  const std::size_t T = data.n_times();
  const std::size_t M = data.n_locations();
  const auto K = static_cast<std::size_t>(mu.n_states());
  std::vector<double> cost(T * K);
  std::vector<double> reward(K);
  const auto wm = w.weights_from(m);
  for (std::size_t t = 0; t < T; ++t) {
    const auto z = data.row(t, m);
    std::fill(reward.begin(), reward.end(), 0.0);
    if (hp.gamma != 0.0) {
      for (std::size_t i = 0; i < M; ++i) {
        if (i != m) reward[static_cast<std::size_t>(S(t, i))] += wm[i];
      }
    }
    for (std::size_t k = 0; k < K; ++k) {
      cost[t * K + k] = detail::gower_unchecked(z, mu.row(static_cast<int>(k)), data.spec(),
                                                ranges) -
                        hp.gamma * reward[k];
    }
  }
  return cost;
}

/// Optimal state sequence for location m with every other location's
/// states held at their current values in S.
inline DecodedSequence decode_location(std::size_t m, const PanelDataset& data,
                                       const PrototypeSet& mu, const StateMatrix& S,
                                       const Hyperparams& hp, const SpatialWeights& w,
                                       const FeatureRanges& ranges) {
  if (m >= data.n_locations()) throw Error("decode_location: location out of range");
  if (S.n_times() != data.n_times() || S.n_locations() != data.n_locations()) {
    throw Error("decode_location: state matrix shape does not match data");
  }
  if (mu.n_states() != S.n_states() || mu.n_features() != data.n_features()) {
    throw Error("decode_location: prototype shape mismatch");
  }
  if (w.size() != data.n_locations()) throw Error("decode_location: weight matrix mismatch");
  const auto cost = location_costs(m, data, mu, S, hp, w, ranges);
  return decode_sequence(cost, static_cast<std::size_t>(mu.n_states()), data.times(),
                         hp.lambda);
}

}  // namespace stjm
