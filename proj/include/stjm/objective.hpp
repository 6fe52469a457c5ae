#pragma once

#include <cstddef>

#include "stjm/error.hpp"
#include "stjm/gower.hpp"
#include "stjm/panel.hpp"
#include "stjm/spatial.hpp"

namespace stjm {

/// Spatial reward for assigning `state` to (t, m) given the current labels
/// of every other location: sum over i != m of w_im * [s_{t,i} == state].
inline double spatial_agreement(const StateMatrix& S, const SpatialWeights& w, std::size_t t,
                                std::size_t m, int state) {
  double sum = 0.0;
  const auto wm = w.weights_from(m);
  for (std::size_t i = 0; i < S.n_locations(); ++i) {
    if (i != m && S(t, i) == state) sum += wm[i];
  }
  return sum;
}

/// Cost contributed by location m's own row: Gower fit, minus the spatial
/// reward from agreeing neighbours, plus gap-weighted jump penalties.
inline double location_objective(const PanelDataset& data, const StateMatrix& S,
                                 const PrototypeSet& mu, const Hyperparams& hp,
                                 const SpatialWeights& w, const FeatureRanges& ranges,
                                 std::size_t m) {
  const auto& times = data.times();
  const std::size_t T = data.n_times();
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const int s = S(t, m);
    total += detail::gower_unchecked(data.row(t, m), mu.row(s), data.spec(), ranges);
    if (hp.gamma != 0.0) total -= hp.gamma * spatial_agreement(S, w, t, m, s);
    if (t + 1 < T && S(t + 1, m) != s) total += hp.lambda / (times[t + 1] - times[t]);
  }
  return total;
}

/// Full model objective over every location. `data` must be fully imputed.
inline double objective(const PanelDataset& data, const StateMatrix& S, const PrototypeSet& mu,
                        const Hyperparams& hp, const SpatialWeights& w,
                        const FeatureRanges& ranges) {
  if (S.n_times() != data.n_times() || S.n_locations() != data.n_locations()) {
    throw Error("objective: state matrix shape does not match data");
  }
  if (mu.n_states() != S.n_states() || mu.n_features() != data.n_features()) {
    throw Error("objective: prototype shape mismatch");
  }
  if (w.size() != data.n_locations()) throw Error("objective: weight matrix size mismatch");
  if (data.missing_count() != 0) throw Error("objective: data contains missing cells");

  double total = 0.0;
  for (std::size_t m = 0; m < data.n_locations(); ++m) {
    total += location_objective(data, S, mu, hp, w, ranges, m);
  }
  return total;
}

}  // namespace stjm
