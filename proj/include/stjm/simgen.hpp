#pragma once

// Synthetic spatio-temporal panels with known regimes:
//
//   locations ~ U([0, 10]^2)
//   xi_t = beta xi_{t-1} + eta_t,  eta_t ~ N(0, Gamma),  Gamma_ij = exp(-alpha |c_i - c_j|)
//   truth: each xi_t sliced at its empirical j/K quantiles
//   z_tm | state k ~ N_P(mu_k 1, (1 - rho) I + rho 11')
//
// The last floor(P/2) features are turned into K-level categoricals, then
// time points are dropped (gaps) and cells masked (MCAR) as requested.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stjm/error.hpp"
#include "stjm/panel.hpp"
#include "stjm/random.hpp"
#include "stjm/spatial.hpp"

namespace stjm {

struct ScenarioSpec {
  std::size_t T = 50;
  std::size_t M = 50;
  std::size_t P = 10;
  int K = 3;
  double alpha = 0.01;  // spatial decay
  double beta = 0.90;   // temporal persistence
  double mu = 0.50;     // state mean separation
  double rho = 0.20;    // within-state feature correlation
  double gap_fraction = 0.0;
  double missing_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (T < 1 || M < 1 || P < 1) throw Error("scenario dimensions must be positive");
    if (K < 1) throw Error("scenario K must be >= 1");
    if (!(beta >= 0.0 && beta < 1.0)) throw Error("beta must lie in [0, 1)");
    if (!(alpha > 0.0)) throw Error("alpha must be > 0");
    const double rho_min = P > 1 ? -1.0 / static_cast<double>(P - 1) : -1.0;
    if (!(rho > rho_min && rho < 1.0)) throw Error("rho does not give a valid covariance");
    if (!(gap_fraction >= 0.0 && gap_fraction < 1.0)) throw Error("gap_fraction must lie in [0, 1)");
    if (!(missing_fraction >= 0.0 && missing_fraction < 1.0)) {
      throw Error("missing_fraction must lie in [0, 1)");
    }
  }

  /// Time points to simulate so that exactly T remain after gap injection.
  std::size_t generated_times() const {
    if (gap_fraction == 0.0) return T;
    return static_cast<std::size_t>(
        std::ceil(static_cast<double>(T) / (1.0 - gap_fraction) - 1e-9));
  }
};

struct SimulatedPanel {
  PanelDataset data;
  StateMatrix truth;
  ScenarioSpec scenario;
};

/// M i.i.d. uniform points in [0, 10]^2.
inline std::vector<Coord> sample_locations(std::size_t M, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Coord> out(M);
  for (auto& c : out) {
    c.first = 10.0 * uniform01(rng);
    c.second = 10.0 * uniform01(rng);
  }
  return out;
}

namespace detail {

// Lower Cholesky factor, retrying once with 1e-10 diagonal jitter.
inline Eigen::MatrixXd cholesky_factor(Eigen::MatrixXd a, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    a.diagonal().array() += 1e-10;
    llt.compute(a);
    if (llt.info() != Eigen::Success) {
      throw Error(std::string("factorization of ") + what + " failed");
    }
  }
  return llt.matrixL();
}

inline Eigen::VectorXd standard_normals(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

}  // namespace detail

/// T x M realization of the AR(1) Gaussian field, started from its
/// stationary law N(0, Gamma / (1 - beta^2)).
inline Eigen::MatrixXd simulate_latent_field(std::span<const Coord> coords, std::size_t T,
                                             double alpha, double beta, std::uint64_t seed) {
  const auto M = static_cast<Eigen::Index>(coords.size());
  if (M == 0 || T == 0) throw Error("simulate_latent_field: empty dimensions");
  if (!(beta >= 0.0 && beta < 1.0)) throw Error("simulate_latent_field: beta must lie in [0, 1)");
  Eigen::MatrixXd gamma(M, M);
  for (Eigen::Index i = 0; i < M; ++i) {
    for (Eigen::Index j = 0; j < M; ++j) {
      gamma(i, j) = std::exp(-alpha * euclidean(coords[static_cast<std::size_t>(i)],
                                                coords[static_cast<std::size_t>(j)]));
    }
  }
  const Eigen::MatrixXd L = detail::cholesky_factor(std::move(gamma), "spatial covariance");

  Rng rng(seed);
  Eigen::MatrixXd xi(static_cast<Eigen::Index>(T), M);
  xi.row(0) = (L * detail::standard_normals(rng, M)).transpose() / std::sqrt(1.0 - beta * beta);
  for (Eigen::Index t = 1; t < static_cast<Eigen::Index>(T); ++t) {
    xi.row(t) = beta * xi.row(t - 1) + (L * detail::standard_normals(rng, M)).transpose();
  }
  return xi;
}

/// Empirical quantile with linear interpolation between order statistics
/// (the usual "type 7" definition). `sorted` must be ascending.
inline double empirical_quantile(std::span<const double> sorted, double prob) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Per-time slicing of the field at its j/K empirical quantiles. State is
/// the number of cut points strictly below the value, so ties at a cut go
/// to the lower state.
inline StateMatrix slice_states(const Eigen::MatrixXd& xi, int K) {
  if (K < 1) throw Error("slice_states: K must be >= 1");
  const auto T = static_cast<std::size_t>(xi.rows());
  const auto M = static_cast<std::size_t>(xi.cols());
  StateMatrix S(T, M, K);
  std::vector<double> sorted(M);
  std::vector<double> cuts(static_cast<std::size_t>(K > 1 ? K - 1 : 0));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t m = 0; m < M; ++m) {
      sorted[m] = xi(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(m));
    }
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t j = 0; j < cuts.size(); ++j) {
      cuts[j] = empirical_quantile(sorted, static_cast<double>(j + 1) / K);
    }
    for (std::size_t m = 0; m < M; ++m) {
      const double v = xi(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(m));
      int s = 0;
      for (double c : cuts) s += (c < v);
      S.set(t, m, s);
    }
  }
  return S;
}

/// Mean of every feature in state k: equally spaced from +mu (k = 0) to
/// -mu (k = K-1). K = 3 gives (mu, 0, -mu).
inline double state_mean(int k, int K, double mu) {
  if (K == 1) return 0.0;
  return mu - 2.0 * mu * static_cast<double>(k) / static_cast<double>(K - 1);
}

/// T x M x P continuous draws, cell (t, m, p) at ((t * M) + m) * P + p.
inline std::vector<double> simulate_features(const StateMatrix& truth, const ScenarioSpec& spec,
                                             std::uint64_t seed) {
  const std::size_t P = spec.P;
  const double rho_min = P > 1 ? -1.0 / static_cast<double>(P - 1) : -1.0;
  if (!(spec.rho > rho_min && spec.rho < 1.0)) {
    throw Error("simulate_features: rho does not give a valid covariance");
  }
  const auto n = static_cast<Eigen::Index>(P);
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(n, n, spec.rho);
  sigma.diagonal().setOnes();
  const Eigen::MatrixXd L = detail::cholesky_factor(std::move(sigma), "feature covariance");

  Rng rng(seed);
  const std::size_t T = truth.n_times();
  const std::size_t M = truth.n_locations();
  std::vector<double> out(T * M * P);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t m = 0; m < M; ++m) {
      const double mean = state_mean(truth(t, m), truth.n_states(), spec.mu);
      const Eigen::VectorXd z = L * detail::standard_normals(rng, n);
      for (std::size_t p = 0; p < P; ++p) {
        out[(t * M + m) * P + p] = mean + z[static_cast<Eigen::Index>(p)];
      }
    }
  }
  return out;
}

/// Standard-normal 10% / 90% quantiles.
inline constexpr double kBandHalfWidth = 1.2815515655446004;

/// Draw a categorical level for a value generated in state k. Inside the
/// state's (q10, q90) band of N(mu_k, 1) the state's own level has
/// probability 0.8 and the others share 0.2; outside it the level is uniform.
inline int categorical_level(double value, int k, int K, double mu, Rng& rng) {
  if (K == 1) return 0;
  const double centre = state_mean(k, K, mu);
  const double u = uniform01(rng);
  if (value > centre - kBandHalfWidth && value < centre + kBandHalfWidth) {
    if (u < 0.8) return k;
    const auto other = static_cast<int>((u - 0.8) / 0.2 * (K - 1));
    const int j = std::min(other, K - 2);
    return j < k ? j : j + 1;
  }
  return std::min(static_cast<int>(u * K), K - 1);
}

/// Build the mixed panel: the first P - floor(P/2) features stay
/// continuous, the rest become K-level categoricals named "1".."K".
inline PanelDataset categorize_features(const std::vector<double>& cont,
                                        const StateMatrix& truth, const ScenarioSpec& spec,
                                        std::vector<double> times, std::vector<Coord> coords,
                                        std::uint64_t seed) {
  const std::size_t T = truth.n_times();
  const std::size_t M = truth.n_locations();
  const std::size_t P = spec.P;
  const int K = truth.n_states();
  if (cont.size() != T * M * P) throw Error("categorize_features: array shape mismatch");
  const std::size_t first_categorical = P - P / 2;

  std::vector<std::string> levels;
  for (int k = 1; k <= K; ++k) levels.push_back(std::to_string(k));
  std::vector<Feature> features;
  for (std::size_t p = 0; p < P; ++p) {
    const std::string name = "f" + std::to_string(p + 1);
    features.push_back(p < first_categorical ? Feature::continuous(name)
                                             : Feature::categorical(name, levels));
  }

  Rng rng(seed);
  std::vector<double> values = cont;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t p = first_categorical; p < P; ++p) {
        double& v = values[(t * M + m) * P + p];
        v = categorical_level(v, truth(t, m), K, spec.mu, rng);
      }
    }
  }
  return PanelDataset(FeatureSpec(std::move(features)), std::move(times), std::move(coords),
                      CoordSystem::planar, std::move(values));
}

/// Drop random interior time points (never the first) so that `target_T`
/// remain. Retained rows keep their original timestamps; truth rows are
/// dropped in lockstep.
inline SimulatedPanel inject_gaps(const SimulatedPanel& in, std::size_t target_T,
                                  std::uint64_t seed) {
  const std::size_t T = in.data.n_times();
  if (target_T == T) return in;
  if (target_T < 1 || target_T > T) throw Error("inject_gaps: not enough time points to drop");
  const std::size_t drop = T - target_T;

  std::vector<std::size_t> interior(T - 1);
  for (std::size_t i = 0; i < interior.size(); ++i) interior[i] = i + 1;
  Rng rng(seed);
  for (std::size_t i = 0; i < drop; ++i) {
    const std::size_t j = i + uniform_index(rng, interior.size() - i);
    std::swap(interior[i], interior[j]);
  }
  std::vector<bool> keep(T, true);
  for (std::size_t i = 0; i < drop; ++i) keep[interior[i]] = false;

  const std::size_t M = in.data.n_locations();
  std::vector<double> times;
  std::vector<double> values;
  std::vector<int> states;
  for (std::size_t t = 0; t < T; ++t) {
    if (!keep[t]) continue;
    times.push_back(in.data.times()[t]);
    for (std::size_t m = 0; m < M; ++m) {
      const auto row = in.data.row(t, m);
      values.insert(values.end(), row.begin(), row.end());
      states.push_back(in.truth(t, m));
    }
  }
  SimulatedPanel out{PanelDataset(in.data.spec(), std::move(times), in.data.coords(),
                                  in.data.coord_system(), std::move(values)),
                     StateMatrix(target_T, M, in.truth.n_states(), std::move(states)),
                     in.scenario};
  return out;
}

/// Mask exactly round(fraction * T * M * P) observed cells, chosen uniformly.
/// Masks that would leave a feature with no observed value are redrawn.
inline PanelDataset inject_missing(const PanelDataset& panel, double fraction,
                                   std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw Error("inject_missing: fraction must lie in [0, 1)");
  const auto& values = panel.values();
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(values.size())));
  if (count == 0) return panel;

  std::vector<std::size_t> observed;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!is_missing(values[i])) observed.push_back(i);
  }
  if (count > observed.size()) throw Error("inject_missing: not enough observed cells");

  const std::size_t P = panel.n_features();
  Rng rng(seed);
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<std::size_t> pool = observed;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + uniform_index(rng, pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    std::vector<double> masked = values;
    for (std::size_t i = 0; i < count; ++i) masked[pool[i]] = kMissing;

    std::vector<bool> has_obs(P, false);
    for (std::size_t i = 0; i < masked.size(); ++i) {
      if (!is_missing(masked[i])) has_obs[i % P] = true;
    }
    if (std::all_of(has_obs.begin(), has_obs.end(), [](bool b) { return b; })) {
      return PanelDataset(panel.spec(), panel.times(), panel.coords(), panel.coord_system(),
                          std::move(masked));
    }
  }
  throw Error("inject_missing: could not keep an observed value in every feature");
}

/// Full generator: a pure function of the scenario (seed included).
inline SimulatedPanel generate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  const std::size_t T_gen = spec.generated_times();
  auto coords = sample_locations(spec.M, derive_seed(spec.seed, 1));
  const Eigen::MatrixXd xi =
      simulate_latent_field(coords, T_gen, spec.alpha, spec.beta, derive_seed(spec.seed, 2));
  StateMatrix truth = slice_states(xi, spec.K);
  const auto cont = simulate_features(truth, spec, derive_seed(spec.seed, 3));

  std::vector<double> times(T_gen);
  for (std::size_t t = 0; t < T_gen; ++t) times[t] = static_cast<double>(t);
  SimulatedPanel sim{categorize_features(cont, truth, spec, std::move(times), std::move(coords),
                                         derive_seed(spec.seed, 4)),
                     std::move(truth), spec};
  if (T_gen != spec.T) sim = inject_gaps(sim, spec.T, derive_seed(spec.seed, 5));
  if (spec.missing_fraction > 0.0) {
    sim.data = inject_missing(sim.data, spec.missing_fraction, derive_seed(spec.seed, 6));
  }
  return sim;
}

}  // namespace stjm
