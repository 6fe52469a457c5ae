#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "stjm/objective.hpp"
#include "test_support.hpp"

namespace stjm {
namespace {

std::vector<std::vector<double>> dense(const SpatialWeights& w) {
  std::vector<std::vector<double>> out(w.size(), std::vector<double>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = 0; j < w.size(); ++j) out[i][j] = w.weight(i, j);
  return out;
}

TEST(Objective, PenaltiesOffIsSumOfGowerDistances) {
  const auto data = testing::random_panel(5, 3, 4, 1);
  const auto S = testing::random_states(5, 3, 2, 2);
  const auto mu = testing::random_prototypes(data, 2, 3);
  const auto ranges = feature_ranges(data);
  const auto w = spatial_weights(data.coords(), DistanceMetric::euclidean, 1.0);
  Hyperparams hp;
  hp.lambda = 0.0;
  hp.gamma = 0.0;
  double expected = 0.0;
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t m = 0; m < 3; ++m)
      expected += gower_distance(data.row(t, m), mu.row(S(t, m)), data.spec(), ranges);
  EXPECT_NEAR(objective(data, S, mu, hp, w, ranges), expected, 1e-12);
}

TEST(Objective, SingleLocationConstantState) {
  const auto data = testing::random_panel(2, 1, 3, 4);
  const StateMatrix S(2, 1, 2, 1);
  const auto mu = testing::random_prototypes(data, 2, 5);
  const auto ranges = feature_ranges(data);
  const auto w = spatial_weights(data.coords(), DistanceMetric::euclidean, 1.0);
  Hyperparams hp;
  hp.lambda = 3.0;
  hp.gamma = 2.0;
  const double expected = gower_distance(data.row(0, 0), mu.row(1), data.spec(), ranges) +
                          gower_distance(data.row(1, 0), mu.row(1), data.spec(), ranges);
  EXPECT_DOUBLE_EQ(objective(data, S, mu, hp, w, ranges), expected);
}

TEST(Objective, MatchesTermByTermOracle) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto data = testing::random_panel(3 + seed % 4, 2 + seed % 3, 4, seed, true);
    const int K = 2 + static_cast<int>(seed % 2);
    const auto S = testing::random_states(data.n_times(), data.n_locations(), K, seed + 7);
    const auto mu = testing::random_prototypes(data, K, seed + 9);
    Hyperparams hp;
    hp.lambda = 0.3;
    hp.gamma = 0.2;
    const auto w = spatial_weights(data.coords(), DistanceMetric::euclidean, 1.0);
    const double got = objective(data, S, mu, hp, w, feature_ranges(data));
    const double want = testing::objective_oracle(data, S, mu, hp.lambda, hp.gamma, dense(w),
                                                  testing::oracle_inputs(data));
    EXPECT_NEAR(got, want, 1e-12) << "seed " << seed;
  }
}

TEST(Objective, RejectsMissingCells) {
  const auto data = testing::random_panel(4, 2, 2, 3, false, 0.5);
  ASSERT_GT(data.missing_count(), 0u);
  const StateMatrix S(4, 2, 1);
  const PrototypeSet mu(1, 2);
  const auto w = spatial_weights(data.coords(), DistanceMetric::euclidean, 1.0);
  EXPECT_THROW(objective(data, S, mu, Hyperparams{}, w, feature_ranges(data)), Error);
}

// Doubling the gap before a jump halves that jump's cost.
TEST(Objective, JumpCostInverseInTimeGap) {
  FeatureSpec spec({Feature::continuous("x")});
  const std::vector<double> values{0.0, 1.0, 2.0};
  const PanelDataset a(spec, {0.0, 1.0, 2.0}, {{0, 0}}, CoordSystem::planar, values);
  const PanelDataset b(spec, {0.0, 1.0, 3.0}, {{0, 0}}, CoordSystem::planar, values);
  const StateMatrix S(3, 1, 2, std::vector<int>{0, 0, 1});
  PrototypeSet mu(2, 1);
  mu(0, 0) = 0.5;
  mu(1, 0) = 2.0;
  Hyperparams hp;
  hp.lambda = 0.8;
  hp.gamma = 0.0;
  const auto w = spatial_weights(a.coords(), DistanceMetric::euclidean, 1.0);
  const auto ranges = feature_ranges(a);
  Hyperparams off = hp;
  off.lambda = 0.0;
  const double jump_a = objective(a, S, mu, hp, w, ranges) - objective(a, S, mu, off, w, ranges);
  const double jump_b = objective(b, S, mu, hp, w, ranges) - objective(b, S, mu, off, w, ranges);
  EXPECT_NEAR(jump_a, 0.8, 1e-15);
  EXPECT_NEAR(jump_b, 0.4, 1e-15);
}

// With gamma = 0 the objective is the sum of single-location objectives.
TEST(Objective, DecomposesAcrossLocationsWithoutSpatialTerm) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto data = testing::random_panel(6, 4, 3, seed, true);
    const auto S = testing::random_states(6, 4, 3, seed + 1);
    const auto mu = testing::random_prototypes(data, 3, seed + 2);
    const auto ranges = feature_ranges(data);
    Hyperparams hp;
    hp.lambda = 0.7;
    hp.gamma = 0.0;
    const auto w = spatial_weights(data.coords(), DistanceMetric::euclidean, 1.0);
    const double joint = objective(data, S, mu, hp, w, ranges);
    double separate = 0.0;
    for (std::size_t m = 0; m < 4; ++m) {
      std::vector<double> values;
      std::vector<int> states;
      for (std::size_t t = 0; t < 6; ++t) {
        const auto r = data.row(t, m);
        values.insert(values.end(), r.begin(), r.end());
        states.push_back(S(t, m));
      }
      const PanelDataset single(data.spec(), data.times(), {data.coords()[m]}, CoordSystem::planar, values);
      const StateMatrix Sm(6, 1, 3, states);
      const auto wm = spatial_weights(single.coords(), DistanceMetric::euclidean, 1.0);
      separate += objective(single, Sm, mu, hp, wm, ranges);
    }
    EXPECT_NEAR(joint, separate, 1e-12 * std::max(1.0, std::abs(joint)));
  }
}

// Relabeling states and prototypes jointly leaves the objective unchanged.
TEST(Objective, InvariantUnderJointRelabeling) {
  const auto data = testing::random_panel(5, 4, 4, 21, true);
  const auto S = testing::random_states(5, 4, 3, 22);
  const auto mu = testing::random_prototypes(data, 3, 23);
  const auto ranges = feature_ranges(data);
  Hyperparams hp;
  hp.lambda = 0.2;
  hp.gamma = 0.3;
  const auto w = spatial_weights(data.coords(), DistanceMetric::euclidean, 1.0);
  const double base = objective(data, S, mu, hp, w, ranges);
  std::vector<int> perm{0, 1, 2};
  do {
    std::vector<int> relabeled;
    for (int s : S.data()) relabeled.push_back(perm[static_cast<std::size_t>(s)]);
    PrototypeSet mu2(3, data.n_features());
    for (int k = 0; k < 3; ++k)
      for (std::size_t p = 0; p < data.n_features(); ++p) mu2(perm[static_cast<std::size_t>(k)], p) = mu(k, p);
    const StateMatrix S2(5, 4, 3, relabeled);
    EXPECT_NEAR(objective(data, S2, mu2, hp, w, ranges), base, 1e-12);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

}  // namespace
}  // namespace stjm
