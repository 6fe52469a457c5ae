#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "stjm/decode.hpp"
#include "stjm/objective.hpp"
#include "test_support.hpp"

namespace stjm {
namespace {

std::vector<double> random_costs(std::size_t T, std::size_t K, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 1.0);
  std::vector<double> c(T * K);
  for (auto& v : c) v = u(rng);
  return c;
}

std::vector<double> random_times(std::size_t T, std::mt19937_64& rng) {
  std::vector<double> times(T);
  double tau = 0.0;
  for (auto& t : times) {
    t = tau;
    tau += 1.0 + static_cast<double>(rng() % 3);
  }
  return times;
}

TEST(DecodeSequence, NoPenaltyIsPointwiseArgmin) {
  const std::vector<double> cost{0.3, 0.1, 0.2,  //
                                 0.5, 0.5, 0.4,  //
                                 0.2, 0.2, 0.9};
  const auto d = decode_sequence(cost, 3, std::vector<double>{0, 1, 2}, 0.0);
  EXPECT_EQ(d.states, (std::vector<int>{1, 2, 0}));  // last row ties to the lowest index
  EXPECT_NEAR(d.value, 0.1 + 0.4 + 0.2, 1e-15);
}

TEST(DecodeSequence, HugePenaltyGivesConstantSequence) {
  std::mt19937_64 rng(1);
  const auto cost = random_costs(6, 3, rng);
  const auto d = decode_sequence(cost, 3, std::vector<double>{0, 1, 2, 3, 4, 5}, 1e6);
  for (int s : d.states) EXPECT_EQ(s, d.states[0]);
}

TEST(DecodeSequence, RejectsBadShapes) {
  EXPECT_THROW(decode_sequence(std::vector<double>{1.0}, 2, std::vector<double>{0.0}, 0.1), Error);
  EXPECT_THROW(decode_sequence(std::vector<double>{}, 0, std::vector<double>{}, 0.1), Error);
}

TEST(DecodeSequence, MatchesBruteForceWithIrregularGaps) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t T = 1 + rng() % 6;
    const std::size_t K = 1 + rng() % 4;
    const double lambda = 0.5 * static_cast<double>(rng() % 5);
    const auto cost = random_costs(T, K, rng);
    const auto times = random_times(T, rng);
    const auto d = decode_sequence(cost, K, times, lambda);
    const auto bf = testing::brute_force_sequence(cost, K, times, lambda);
    EXPECT_NEAR(d.value, bf.value, 1e-12);
    EXPECT_NEAR(testing::sequence_cost(cost, K, times, lambda, d.states), bf.value, 1e-12);
  }
}

// Cost table for location m built from the definition: Gower distance minus
// gamma times the weight of other locations sharing each state.
std::vector<double> oracle_costs(std::size_t m, const PanelDataset& data, const PrototypeSet& mu,
                                 const StateMatrix& S, double gamma, const SpatialWeights& w) {
  const auto in = testing::oracle_inputs(data);
  const auto K = static_cast<std::size_t>(mu.n_states());
  std::vector<double> cost(data.n_times() * K);
  for (std::size_t t = 0; t < data.n_times(); ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      double c = testing::gower_oracle(testing::row_vec(data, t, m),
                                       testing::proto_vec(mu, static_cast<int>(k)), in.categorical,
                                       in.range);
      for (std::size_t i = 0; i < data.n_locations(); ++i)
        if (i != m && S(t, i) == static_cast<int>(k)) c -= gamma * w.weight(i, m);
      cost[t * K + k] = c;
    }
  }
  return cost;
}

TEST(DecodeLocation, MatchesBruteForceOnToyPanel) {
  const auto data = testing::random_panel(5, 3, 4, 7, true);
  const auto S = testing::random_states(5, 3, 3, 8);
  const auto mu = testing::random_prototypes(data, 3, 9);
  Hyperparams hp;
  hp.K = 3;
  hp.lambda = 0.2;
  hp.gamma = 0.1;
  const auto w = spatial_weights(data.coords(), DistanceMetric::euclidean, 1.0);
  const auto ranges = feature_ranges(data);
  for (std::size_t m = 0; m < 3; ++m) {
    const auto d = decode_location(m, data, mu, S, hp, w, ranges);
    const auto bf =
        testing::brute_force_sequence(oracle_costs(m, data, mu, S, hp.gamma, w), 3, data.times(), hp.lambda);
    EXPECT_NEAR(d.value, bf.value, 1e-12);
  }
}

// Replacing location m's sequence by its decode never raises the full
// objective, and decoding again reproduces the same sequence.
TEST(DecodeLocation, BlockUpdateIsMonotoneAndIdempotent) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto data = testing::random_panel(6, 4, 3, seed, true);
    auto S = testing::random_states(6, 4, 3, seed + 100);
    const auto mu = testing::random_prototypes(data, 3, seed + 200);
    Hyperparams hp;
    hp.K = 3;
    hp.lambda = 0.3;
    hp.gamma = 0.2;
    const auto w = spatial_weights(data.coords(), DistanceMetric::euclidean, 1.0);
    const auto ranges = feature_ranges(data);
    double before = objective(data, S, mu, hp, w, ranges);
    for (std::size_t m = 0; m < 4; ++m) {
      const auto d = decode_location(m, data, mu, S, hp, w, ranges);
      for (std::size_t t = 0; t < 6; ++t) S.set(t, m, d.states[t]);
      const double after = objective(data, S, mu, hp, w, ranges);
      EXPECT_LE(after, before + 1e-12);
      before = after;
      const auto again = decode_location(m, data, mu, S, hp, w, ranges);
      EXPECT_EQ(again.states, d.states);
    }
  }
}

}  // namespace
}  // namespace stjm
