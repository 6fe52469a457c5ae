#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "stjm/io.hpp"
#include "test_support.hpp"

namespace stjm {
namespace {

namespace fs = std::filesystem;

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

const char* kSchema = R"({"features": [{"name": "wind", "kind": "categorical", "levels": ["calm", "windy"]}]})";

TEST(Ingest, CompletePanel) {
  const auto dir = testing::temp_dir("ingest_complete");
  write(dir / "p.csv",
        "time,location,lat,lon,temp,wind\n"
        "2024-01-01T00:00,S1,1.30,103.80,27.5,calm\n"
        "2024-01-01T00:00,S2,1.35,103.90,28.0,windy\n"
        "2024-01-01T01:00,S1,1.30,103.80,27.9,calm\n"
        "2024-01-01T01:00,S2,1.35,103.90,28.4,calm\n"
        "2024-01-01T02:00,S2,1.35,103.90,28.1,windy\n"
        "2024-01-01T02:00,S1,1.30,103.80,28.3,windy\n");
  write(dir / "s.json", kSchema);
  const auto panel = ingest_panel(dir / "p.csv", dir / "s.json");
  EXPECT_EQ(panel.n_times(), 3u);
  EXPECT_EQ(panel.n_locations(), 2u);
  EXPECT_EQ(panel.n_features(), 2u);
  EXPECT_EQ(panel.missing_count(), 0u);
  EXPECT_EQ(panel.coord_system(), CoordSystem::geographic);
  EXPECT_EQ(panel.times(), (std::vector<double>{0.0, 1.0, 2.0}));
  EXPECT_EQ(panel(2, 0, 0), 28.3);
  EXPECT_EQ(panel(2, 0, 1), 1.0);
  EXPECT_TRUE(panel.spec().is_categorical(1));
  EXPECT_EQ(panel.location_label(1), "S2");
}

TEST(Ingest, AbsentRowIsFullyMissingAndGapsAreHours) {
  const auto dir = testing::temp_dir("ingest_absent");
  write(dir / "p.csv",
        "time,location,x,y,a,b\n"
        "0,L1,0,0,1,2\n"
        "0,L2,1,1,3,\n"
        "1,L1,0,0,5,6\n"
        "3,L2,1,1,7,8\n");
  const auto panel = ingest_panel(dir / "p.csv");
  EXPECT_EQ(panel.times(), (std::vector<double>{0.0, 1.0, 3.0}));
  EXPECT_TRUE(panel.missing(1, 1, 0));
  EXPECT_TRUE(panel.missing(1, 1, 1));
  EXPECT_TRUE(panel.missing(2, 0, 0));
  EXPECT_TRUE(panel.missing(0, 1, 1));
  EXPECT_FALSE(panel.missing(0, 1, 0));
  EXPECT_EQ(panel.missing_count(), 5u);
}

// The second transition sits across a 2-hour gap, so it costs lambda / 2.
TEST(Ingest, GapWeightedJumpPenalty) {
  const auto dir = testing::temp_dir("ingest_gap");
  write(dir / "p.csv", "time,location,x,y,a\n0,L,0,0,0\n1,L,0,0,1\n3,L,0,0,0\n");
  const auto panel = ingest_panel(dir / "p.csv");
  PrototypeSet mu(2, 1);
  mu(1, 0) = 1.0;
  const auto w = spatial_weights(panel.coords(), DistanceMetric::euclidean, 1.0);
  Hyperparams hp;
  hp.K = 2;
  hp.lambda = 0.4;
  hp.gamma = 0.0;
  const double obj = objective(panel, StateMatrix(3, 1, 2, std::vector<int>{0, 1, 0}), mu, hp, w,
                               feature_ranges(panel));
  EXPECT_NEAR(obj, 0.4 + 0.2, 1e-15);
}

TEST(Ingest, Errors) {
  const auto dir = testing::temp_dir("ingest_errors");
  write(dir / "s.json", kSchema);
  write(dir / "dup.csv", "time,location,x,y,temp,wind\n0,A,0,0,1,calm\n0,A,0,0,2,calm\n");
  EXPECT_THROW(ingest_panel(dir / "dup.csv", dir / "s.json"), Error);
  write(dir / "lvl.csv", "time,location,x,y,temp,wind\n0,A,0,0,1,stormy\n");
  EXPECT_THROW(ingest_panel(dir / "lvl.csv", dir / "s.json"), Error);
  write(dir / "coord.csv", "time,location,x,y,temp,wind\n0,A,0,0,1,calm\n1,A,0,1,1,calm\n");
  EXPECT_THROW(ingest_panel(dir / "coord.csv", dir / "s.json"), Error);
  write(dir / "absent.csv", "time,location,x,y,temp\n0,A,0,0,1\n");
  EXPECT_THROW(ingest_panel(dir / "absent.csv", dir / "s.json"), Error);
  write(dir / "time.csv", "time,location,x,y,temp\nnoon,A,0,0,1\n");
  EXPECT_THROW(ingest_panel(dir / "time.csv"), Error);
}

TEST(ParseTime, IsoTimestamps) {
  EXPECT_EQ(parse_time_hours("1970-01-02T01:30"), 25.5);
  EXPECT_EQ(parse_time_hours("2024-03-01 00:00:00") - parse_time_hours("2024-02-28T00:00:00Z"), 48.0);
  EXPECT_EQ(parse_time_hours("12.5"), 12.5);
}

PanelDataset series(std::vector<double> times, std::vector<double> x) {
  return PanelDataset(FeatureSpec({Feature::continuous("x"), Feature::categorical("c", {"a", "b"})}),
                      std::move(times), {{0, 0}}, CoordSystem::planar, [&] {
                        std::vector<double> v;
                        for (double xi : x) {
                          v.push_back(xi);
                          v.push_back(0.0);
                        }
                        return v;
                      }());
}

TEST(RollingFeatures, ConstantSeries) {
  const auto out = rolling_features(series({0, 1, 2, 3}, {4, 4, 4, 4}), 3);
  ASSERT_EQ(out.n_features(), 4u);
  EXPECT_EQ(out.spec()[2].name, "x_mean3h");
  EXPECT_EQ(out.spec()[3].name, "x_sd3h");
  EXPECT_EQ(out(3, 0, 2), 4.0);
  EXPECT_EQ(out(3, 0, 3), 0.0);
  EXPECT_TRUE(out.missing(0, 0, 3));
  EXPECT_EQ(out(0, 0, 2), 4.0);
}

TEST(RollingFeatures, HandComputedMeanAndSd) {
  const auto out = rolling_features(series({0, 1, 2, 3, 4}, {1, 2, 3, 4, 5}), 5);
  EXPECT_DOUBLE_EQ(out(4, 0, 2), 3.0);
  EXPECT_NEAR(out(4, 0, 3), std::sqrt(2.5), 1e-15);
  EXPECT_NEAR(out(4, 0, 3), 1.5811, 1e-4);
}

// A gap shrinks the window content rather than reaching further back.
TEST(RollingFeatures, TimeBasedWindow) {
  const auto out = rolling_features(series({0, 1, 5}, {10, 20, 30}), 2);
  EXPECT_EQ(out(2, 0, 2), 30.0);
  EXPECT_TRUE(out.missing(2, 0, 3));
  EXPECT_EQ(out(1, 0, 2), 15.0);
}

TEST(RollingFeatures, OriginalColumnsUntouchedAndWindowRules) {
  const auto panel = testing::random_panel(6, 3, 5, 1, true, 0.2);
  const auto out = rolling_features(panel, 4);
  EXPECT_EQ(out.n_features(), 5u + 2u * 3u);
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t m = 0; m < 3; ++m)
      for (std::size_t p = 0; p < 5; ++p) {
        if (panel.missing(t, m, p)) {
          EXPECT_TRUE(out.missing(t, m, p));
        } else {
          EXPECT_EQ(out(t, m, p), panel(t, m, p));
        }
      }
  EXPECT_EQ(rolling_features(panel, 0), panel);
  EXPECT_THROW(rolling_features(panel, 1), Error);
}

TEST(PanelCsv, RoundTripIsBitExact) {
  const auto dir = testing::temp_dir("roundtrip");
  const auto panel = testing::random_panel(5, 3, 4, 7, true, 0.1);
  write_panel_csv(panel, dir / "p.csv");
  write_schema(panel.spec(), dir / "s.json");
  const auto back = ingest_panel(dir / "p.csv", dir / "s.json");
  EXPECT_EQ(back.spec(), panel.spec());
  EXPECT_EQ(back.times(), panel.times());
  EXPECT_EQ(back.coords(), panel.coords());
  ASSERT_EQ(back.values().size(), panel.values().size());
  for (std::size_t i = 0; i < panel.values().size(); ++i) {
    if (is_missing(panel.values()[i])) {
      EXPECT_TRUE(is_missing(back.values()[i]));
    } else {
      EXPECT_EQ(back.values()[i], panel.values()[i]);
    }
  }
}

TEST(StatesCsv, RoundTrip) {
  const auto dir = testing::temp_dir("states");
  const auto panel = testing::random_panel(4, 3, 2, 1);
  const auto S = testing::random_states(4, 3, 3, 2);
  write_states_csv(panel, S, dir / "s.csv");
  EXPECT_EQ(read_states_csv(panel, 3, dir / "s.csv"), S);
  EXPECT_THROW(read_states_csv(panel, 2, dir / "s.csv").n_states(), Error);
}

TEST(EmitResults, FilesShapeAndOccupancy) {
  const auto dir = testing::temp_dir("emit");
  const auto panel = testing::random_panel(2, 2, 3, 3);
  FitConfig cfg;
  cfg.hyperparams.K = 2;
  const auto r = fit(panel, cfg);
  emit_results(r, panel, dir);
  const auto states = read_csv(dir / "states.csv");
  EXPECT_EQ(states.size(), 1u + 4u);
  EXPECT_EQ(read_csv(dir / "prototypes.csv").size(), 1u + 2u);
  EXPECT_EQ(read_csv(dir / "heatmap.csv").size(), 1u + 2u);
  const auto summary = json::parse(testing::read_file(dir / "summary.json"));
  double total = 0.0;
  for (const auto& [k, v] : summary.at("occupancy").items()) total += v.get<double>();
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(summary.at("objective_trace").size(), static_cast<std::size_t>(r.n_iter));
}

TEST(EmitResults, SingleStateOccupancy) {
  const auto panel = testing::random_panel(3, 2, 2, 4);
  FitConfig cfg;
  cfg.hyperparams.K = 1;
  const auto summary = fit_summary_json(fit(panel, cfg), panel);
  EXPECT_EQ(summary.at("occupancy").size(), 1u);
  EXPECT_EQ(summary.at("occupancy").at("1").get<double>(), 1.0);
}

TEST(EmitResults, UnwritablePathThrows) {
  const auto dir = testing::temp_dir("emit_bad");
  write(dir / "file", "x");
  const auto panel = testing::random_panel(2, 2, 2, 4);
  FitConfig cfg;
  cfg.hyperparams.K = 1;
  EXPECT_THROW(emit_results(fit(panel, cfg), panel, dir / "file" / "sub"), Error);
}

}  // namespace
}  // namespace stjm
