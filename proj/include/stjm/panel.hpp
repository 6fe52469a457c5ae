#pragma once

// Data model: feature schema, the T x M x P observation panel, state
// matrices, prototype sets and model hyperparameters.
//
// State labels are 0-based in memory (0..K-1). Files and reports use
// 1-based labels; conversion happens at the I/O boundary only.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "stjm/error.hpp"

namespace stjm {

/// Marker for an unobserved cell.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) noexcept { return std::isnan(v); }

enum class FeatureKind : std::uint8_t { continuous, categorical };

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  std::vector<std::string> levels;  // categorical only, in index order

  static Feature continuous(std::string name) {
    return Feature{std::move(name), FeatureKind::continuous, {}};
  }
  static Feature categorical(std::string name, std::vector<std::string> levels) {
    return Feature{std::move(name), FeatureKind::categorical, std::move(levels)};
  }

  bool is_categorical() const noexcept { return kind == FeatureKind::categorical; }

  friend bool operator==(const Feature&, const Feature&) = default;
};

class FeatureSpec {
 public:
  FeatureSpec() = default;
  explicit FeatureSpec(std::vector<Feature> features) : features_(std::move(features)) {
    for (const auto& f : features_) {
      if (f.kind == FeatureKind::categorical) {
        if (f.levels.empty()) {
          throw Error("categorical feature '" + f.name + "' has no levels");
        }
        std::unordered_set<std::string> seen(f.levels.begin(), f.levels.end());
        if (seen.size() != f.levels.size()) {
          throw Error("categorical feature '" + f.name + "' has duplicate levels");
        }
      } else if (!f.levels.empty()) {
        throw Error("continuous feature '" + f.name + "' declares levels");
      }
    }
  }

  std::size_t size() const noexcept { return features_.size(); }
  const Feature& operator[](std::size_t p) const { return features_[p]; }
  const std::vector<Feature>& features() const noexcept { return features_; }
  bool is_categorical(std::size_t p) const { return features_[p].is_categorical(); }

  std::size_t count(FeatureKind kind) const noexcept {
    std::size_t n = 0;
    for (const auto& f : features_) n += (f.kind == kind);
    return n;
  }

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;

 private:
  std::vector<Feature> features_;
};

enum class CoordSystem : std::uint8_t { planar, geographic };

/// Planar (x, y) or geographic (lat, lon) in degrees, depending on the
/// panel's CoordSystem.
struct Coord {
  double first = 0.0;
  double second = 0.0;
  friend bool operator==(const Coord&, const Coord&) = default;
};

inline void validate_coords(std::span<const Coord> coords, CoordSystem system) {
  for (const auto& c : coords) {
    if (!std::isfinite(c.first) || !std::isfinite(c.second)) {
      throw Error("non-finite coordinate");
    }
    if (system == CoordSystem::geographic &&
        (std::abs(c.first) > 90.0 || std::abs(c.second) > 180.0)) {
      throw Error("geographic coordinate out of range: (" + std::to_string(c.first) +
                  ", " + std::to_string(c.second) + ")");
    }
  }
}

/// T x M x P mixed-type observations. Categorical cells hold the level
/// index as a double; missing cells hold NaN. Cell (t, m, p) lives at
/// ((t * M) + m) * P + p so each (t, m) feature vector is contiguous.
class PanelDataset {
 public:
  PanelDataset() = default;

  PanelDataset(FeatureSpec spec, std::vector<double> times, std::vector<Coord> coords,
               CoordSystem system, std::vector<double> values)
      : spec_(std::move(spec)),
        times_(std::move(times)),
        coords_(std::move(coords)),
        system_(system),
        values_(std::move(values)) {
    validate();
  }

  std::size_t n_times() const noexcept { return times_.size(); }
  std::size_t n_locations() const noexcept { return coords_.size(); }
  std::size_t n_features() const noexcept { return spec_.size(); }

  const FeatureSpec& spec() const noexcept { return spec_; }
  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<Coord>& coords() const noexcept { return coords_; }
  CoordSystem coord_system() const noexcept { return system_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double operator()(std::size_t t, std::size_t m, std::size_t p) const {
    return values_[index(t, m, p)];
  }
  bool missing(std::size_t t, std::size_t m, std::size_t p) const {
    return is_missing(values_[index(t, m, p)]);
  }

  /// Overwrite one cell. Observed categorical values must be valid levels.
  void set(std::size_t t, std::size_t m, std::size_t p, double v) {
    check_cell(p, v);
    values_[index(t, m, p)] = v;
  }

  std::span<const double> row(std::size_t t, std::size_t m) const {
    return {values_.data() + index(t, m, 0), n_features()};
  }

  std::size_t missing_count() const noexcept {
    std::size_t n = 0;
    for (double v : values_) n += is_missing(v);
    return n;
  }

  // Optional labels carried through from ingestion for output files.
  const std::vector<std::string>& location_ids() const noexcept { return location_ids_; }
  const std::vector<std::string>& time_labels() const noexcept { return time_labels_; }
  void set_location_ids(std::vector<std::string> ids) {
    if (ids.size() != n_locations()) throw Error("location id count mismatch");
    location_ids_ = std::move(ids);
  }
  void set_time_labels(std::vector<std::string> labels) {
    if (labels.size() != n_times()) throw Error("time label count mismatch");
    time_labels_ = std::move(labels);
  }

  std::string location_label(std::size_t m) const {
    return location_ids_.empty() ? std::to_string(m + 1) : location_ids_[m];
  }

  friend bool operator==(const PanelDataset& a, const PanelDataset& b) {
    if (a.spec_ != b.spec_ || a.times_ != b.times_ || a.coords_ != b.coords_ ||
        a.system_ != b.system_ || a.values_.size() != b.values_.size()) {
      return false;
    }
    for (std::size_t i = 0; i < a.values_.size(); ++i) {
      const double x = a.values_[i];
      const double y = b.values_[i];
      if (is_missing(x) != is_missing(y)) return false;
      if (!is_missing(x) && x != y) return false;
    }
    return true;
  }

 private:
  std::size_t index(std::size_t t, std::size_t m, std::size_t p) const {
    return (t * n_locations() + m) * n_features() + p;
  }

  void check_cell(std::size_t p, double v) const {
    if (is_missing(v)) return;
    if (!std::isfinite(v)) throw Error("non-finite observation");
    if (spec_.is_categorical(p)) {
      const auto n_levels = static_cast<double>(spec_[p].levels.size());
      if (v != std::floor(v) || v < 0.0 || v >= n_levels) {
        throw Error("categorical value out of range for feature '" + spec_[p].name + "'");
      }
    }
  }

  void validate() const {
    if (times_.empty()) throw Error("panel needs at least one time point");
    if (coords_.empty()) throw Error("panel needs at least one location");
    if (spec_.size() == 0) throw Error("panel needs at least one feature");
    for (std::size_t t = 1; t < times_.size(); ++t) {
      if (!(times_[t] > times_[t - 1])) throw Error("times must be strictly increasing");
    }
    validate_coords(coords_, system_);
    if (values_.size() != n_times() * n_locations() * n_features()) {
      throw Error("value array does not match T x M x P");
    }
    const std::size_t P = n_features();
    for (std::size_t i = 0; i < values_.size(); ++i) check_cell(i % P, values_[i]);
  }

  FeatureSpec spec_;
  std::vector<double> times_;
  std::vector<Coord> coords_;
  CoordSystem system_ = CoordSystem::planar;
  std::vector<double> values_;
  std::vector<std::string> location_ids_;
  std::vector<std::string> time_labels_;
};

/// T x M assignment of cells to states 0..K-1.
class StateMatrix {
 public:
  StateMatrix() = default;
  StateMatrix(std::size_t n_times, std::size_t n_locations, int n_states, int fill = 0)
      : T_(n_times), M_(n_locations), K_(n_states), states_(n_times * n_locations, fill) {
    if (K_ < 1) throw Error("state count must be positive");
    check_label(fill);
  }
  StateMatrix(std::size_t n_times, std::size_t n_locations, int n_states,
              std::vector<int> states)
      : T_(n_times), M_(n_locations), K_(n_states), states_(std::move(states)) {
    if (K_ < 1) throw Error("state count must be positive");
    if (states_.size() != T_ * M_) throw Error("state array does not match T x M");
    for (int s : states_) check_label(s);
  }

  std::size_t n_times() const noexcept { return T_; }
  std::size_t n_locations() const noexcept { return M_; }
  int n_states() const noexcept { return K_; }

  int operator()(std::size_t t, std::size_t m) const { return states_[t * M_ + m]; }
  void set(std::size_t t, std::size_t m, int s) {
    check_label(s);
    states_[t * M_ + m] = s;
  }
  const std::vector<int>& data() const noexcept { return states_; }

  friend bool operator==(const StateMatrix&, const StateMatrix&) = default;

 private:
  void check_label(int s) const {
    if (s < 0 || s >= K_) throw Error("state label out of range");
  }

  std::size_t T_ = 0;
  std::size_t M_ = 0;
  int K_ = 1;
  std::vector<int> states_;
};

/// K rows of per-feature prototypes (mean/median for continuous features,
/// level index for categorical ones).
class PrototypeSet {
 public:
  PrototypeSet() = default;
  PrototypeSet(int n_states, std::size_t n_features)
      : K_(n_states), P_(n_features), values_(static_cast<std::size_t>(n_states) * n_features, 0.0) {}

  int n_states() const noexcept { return K_; }
  std::size_t n_features() const noexcept { return P_; }

  double operator()(int k, std::size_t p) const { return values_[k * P_ + p]; }
  double& operator()(int k, std::size_t p) { return values_[k * P_ + p]; }
  std::span<const double> row(int k) const { return {values_.data() + k * P_, P_}; }
  std::span<double> row(int k) { return {values_.data() + k * P_, P_}; }

  friend bool operator==(const PrototypeSet&, const PrototypeSet&) = default;

 private:
  int K_ = 0;
  std::size_t P_ = 0;
  std::vector<double> values_;
};

enum class DistanceMetric : std::uint8_t { euclidean, haversine };

struct Hyperparams {
  int K = 3;
  double lambda = 0.05;  // temporal jump penalty
  double gamma = 0.05;   // spatial agreement reward
  DistanceMetric metric = DistanceMetric::euclidean;
  double distance_scale = 1.0;
  std::optional<double> neighborhood_cutoff;  // weights beyond this distance are 0
  int n_starts = 10;
  int max_iter = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (K < 1) throw Error("K must be >= 1");
    if (!(lambda >= 0.0)) throw Error("lambda must be >= 0");
    if (!(gamma >= 0.0)) throw Error("gamma must be >= 0");
    if (!(distance_scale > 0.0)) throw Error("distance_scale must be > 0");
    if (neighborhood_cutoff && !(*neighborhood_cutoff >= 0.0)) {
      throw Error("neighborhood cutoff must be >= 0");
    }
    if (n_starts < 1) throw Error("n_starts must be >= 1");
    if (max_iter < 1) throw Error("max_iter must be >= 1");
  }
};

}  // namespace stjm
