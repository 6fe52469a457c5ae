#pragma once

// Pairwise location distances and the exponential agreement weights
// w_im = exp(-d_im / scale) used by the spatial reward.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "stjm/error.hpp"
#include "stjm/panel.hpp"

namespace stjm {

inline constexpr double kEarthRadiusKm = 6371.0;

/// Great-circle distance in km between two (lat, lon) points in degrees.
inline double haversine_km(const Coord& a, const Coord& b) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double phi1 = a.first * deg;
  const double phi2 = b.first * deg;
  const double dphi = (b.first - a.first) * deg;
  const double dlam = (b.second - a.second) * deg;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlam / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

inline double euclidean(const Coord& a, const Coord& b) {
  return std::hypot(a.first - b.first, a.second - b.second);
}

/// Symmetric M x M weights with a zero diagonal.
class SpatialWeights {
 public:
  SpatialWeights() = default;
  SpatialWeights(std::size_t n, std::vector<double> distances, std::vector<double> weights)
      : n_(n), distances_(std::move(distances)), weights_(std::move(weights)) {
    if (distances_.size() != n * n || weights_.size() != n * n) {
      throw Error("spatial matrices must be M x M");
    }
  }

  std::size_t size() const noexcept { return n_; }
  double distance(std::size_t i, std::size_t m) const { return distances_[i * n_ + m]; }
  double weight(std::size_t i, std::size_t m) const { return weights_[i * n_ + m]; }
  std::span<const double> weights_from(std::size_t m) const {
    return {weights_.data() + m * n_, n_};
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> distances_;
  std::vector<double> weights_;
};

inline SpatialWeights spatial_weights(std::span<const Coord> coords, DistanceMetric metric,
                                      double distance_scale,
                                      std::optional<double> cutoff = std::nullopt) {
  const std::size_t M = coords.size();
  if (M == 0) throw Error("spatial_weights: no locations");
  if (!(distance_scale > 0.0)) throw Error("spatial_weights: distance_scale must be > 0");
  validate_coords(coords, metric == DistanceMetric::haversine ? CoordSystem::geographic
                                                              : CoordSystem::planar);

  std::vector<double> dist(M * M, 0.0);
  std::vector<double> w(M * M, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t m = i + 1; m < M; ++m) {
      const double d = metric == DistanceMetric::haversine ? haversine_km(coords[i], coords[m])
                                                           : euclidean(coords[i], coords[m]);
      const double wt = (cutoff && d > *cutoff) ? 0.0 : std::exp(-d / distance_scale);
      dist[i * M + m] = dist[m * M + i] = d;
      w[i * M + m] = w[m * M + i] = wt;
    }
  }
  return SpatialWeights(M, std::move(dist), std::move(w));
}

inline SpatialWeights spatial_weights(std::span<const Coord> coords, const Hyperparams& hp) {
  return spatial_weights(coords, hp.metric, hp.distance_scale, hp.neighborhood_cutoff);
}

}  // namespace stjm
