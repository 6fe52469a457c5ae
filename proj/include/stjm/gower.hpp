#pragma once

// Gower dissimilarity for mixed continuous/categorical feature vectors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "stjm/error.hpp"
#include "stjm/panel.hpp"

namespace stjm {

/// Per-feature normalizers. `range[p]` is max - min of the observed values
/// of continuous feature p (1 for categorical or constant features);
/// `constant[p]` marks continuous features whose observed values never vary.
struct FeatureRanges {
  std::vector<double> range;
  std::vector<bool> constant;

  std::size_t size() const noexcept { return range.size(); }
};

inline FeatureRanges feature_ranges(const PanelDataset& data) {
  const std::size_t P = data.n_features();
  std::vector<double> lo(P, std::numeric_limits<double>::infinity());
  std::vector<double> hi(P, -std::numeric_limits<double>::infinity());
  std::vector<bool> seen(P, false);
  const auto& values = data.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (is_missing(v)) continue;
    const std::size_t p = i % P;
    seen[p] = true;
    lo[p] = std::min(lo[p], v);
    hi[p] = std::max(hi[p], v);
  }

  FeatureRanges out{std::vector<double>(P, 1.0), std::vector<bool>(P, false)};
  for (std::size_t p = 0; p < P; ++p) {
    if (data.spec().is_categorical(p)) continue;
    if (!seen[p]) throw Error("feature fully missing: '" + data.spec()[p].name + "'");
    const double r = hi[p] - lo[p];
    if (r > 0.0) {
      out.range[p] = r;
    } else {
      out.constant[p] = true;
    }
  }
  return out;
}

namespace detail {

// Hot-path kernel shared by the fitting code; assumes sizes already match.
inline double gower_unchecked(std::span<const double> x, std::span<const double> y,
                              const FeatureSpec& spec, const FeatureRanges& ranges) {
  const std::size_t P = x.size();
  double total = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    if (spec.is_categorical(p)) {
      total += (x[p] != y[p]) ? 1.0 : 0.0;
    } else if (!ranges.constant[p]) {
      total += std::min(std::abs(x[p] - y[p]) / ranges.range[p], 1.0);
    }
  }
  return total / static_cast<double>(P);
}

}  // namespace detail

/// Mean over features of range-normalized absolute differences (continuous,
/// clamped to [0, 1]) and mismatch indicators (categorical). Both vectors
/// must be fully observed.
inline double gower_distance(std::span<const double> x, std::span<const double> y,
                             const FeatureSpec& spec, const FeatureRanges& ranges) {
  if (x.size() != spec.size() || y.size() != spec.size() || ranges.size() != spec.size()) {
    throw Error("gower_distance: length mismatch with feature spec");
  }
  return detail::gower_unchecked(x, y, spec, ranges);
}

}  // namespace stjm
