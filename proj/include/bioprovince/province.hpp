#pragma once

// Localized nearest-neighbor prediction of province labels on an abiotic
// grid: vote among samples that are among the k nearest both in rescaled
// (temperature, salinity) and in r-scaled (latitude, depth).

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "bioprovince/data.hpp"
#include "bioprovince/distance.hpp"
#include "bioprovince/errors.hpp"
#include "bioprovince/parallel.hpp"

namespace bioprovince {

struct PredictionInfo {
  int k_prime = 0;  // size of the abiotic/spatial intersection (0 on fallback)
  bool tie_broken = false;
  bool fallback_used = false;
};

struct ProvinceMap {
  std::vector<std::string> grid_ids;
  std::vector<int> memberships;
  std::vector<PredictionInfo> provenance;
};

struct RescaledPair {
  std::vector<double> samples;
  std::vector<double> grid;
};

// Linear map to [0, 1] using the min and max over the reference values
// (samples and grid by default, samples only when use_union is false). A
// constant reference maps everything to 0.5.
inline RescaledPair min_max_rescale(std::span<const double> samples, std::span<const double> grid,
                                    bool use_union = true) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  auto scan = [&](std::span<const double> v) {
    for (double x : v) {
      if (!std::isfinite(x)) throw DataError("min_max_rescale: non-finite value");
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  };
  scan(samples);
  if (use_union) scan(grid);
  else
    for (double x : grid)
      if (!std::isfinite(x)) throw DataError("min_max_rescale: non-finite value");
  if (!std::isfinite(lo)) throw DataError("min_max_rescale: no finite reference values");

  auto map = [&](std::span<const double> v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      out[i] = hi > lo ? (v[i] - lo) / (hi - lo) : 0.5;
    return out;
  };
  return {map(samples), map(grid)};
}

struct PredictOptions {
  bool rescale_union = true;
};

namespace detail {

// Indices of the k smallest distances, nearest first; equal distances go to
// the smaller index.
inline std::vector<std::size_t> k_nearest(std::vector<std::pair<double, std::size_t>>& d,
                                          std::size_t k) {
  k = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
  return out;
}

}  // namespace detail

inline ProvinceMap predict(const GridSpec& grid, const std::vector<SampleMeta>& meta,
                           std::span<const int> memberships, int k, double r,
                           const PredictOptions& opts = {}) {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("r must be positive and finite");
  if (grid.size() == 0) throw DataError("empty grid");
  if (meta.empty()) throw DataError("no samples to predict from");
  if (memberships.size() != meta.size()) throw DataError("memberships size does not match samples");
  const std::size_t B = grid.size();
  if (grid.latitude.size() != B || grid.depth.size() != B || grid.temperature.size() != B ||
      grid.salinity.size() != B)
    throw DataError("grid is missing abiotic fields");

  const std::size_t n = meta.size();
  std::vector<double> s_temp(n), s_sal(n);
  for (std::size_t i = 0; i < n; ++i) {
    s_temp[i] = meta[i].temperature;
    s_sal[i] = meta[i].salinity;
  }
  const auto temp = min_max_rescale(s_temp, grid.temperature, opts.rescale_union);
  const auto sal = min_max_rescale(s_sal, grid.salinity, opts.rescale_union);
  const auto pts = spatial_points(meta);
  const auto kk = static_cast<std::size_t>(k);

  ProvinceMap out;
  out.grid_ids = grid.grid_ids;
  out.memberships.assign(B, 0);
  out.provenance.assign(B, {});

  parallel_for(B, [&](std::size_t j) {
    std::vector<std::pair<double, std::size_t>> abiotic(n), spatial(n);
    const SpatialPoint here{grid.latitude[j], grid.depth[j]};
    for (std::size_t i = 0; i < n; ++i) {
      const double dt = temp.grid[j] - temp.samples[i];
      const double ds = sal.grid[j] - sal.samples[i];
      abiotic[i] = {std::sqrt(dt * dt + ds * ds), i};
      spatial[i] = {spatial_distance(here, pts[i], r), i};
    }
    const auto a_set = detail::k_nearest(abiotic, kk);
    const auto s_set = detail::k_nearest(spatial, kk);

    // Candidates in spatial order, nearest first.
    std::vector<std::size_t> candidates;
    for (std::size_t i : s_set)
      if (std::find(a_set.begin(), a_set.end(), i) != a_set.end()) candidates.push_back(i);

    PredictionInfo info;
    int label = 0;
    if (candidates.empty()) {
      info.fallback_used = true;
      label = memberships[s_set.front()];
    } else {
      info.k_prime = static_cast<int>(candidates.size());
      std::map<int, int> votes;
      for (std::size_t i : candidates) ++votes[memberships[i]];
      int best_count = 0, n_best = 0;
      for (const auto& [lab, count] : votes) {
        if (count > best_count) {
          best_count = count;
          n_best = 1;
          label = lab;
        } else if (count == best_count) {
          ++n_best;
        }
      }
      if (n_best > 1) {
        info.tie_broken = true;
        label = memberships[candidates.front()];
      }
    }
    out.memberships[j] = label;
    out.provenance[j] = info;
  });
  return out;
}

}  // namespace bioprovince
