#pragma once

// Data-driven hyperparameter selection, in order r -> alpha -> K, plus the
// recommended range for the nearest-neighbor k.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "bioprovince/biocluster.hpp"
#include "bioprovince/data.hpp"
#include "bioprovince/distance.hpp"
#include "bioprovince/errors.hpp"
#include "bioprovince/numerics.hpp"
#include "bioprovince/parallel.hpp"

namespace bioprovince {

// ---------------------------------------------------------------------------
// r: ratio of the latitude and depth distance-decay slopes
// ---------------------------------------------------------------------------

enum class CruiseWeighting { pairs, samples };

struct RTuningOptions {
  double lat_window = 3.0;     // degrees
  double depth_window = 10.0;  // meters
  double p_threshold = 0.05;
  CruiseWeighting weighting = CruiseWeighting::pairs;
};

struct PairObservation {
  double d_lat = 0.0;
  double d_depth = 0.0;
  double d_bio = 0.0;

  friend bool operator<(const PairObservation& a, const PairObservation& b) {
    return std::tie(a.d_lat, a.d_depth, a.d_bio) < std::tie(b.d_lat, b.d_depth, b.d_bio);
  }
};

struct CruiseFit {
  std::string cruise;
  std::size_t n_samples = 0;
  std::size_t n_pairs = 0;
  std::optional<RegressionFit> lat_fit;
  std::optional<RegressionFit> depth_fit;
  bool lat_used = false;
  bool depth_used = false;
};

struct RTuningResult {
  std::vector<CruiseFit> per_cruise;  // sorted by cruise id
  double b1 = 0.0;                    // latitude slope, distance per degree
  double b2 = 0.0;                    // depth slope, distance per meter
  double r = 0.0;
};

// Within-cruise sample pairs inside both windows, in a canonical order so that
// downstream sums do not depend on input ordering.
inline std::vector<PairObservation> qualifying_pairs(const DistanceMatrix& d_bio,
                                                     const std::vector<SampleMeta>& meta,
                                                     const std::string& cruise,
                                                     const RTuningOptions& opts = {}) {
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < meta.size(); ++i)
    if (meta[i].cruise == cruise) members.push_back(i);
  std::vector<PairObservation> out;
  for (std::size_t a = 0; a < members.size(); ++a)
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      const auto& p = meta[members[a]];
      const auto& q = meta[members[b]];
      const double dl = std::abs(p.latitude - q.latitude);
      const double dz = std::abs(p.depth - q.depth);
      if (dl <= opts.lat_window && dz <= opts.depth_window)
        out.push_back({dl, dz, d_bio(members[a], members[b])});
    }
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

inline std::optional<RegressionFit> try_fit(const std::vector<double>& x,
                                            const std::vector<double>& y) {
  if (x.size() < 3) return std::nullopt;
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) return std::nullopt;
  return linear_regression(x, y);
}

}  // namespace detail

inline RTuningResult tune_r(const DistanceMatrix& d_bio, const std::vector<SampleMeta>& meta,
                            const RTuningOptions& opts = {}) {
  if (d_bio.size() != meta.size()) throw DataError("tune_r: meta does not match distance matrix");
  if (!(opts.lat_window > 0.0) || !(opts.depth_window > 0.0))
    throw ConfigError("tune_r: windows must be positive");
  std::map<std::string, std::size_t> cruises;
  for (const auto& m : meta) {
    if (m.cruise.empty()) throw DataError("tune_r: sample '" + m.sample_id + "' has no cruise id");
    ++cruises[m.cruise];
  }

  RTuningResult res;
  bool any_pairs = false;
  double w1 = 0.0, w2 = 0.0, s1 = 0.0, s2 = 0.0;
  for (const auto& [cruise, count] : cruises) {
    CruiseFit cf;
    cf.cruise = cruise;
    cf.n_samples = count;
    const auto pairs = qualifying_pairs(d_bio, meta, cruise, opts);
    cf.n_pairs = pairs.size();
    if (pairs.size() >= 3) {
      any_pairs = true;
      std::vector<double> dl, dz, db;
      for (const auto& p : pairs) {
        dl.push_back(p.d_lat);
        dz.push_back(p.d_depth);
        db.push_back(p.d_bio);
      }
      cf.lat_fit = detail::try_fit(dl, db);
      cf.depth_fit = detail::try_fit(dz, db);
      const double w = static_cast<double>(opts.weighting == CruiseWeighting::pairs ? cf.n_pairs
                                                                                    : cf.n_samples);
      auto usable = [&](const std::optional<RegressionFit>& f) {
        return f && f->slope > 0.0 && f->p_value < opts.p_threshold;
      };
      if (usable(cf.lat_fit)) {
        cf.lat_used = true;
        s1 += w * cf.lat_fit->slope;
        w1 += w;
      }
      if (usable(cf.depth_fit)) {
        cf.depth_used = true;
        s2 += w * cf.depth_fit->slope;
        w2 += w;
      }
    }
    res.per_cruise.push_back(std::move(cf));
  }
  if (!any_pairs) throw DataError("tune_r: fewer than 3 qualifying pairs in every cruise");
  if (w1 == 0.0) throw NumericalError("tune_r: no cruise has a significant positive latitude slope");
  if (w2 == 0.0) throw NumericalError("tune_r: no cruise has a significant positive depth slope");
  res.b1 = s1 / w1;
  res.b2 = s2 / w2;
  res.r = res.b1 / res.b2;
  return res;
}

inline RTuningResult tune_r(const CompositionTable& table, const std::vector<SampleMeta>& meta,
                            const RTuningOptions& opts = {}) {
  return tune_r(bio_distance_matrix(table), meta, opts);
}

// ---------------------------------------------------------------------------
// alpha: spatial saturation of the mixed distance, measured in a 2-D MDS
// embedding augmented with four synthetic corner samples
// ---------------------------------------------------------------------------

struct Band {
  double lower = 0.0;
  double upper = 0.0;
};

struct AlphaCurve {
  std::vector<double> alphas;
  std::vector<std::vector<double>> scores;       // [alpha][replicate]
  std::vector<std::vector<double>> null_scores;  // [alpha][replicate]
  std::vector<Band> score_bands;                 // central 95% per alpha
  std::vector<Band> null_bands;
  double suggested_alpha = 0.0;
  std::size_t degenerate_hulls = 0;
};

// Linear-interpolation quantile of a sample (q in [0, 1]).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw NumericalError("quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline Band balanced_band(const std::vector<double>& v, double coverage = 0.95) {
  const double tail = 0.5 * (1.0 - coverage);
  return {quantile(v, tail), quantile(v, 1.0 - tail)};
}

// Largest alpha (ascending grid) that precedes the first alpha at which the
// score and null bands stop overlapping.
inline double suggest_alpha(const std::vector<double>& alphas, const std::vector<Band>& s,
                            const std::vector<Band>& nul) {
  double suggested = alphas.front();
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const bool overlap = std::max(s[a].lower, nul[a].lower) <= std::min(s[a].upper, nul[a].upper);
    if (!overlap) break;
    suggested = alphas[a];
  }
  return suggested;
}

// Deterministic per-replicate stream derived from (seed, replicate).
inline std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate),
                    static_cast<std::uint32_t>(replicate >> 32)};
  return std::mt19937_64(seq);
}

namespace detail {

inline std::array<std::size_t, 4> draw_four_distinct(std::size_t n, std::mt19937_64& rng) {
  std::array<std::size_t, 4> out{};
  for (std::size_t t = 0; t < 4; ++t) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::size_t c = 0;
    do {
      c = pick(rng);
    } while (std::find(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(t), c) !=
             out.begin() + static_cast<std::ptrdiff_t>(t));
    out[t] = c;
  }
  return out;
}

struct AugmentedPair {
  Eigen::MatrixXd bio;  // scaled
  Eigen::MatrixXd geo;  // scaled
};

inline AugmentedPair augmented_matrices(const DistanceMatrix& d_bio,
                                        const std::vector<SpatialPoint>& pts, double r,
                                        const std::array<std::size_t, 4>& comp_src,
                                        const std::array<SpatialPoint, 4>& corner_pos) {
  const std::size_t n = pts.size();
  std::vector<std::size_t> idx(n + 4);
  std::iota(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), std::size_t{0});
  for (std::size_t t = 0; t < 4; ++t) idx[n + t] = comp_src[t];
  std::vector<SpatialPoint> aug = pts;
  aug.insert(aug.end(), corner_pos.begin(), corner_pos.end());
  return {scale_by_operator_norm(d_bio.select(idx)),
          scale_by_operator_norm(spatial_distance_matrix(std::span<const SpatialPoint>(aug), r))};
}

inline HullScore saturation_score(const AugmentedPair& m, double alpha, std::size_t n) {
  const auto mixed = DistanceMatrix::trusted((1.0 - alpha) * m.bio + alpha * m.geo);
  const Eigen::MatrixXd xy = classical_mds(mixed, 2);
  std::vector<Point2> real(n);
  for (std::size_t i = 0; i < n; ++i)
    real[i] = {xy(static_cast<Eigen::Index>(i), 0), xy(static_cast<Eigen::Index>(i), 1)};
  std::array<Point2, 4> corners{};
  for (std::size_t t = 0; t < 4; ++t)
    corners[t] = {xy(static_cast<Eigen::Index>(n + t), 0), xy(static_cast<Eigen::Index>(n + t), 1)};
  return convex_hull_fraction(real, corners);
}

}  // namespace detail

inline AlphaCurve alpha_saturation_curve(const DistanceMatrix& d_bio,
                                         const std::vector<SampleMeta>& meta, double r,
                                         std::vector<double> alphas, std::size_t L,
                                         std::uint64_t seed) {
  const std::size_t n = meta.size();
  if (d_bio.size() != n) throw DataError("alpha curve: meta does not match distance matrix");
  if (n < 8) throw DataError("alpha curve needs at least 8 samples");
  if (alphas.empty()) throw ConfigError("alpha grid is empty");
  if (L < 1) throw ConfigError("alpha curve needs at least one replicate");
  if (!(r > 0.0)) throw ConfigError("r must be positive");
  for (double a : alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha grid values must lie in [0, 1]");
  std::sort(alphas.begin(), alphas.end());

  const auto pts = spatial_points(meta);
  double lat_lo = pts[0].latitude, lat_hi = lat_lo, dep_lo = pts[0].depth, dep_hi = dep_lo;
  for (const auto& p : pts) {
    lat_lo = std::min(lat_lo, p.latitude);
    lat_hi = std::max(lat_hi, p.latitude);
    dep_lo = std::min(dep_lo, p.depth);
    dep_hi = std::max(dep_hi, p.depth);
  }
  const std::array<SpatialPoint, 4> rect{SpatialPoint{lat_lo, dep_lo}, SpatialPoint{lat_lo, dep_hi},
                                         SpatialPoint{lat_hi, dep_hi}, SpatialPoint{lat_hi, dep_lo}};

  AlphaCurve out;
  out.alphas = alphas;
  out.scores.assign(alphas.size(), std::vector<double>(L));
  out.null_scores.assign(alphas.size(), std::vector<double>(L));
  std::vector<std::size_t> degenerate(L, 0);

  parallel_for(L, [&](std::size_t l) {
    auto rng = replicate_rng(seed, l);
    const auto comp = detail::draw_four_distinct(n, rng);
    const auto null_comp = detail::draw_four_distinct(n, rng);
    const auto null_loc = detail::draw_four_distinct(n, rng);
    std::array<SpatialPoint, 4> null_pos{};
    for (std::size_t t = 0; t < 4; ++t) null_pos[t] = pts[null_loc[t]];

    const auto real_aug = detail::augmented_matrices(d_bio, pts, r, comp, rect);
    const auto null_aug = detail::augmented_matrices(d_bio, pts, r, null_comp, null_pos);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      const auto s = detail::saturation_score(real_aug, alphas[a], n);
      const auto z = detail::saturation_score(null_aug, alphas[a], n);
      out.scores[a][l] = s.fraction;
      out.null_scores[a][l] = z.fraction;
      degenerate[l] += (s.degenerate ? 1 : 0) + (z.degenerate ? 1 : 0);
    }
  });

  for (std::size_t a = 0; a < alphas.size(); ++a) {
    out.score_bands.push_back(balanced_band(out.scores[a]));
    out.null_bands.push_back(balanced_band(out.null_scores[a]));
  }
  for (auto d : degenerate) out.degenerate_hulls += d;
  out.suggested_alpha = suggest_alpha(out.alphas, out.score_bands, out.null_bands);
  return out;
}

inline AlphaCurve alpha_saturation_curve(const CompositionTable& table,
                                         const std::vector<SampleMeta>& meta, double r,
                                         std::vector<double> alphas, std::size_t L,
                                         std::uint64_t seed) {
  return alpha_saturation_curve(bio_distance_matrix(table), meta, r, std::move(alphas), L, seed);
}

// ---------------------------------------------------------------------------
// K: elbow of the within-cluster distance along one dendrogram
// ---------------------------------------------------------------------------

struct KCurve {
  std::vector<int> Ks;
  std::vector<double> wcd;
  int suggested_K = 1;
};

// Suggested K: the largest discrete second difference of log(wcd) over
// consecutive candidates with positive wcd. The log scale makes the score
// depend on relative rather than absolute drops.
inline int suggest_k(const std::vector<int>& Ks, const std::vector<double>& wcd) {
  int best_k = Ks.front();
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < Ks.size(); ++i) {
    if (!(wcd[i - 1] > 0.0 && wcd[i] > 0.0 && wcd[i + 1] > 0.0)) continue;
    const double s = std::log(wcd[i - 1]) - 2.0 * std::log(wcd[i]) + std::log(wcd[i + 1]);
    if (s > best) {
      best = s;
      best_k = Ks[i];
    }
  }
  return best_k;
}

inline KCurve k_elbow_curve(const DistanceMatrix& dist_alpha, std::vector<int> Ks) {
  const std::size_t n = dist_alpha.size();
  if (Ks.empty()) throw ConfigError("K candidate list is empty");
  for (int k : Ks)
    if (k < 1 || static_cast<std::size_t>(k) > n) throw ConfigError("K candidates must lie in [1, n]");
  std::sort(Ks.begin(), Ks.end());
  Ks.erase(std::unique(Ks.begin(), Ks.end()), Ks.end());

  KCurve out;
  out.Ks = Ks;
  const auto merges = ward_linkage(dist_alpha);
  for (int k : Ks) {
    const auto labels = cut_dendrogram(merges, n, static_cast<std::size_t>(k));
    out.wcd.push_back(within_cluster_distance(dist_alpha, labels));
  }
  out.suggested_K = suggest_k(out.Ks, out.wcd);
  return out;
}

// ---------------------------------------------------------------------------
// k: nearest-neighbor count
// ---------------------------------------------------------------------------

inline constexpr std::pair<int, int> knn_k_bounds() { return {1, 5}; }

// Throws for k < 1; returns true when k is outside the recommended range.
inline bool knn_k_warning(int k) {
  if (k < 1) throw ConfigError("k must be at least 1");
  const auto [lo, hi] = knn_k_bounds();
  return k < lo || k > hi;
}

}  // namespace bioprovince
