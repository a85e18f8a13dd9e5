#pragma once

// Province stability under ASV subsampling: rerun clustering and prediction
// on subsampled compositions, realign labels to the full-data run, and count
// how often each grid point keeps its modal label.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bioprovince/biocluster.hpp"
#include "bioprovince/data.hpp"
#include "bioprovince/distance.hpp"
#include "bioprovince/errors.hpp"
#include "bioprovince/numerics.hpp"
#include "bioprovince/parallel.hpp"
#include "bioprovince/province.hpp"
#include "bioprovince/tuning.hpp"

namespace bioprovince {

struct PipelineParams {
  double r = 1.0;
  double alpha = 0.0;
  int K = 2;
  int k = 3;

  void validate() const {
    MixParams{alpha, r}.validate();
    if (K < 1) throw ConfigError("K must be at least 1");
    if (k < 1) throw ConfigError("k must be at least 1");
  }
};

struct StabilityOptions {
  double fraction = 0.7;
  std::size_t replicates = 100;
  std::uint64_t seed = 1;
  PredictOptions predict{};
};

struct StabilityMap {
  std::vector<std::string> grid_ids;
  std::vector<int> modal_cluster;
  std::vector<double> stability;
  std::size_t n_replicates = 0;
};

// Maps replicate labels onto reference labels. cost(k1, k2) is the mean
// spatial distance between reference cluster k1 and replicate cluster k2;
// pairs involving an empty cluster cost ten times the largest finite cost.
// Returns map with map[k2 - 1] = k1 (labels 1..K).
inline std::vector<int> align_labels(std::span<const int> reference, std::span<const int> replicate,
                                     int K, const DistanceMatrix& d_spatial) {
  if (reference.size() != replicate.size() || reference.size() != d_spatial.size())
    throw DataError("align_labels: membership sizes do not match");
  if (K < 1) throw ConfigError("align_labels: K must be at least 1");
  const auto check = [&](std::span<const int> m) {
    for (int v : m)
      if (v < 1 || v > K) throw DataError("align_labels: K mismatch (label outside 1..K)");
  };
  check(reference);
  check(replicate);

  const auto k = static_cast<Eigen::Index>(K);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, k);
  std::vector<double> n_ref(static_cast<std::size_t>(K), 0.0), n_rep(static_cast<std::size_t>(K), 0.0);
  for (int v : reference) n_ref[static_cast<std::size_t>(v - 1)] += 1.0;
  for (int v : replicate) n_rep[static_cast<std::size_t>(v - 1)] += 1.0;
  for (std::size_t i = 0; i < reference.size(); ++i)
    for (std::size_t j = 0; j < replicate.size(); ++j)
      sum(reference[i] - 1, replicate[j] - 1) += d_spatial(i, j);

  Eigen::MatrixXd cost(k, k);
  double max_finite = 0.0;
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) {
      const double cnt = n_ref[static_cast<std::size_t>(a)] * n_rep[static_cast<std::size_t>(b)];
      cost(a, b) = cnt > 0 ? sum(a, b) / cnt : -1.0;
      if (cnt > 0) max_finite = std::max(max_finite, cost(a, b));
    }
  const double empty_cost = max_finite > 0.0 ? 10.0 * max_finite : 1.0;
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      if (cost(a, b) < 0.0) cost(a, b) = empty_cost;

  const auto perm = hungarian(cost);  // reference row -> replicate column
  std::vector<int> map(static_cast<std::size_t>(K));
  for (std::size_t a = 0; a < perm.size(); ++a) map[perm[a]] = static_cast<int>(a) + 1;
  return map;
}

inline std::vector<int> align_labels(std::span<const int> reference, std::span<const int> replicate,
                                     int K, const std::vector<SampleMeta>& meta, double r) {
  return align_labels(reference, replicate, K, spatial_distance_matrix(meta, r));
}

inline std::vector<int> apply_label_map(std::span<const int> labels, const std::vector<int>& map) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = map[static_cast<std::size_t>(labels[i] - 1)];
  return out;
}

// Full-data run: cluster on D_alpha and predict the grid.
struct ProvinceRun {
  ClusterResult clusters;
  ProvinceMap provinces;
};

inline ProvinceRun run_pipeline(const DistanceMatrix& d_bio, const DistanceMatrix& d_spatial,
                                const std::vector<SampleMeta>& meta, const GridSpec& grid,
                                const PipelineParams& p, const PredictOptions& popts = {}) {
  p.validate();
  const auto d_alpha = mix_distance_matrix(d_bio, d_spatial, p.alpha);
  ProvinceRun run;
  run.clusters = cluster(d_alpha, p.K, &meta);
  run.provinces = predict(grid, meta, run.clusters.memberships, p.k, p.r, popts);
  return run;
}

inline ProvinceRun run_pipeline(const CompositionTable& table, const std::vector<SampleMeta>& meta,
                                const GridSpec& grid, const PipelineParams& p,
                                const PredictOptions& popts = {}) {
  p.validate();
  return run_pipeline(bio_distance_matrix(table), spatial_distance_matrix(meta, p.r), meta, grid, p,
                      popts);
}

// Modal label per grid point (smallest label wins count ties) and its
// frequency over replicates.
inline StabilityMap tally_stability(const std::vector<std::string>& grid_ids,
                                    const std::vector<std::vector<int>>& per_replicate, int K) {
  StabilityMap out;
  out.grid_ids = grid_ids;
  out.n_replicates = per_replicate.size();
  const std::size_t B = grid_ids.size();
  out.modal_cluster.assign(B, 0);
  out.stability.assign(B, 0.0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(K) + 1);
  for (std::size_t j = 0; j < B; ++j) {
    std::fill(counts.begin(), counts.end(), 0);
    for (const auto& rep : per_replicate) ++counts[static_cast<std::size_t>(rep[j])];
    std::size_t best = 0;
    int label = 1;
    for (int c = 1; c <= K; ++c)
      if (counts[static_cast<std::size_t>(c)] > best) {
        best = counts[static_cast<std::size_t>(c)];
        label = c;
      }
    out.modal_cluster[j] = label;
    out.stability[j] = static_cast<double>(best) / static_cast<double>(per_replicate.size());
  }
  return out;
}

struct StabilityResult {
  ProvinceRun reference;
  StabilityMap map;
};

inline StabilityResult run_stability(const CompositionTable& table,
                                     const std::vector<SampleMeta>& meta, const GridSpec& grid,
                                     const PipelineParams& params,
                                     const StabilityOptions& opts = {}) {
  params.validate();
  if (opts.replicates < 1) throw ConfigError("stability needs at least one replicate");
  if (!(opts.fraction > 0.0 && opts.fraction <= 1.0))
    throw ConfigError("subsample fraction must lie in (0, 1]");

  const auto d_spatial = spatial_distance_matrix(meta, params.r);
  StabilityResult res;
  res.reference = run_pipeline(bio_distance_matrix(table), d_spatial, meta, grid, params, opts.predict);
  const auto& ref_labels = res.reference.clusters.memberships;

  std::vector<std::vector<int>> per_rep(opts.replicates);
  std::vector<std::string> failures(opts.replicates);
  parallel_for(opts.replicates, [&](std::size_t l) {
    try {
      const std::uint64_t sub_seed = replicate_rng(opts.seed, l)();
      const auto sub = subsample_asvs(table, opts.fraction, sub_seed);
      const auto d_alpha = mix_distance_matrix(bio_distance_matrix(sub), d_spatial, params.alpha);
      const auto rep = cluster(d_alpha, params.K, &meta);
      const auto map = align_labels(ref_labels, rep.memberships, params.K, d_spatial);
      const auto aligned = apply_label_map(rep.memberships, map);
      per_rep[l] = predict(grid, meta, aligned, params.k, params.r, opts.predict).memberships;
    } catch (const std::exception& e) {
      failures[l] = e.what();
    }
  });
  for (std::size_t l = 0; l < failures.size(); ++l)
    if (!failures[l].empty())
      throw NumericalError("stability replicate " + std::to_string(l + 1) + " failed: " + failures[l]);

  res.map = tally_stability(grid.grid_ids, per_rep, params.K);
  return res;
}

// KL(q || u) per cluster, q the cruise mix of the cluster's samples and u
// uniform over all cruises present. Index c holds cluster label c + 1.
inline std::vector<double> cluster_source_homogeneity(std::span<const int> memberships,
                                                      const std::vector<std::string>& cruises) {
  if (memberships.size() != cruises.size())
    throw DataError("cluster_source_homogeneity: size mismatch");
  if (memberships.empty()) throw DataError("cluster_source_homogeneity: no samples");
  std::map<std::string, std::size_t> cruise_index;
  for (const auto& c : cruises) {
    if (c.empty()) throw DataError("cluster_source_homogeneity: missing cruise label");
    cruise_index.emplace(c, 0);
  }
  std::size_t next = 0;
  for (auto& [name, idx] : cruise_index) idx = next++;
  const double n_cruises = static_cast<double>(cruise_index.size());

  const int K = *std::max_element(memberships.begin(), memberships.end());
  std::vector<std::vector<double>> counts(static_cast<std::size_t>(K),
                                          std::vector<double>(cruise_index.size(), 0.0));
  for (std::size_t i = 0; i < memberships.size(); ++i) {
    if (memberships[i] < 1) throw DataError("cluster_source_homogeneity: labels must be >= 1");
    counts[static_cast<std::size_t>(memberships[i] - 1)][cruise_index.at(cruises[i])] += 1.0;
  }
  std::vector<double> kl(static_cast<std::size_t>(K), 0.0);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    double total = 0.0;
    for (double v : counts[c]) total += v;
    if (total == 0.0) throw DataError("cluster " + std::to_string(c + 1) + " is empty");
    for (double v : counts[c]) {
      if (v == 0.0) continue;
      const double q = v / total;
      kl[c] += q * std::log(q * n_cruises);
    }
  }
  return kl;
}

}  // namespace bioprovince
