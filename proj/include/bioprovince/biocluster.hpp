#pragma once

// Agglomerative clustering with Ward linkage (Ward.D2: Lance-Williams updates
// on squared dissimilarities), flat cuts and the within-cluster distance.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "bioprovince/data.hpp"
#include "bioprovince/errors.hpp"
#include "bioprovince/numerics.hpp"

namespace bioprovince {

// One agglomeration step. Leaves are nodes 0..n-1; the node created at step s
// is n + s.
struct Merge {
  std::size_t left = 0;
  std::size_t right = 0;
  double height = 0.0;
};

struct ClusterResult {
  std::vector<Merge> merge_history;  // length n - 1
  std::vector<int> memberships;      // per sample, labels 1..K
  int K = 0;
};

// Ward.D2 agglomeration. Active clusters live in the slot of their smallest
// member; the closest pair is chosen with ties going to the smallest
// (slot_i, slot_j) pair.
inline std::vector<Merge> ward_linkage(const DistanceMatrix& dist) {
  const std::size_t n = dist.size();
  std::vector<Merge> merges;
  if (n < 2) return merges;
  merges.reserve(n - 1);

  Eigen::MatrixXd d2 = dist.matrix().array().square().matrix();
  std::vector<double> size(n, 1.0);
  std::vector<std::size_t> node(n);
  std::iota(node.begin(), node.end(), std::size_t{0});
  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), std::size_t{0});

  for (std::size_t step = 0; step + 1 < n; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const auto i = static_cast<Eigen::Index>(active[a]);
      for (std::size_t b = a + 1; b < active.size(); ++b) {
        const double v = d2(i, static_cast<Eigen::Index>(active[b]));
        if (v < best) {
          best = v;
          bi = active[a];
          bj = active[b];
        }
      }
    }
    const auto i = static_cast<Eigen::Index>(bi);
    const auto j = static_cast<Eigen::Index>(bj);
    const double dij = d2(i, j);
    for (std::size_t slot : active) {
      if (slot == bi || slot == bj) continue;
      const auto k = static_cast<Eigen::Index>(slot);
      const double sk = size[slot];
      const double updated = ((size[bi] + sk) * d2(i, k) + (size[bj] + sk) * d2(j, k) - sk * dij) /
                             (size[bi] + size[bj] + sk);
      d2(i, k) = updated;
      d2(k, i) = updated;
    }
    merges.push_back({node[bi], node[bj], std::sqrt(std::max(dij, 0.0))});
    size[bi] += size[bj];
    node[bi] = n + step;
    active.erase(std::find(active.begin(), active.end(), bj));
  }
  return merges;
}

// Applies the first n - K merges and returns a 0-based cluster id per sample,
// numbered by first appearance in sample order.
inline std::vector<int> cut_dendrogram(std::span<const Merge> merges, std::size_t n, std::size_t K) {
  if (K < 1 || K > n) throw ConfigError("K must lie in [1, n]");
  if (merges.size() + 1 != n && n > 0) throw NumericalError("merge history length must be n - 1");
  std::vector<std::size_t> parent(2 * n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t s = 0; s < n - K; ++s) {
    parent[find(merges[s].left)] = n + s;
    parent[find(merges[s].right)] = n + s;
  }
  std::vector<int> labels(n, -1);
  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    auto it = std::find(roots.begin(), roots.end(), r);
    if (it == roots.end()) {
      roots.push_back(r);
      labels[i] = static_cast<int>(roots.size() - 1);
    } else {
      labels[i] = static_cast<int>(it - roots.begin());
    }
  }
  return labels;
}

// Maps 0-based ids to labels 1..K. With meta, clusters are ordered by the mean
// |latitude| of their members; without it, by size descending. Remaining ties
// go to the cluster holding the smaller sample index.
inline std::vector<int> canonical_labels(std::span<const int> raw, int K,
                                         const std::vector<SampleMeta>* meta = nullptr) {
  struct Key {
    double primary = 0.0;
    std::size_t first = std::numeric_limits<std::size_t>::max();
    std::size_t count = 0;
  };
  std::vector<Key> keys(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto& k = keys[static_cast<std::size_t>(raw[i])];
    k.first = std::min(k.first, i);
    ++k.count;
    if (meta) k.primary += std::abs((*meta)[i].latitude);
  }
  for (auto& k : keys) {
    if (k.count == 0) continue;
    k.primary = meta ? k.primary / static_cast<double>(k.count) : -static_cast<double>(k.count);
  }
  std::vector<int> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ka = keys[static_cast<std::size_t>(a)];
    const auto& kb = keys[static_cast<std::size_t>(b)];
    if (ka.primary != kb.primary) return ka.primary < kb.primary;
    return ka.first < kb.first;
  });
  std::vector<int> relabel(static_cast<std::size_t>(K));
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    relabel[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos) + 1;
  std::vector<int> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = relabel[static_cast<std::size_t>(raw[i])];
  return out;
}

inline ClusterResult cluster(const DistanceMatrix& dist, int K,
                             const std::vector<SampleMeta>* meta = nullptr) {
  const std::size_t n = dist.size();
  if (K < 1 || static_cast<std::size_t>(K) > n) throw ConfigError("K must lie in [1, n]");
  if (meta && meta->size() != n) throw DataError("meta size does not match distance matrix");
  ClusterResult out;
  out.K = K;
  out.merge_history = ward_linkage(dist);
  const auto raw = cut_dendrogram(out.merge_history, n, static_cast<std::size_t>(K));
  out.memberships = canonical_labels(raw, K, meta);
  return out;
}

inline ClusterResult cluster(const DistanceMatrix& dist, int K,
                             const std::vector<SampleMeta>& meta) {
  return cluster(dist, K, &meta);
}

// Sum over clusters of D[i1, i2] over ordered pairs i1 != i2 within the
// cluster (each unordered pair contributes twice).
inline double within_cluster_distance(const DistanceMatrix& dist, std::span<const int> memberships) {
  if (memberships.size() != dist.size())
    throw DataError("within_cluster_distance: memberships size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < memberships.size(); ++i)
    for (std::size_t j = 0; j < memberships.size(); ++j)
      if (i != j && memberships[i] == memberships[j]) total += dist(i, j);
  return total;
}

}  // namespace bioprovince
