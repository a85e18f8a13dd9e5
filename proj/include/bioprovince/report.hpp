#pragma once

// Summaries against external labels, per-cluster mean compositions, partition
// agreement, and a planted-province generator for validation runs.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bioprovince/csv.hpp"
#include "bioprovince/data.hpp"
#include "bioprovince/errors.hpp"

namespace bioprovince {

// Adjusted Rand index between two labelings of the same items.
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw DataError("adjusted_rand_index: size mismatch");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < n; ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [k, v] : joint) index += c2(v);
  for (const auto& [k, v] : ra) sa += c2(v);
  for (const auto& [k, v] : rb) sb += c2(v);
  const double total = c2(static_cast<double>(n));
  const double expected = sa * sb / total;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;  // both partitions trivial
  return (index - expected) / (max_index - expected);
}

// ---------------------------------------------------------------------------
// Cross-tabulation against external province labels
// ---------------------------------------------------------------------------

struct CrossTab {
  std::vector<std::string> row_labels;  // external provinces, north to south
  std::vector<int> col_labels;          // estimated provinces
  Eigen::MatrixXd values;               // row-normalized fractions
  std::size_t excluded = 0;             // samples without an external label
};

// Rows are ordered by descending mean latitude of their samples. Columns
// follow the rows' argmax cells in row order, then any remaining labels in
// ascending order.
inline CrossTab cross_tabulate(std::span<const int> memberships, const std::vector<SampleMeta>& meta) {
  if (memberships.size() != meta.size()) throw DataError("cross_tabulate: size mismatch");
  struct RowAcc {
    double lat_sum = 0.0;
    double count = 0.0;
    std::map<int, double> cells;
  };
  std::map<std::string, RowAcc> rows;
  std::vector<int> labels;
  CrossTab out;
  for (std::size_t i = 0; i < meta.size(); ++i) {
    if (!meta[i].external_province) {
      ++out.excluded;
      continue;
    }
    auto& r = rows[*meta[i].external_province];
    r.lat_sum += meta[i].latitude;
    r.count += 1.0;
    r.cells[memberships[i]] += 1.0;
    labels.push_back(memberships[i]);
  }
  if (rows.empty()) throw DataError("cross_tabulate: no samples carry an external province label");
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());

  for (const auto& [name, acc] : rows) out.row_labels.push_back(name);
  std::stable_sort(out.row_labels.begin(), out.row_labels.end(),
                   [&](const std::string& x, const std::string& y) {
                     const auto& rx = rows.at(x);
                     const auto& ry = rows.at(y);
                     return rx.lat_sum / rx.count > ry.lat_sum / ry.count;
                   });
  for (const auto& name : out.row_labels) {
    int best = 0;
    double best_v = -1.0;
    for (const auto& [lab, v] : rows.at(name).cells)
      if (v > best_v) {
        best_v = v;
        best = lab;
      }
    if (std::find(out.col_labels.begin(), out.col_labels.end(), best) == out.col_labels.end())
      out.col_labels.push_back(best);
  }
  for (int lab : labels)
    if (std::find(out.col_labels.begin(), out.col_labels.end(), lab) == out.col_labels.end())
      out.col_labels.push_back(lab);

  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out.row_labels.size()),
                                     static_cast<Eigen::Index>(out.col_labels.size()));
  for (std::size_t r = 0; r < out.row_labels.size(); ++r) {
    const auto& acc = rows.at(out.row_labels[r]);
    for (std::size_t c = 0; c < out.col_labels.size(); ++c) {
      auto it = acc.cells.find(out.col_labels[c]);
      if (it != acc.cells.end())
        out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = it->second / acc.count;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mean composition per cluster, aggregated over taxonomic groups
// ---------------------------------------------------------------------------

struct GroupedComposition {
  std::vector<int> cluster_labels;
  std::vector<std::string> groups;
  Eigen::MatrixXd values;  // cluster x group, rows sum to 1
};

inline std::unordered_map<std::string, std::string> load_group_map(const std::string& path) {
  const auto t = csv::read(path);
  const auto c_asv = t.require_column("asv_id", path);
  const auto c_group = t.require_column("group", path);
  std::unordered_map<std::string, std::string> out;
  for (const auto& r : t.rows)
    if (!out.emplace(r[c_asv], r[c_group]).second)
      throw DataError(path + ": duplicate asv_id '" + r[c_asv] + "'");
  return out;
}

// Groups appear in order of first use along the ASV columns; unmapped ASVs
// fall into "other". An empty map keeps one group per ASV.
inline GroupedComposition mean_cluster_composition(
    const CompositionTable& table, std::span<const int> memberships,
    const std::unordered_map<std::string, std::string>& group_map) {
  if (memberships.size() != table.n()) throw DataError("mean_cluster_composition: size mismatch");
  GroupedComposition out;
  std::vector<std::size_t> group_of(table.d());
  for (std::size_t j = 0; j < table.d(); ++j) {
    std::string g;
    if (group_map.empty()) {
      g = table.asv_ids[j];
    } else {
      auto it = group_map.find(table.asv_ids[j]);
      g = it == group_map.end() ? "other" : it->second;
    }
    auto pos = std::find(out.groups.begin(), out.groups.end(), g);
    if (pos == out.groups.end()) {
      out.groups.push_back(g);
      group_of[j] = out.groups.size() - 1;
    } else {
      group_of[j] = static_cast<std::size_t>(pos - out.groups.begin());
    }
  }
  const int K = memberships.empty() ? 0 : *std::max_element(memberships.begin(), memberships.end());
  out.values = Eigen::MatrixXd::Zero(K, static_cast<Eigen::Index>(out.groups.size()));
  for (int c = 1; c <= K; ++c) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(table.d()));
    double count = 0.0;
    for (std::size_t i = 0; i < memberships.size(); ++i)
      if (memberships[i] == c) {
        mean += table.row(i);
        count += 1.0;
      }
    if (count == 0.0) throw DataError("cluster " + std::to_string(c) + " is empty");
    mean /= count;
    for (std::size_t j = 0; j < table.d(); ++j)
      out.values(c - 1, static_cast<Eigen::Index>(group_of[j])) += mean(static_cast<Eigen::Index>(j));
    out.cluster_labels.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Planted-province generator
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  int n_provinces = 3;
  std::size_t n_samples = 150;
  std::size_t n_asvs = 300;
  double noise = 0.15;  // per-sample clr noise magnitude
  std::uint64_t seed = 1;
  std::size_t n_grid = 2000;
  std::size_t n_cruises = 2;
  std::size_t samples_per_cast = 5;
  double lat_min = -40.0;
  double lat_max = 40.0;
  double depth_max = 150.0;
  double separation = 6.0;         // clr distance scale between province centers
  double lat_gradient = 0.12;      // clr drift per degree
  double depth_gradient = 0.05;    // clr drift per meter
  double boundary_tilt = 4.0;      // degrees of boundary shift from surface to depth_max
  double boundary_gap = 2.0;       // no samples within this many degrees of a boundary
};

struct SyntheticData {
  SampleSet samples;
  GridSpec grid;
  std::vector<int> sample_truth;  // 1..n_provinces
  std::vector<int> grid_truth;
};

// Latitude of the boundary between provinces p and p + 1 (p in 1..P-1) at a
// given depth. Boundaries are evenly spaced and tilt linearly with depth.
inline double planted_boundary(const SyntheticSpec& s, int p, double depth) {
  const double span = s.lat_max - s.lat_min;
  return s.lat_min + span * p / s.n_provinces + s.boundary_tilt * (depth / s.depth_max - 0.5);
}

// Provinces are contiguous latitude bands, numbered from the south.
inline int planted_province(const SyntheticSpec& s, double lat, double depth) {
  int p = 1;
  for (int b = 1; b < s.n_provinces; ++b)
    if (lat >= planted_boundary(s, b, depth)) p = b + 1;
  return p;
}

inline double planted_temperature(const SyntheticSpec& s, double lat, double depth) {
  return 28.0 - 0.25 * std::abs(lat) - 10.0 * depth / s.depth_max;
}

inline double planted_salinity(const SyntheticSpec&, int province, double depth) {
  return 33.5 + 0.8 * province + 0.002 * depth;
}

inline SyntheticData generate_synthetic(const SyntheticSpec& s) {
  if (s.n_provinces < 1) throw ConfigError("synthetic: need at least one province");
  if (static_cast<std::size_t>(s.n_provinces) > s.n_samples)
    throw ConfigError("synthetic: more provinces than samples");
  if (s.n_samples < 2 || s.n_asvs < 2) throw ConfigError("synthetic: need at least 2 samples and 2 ASVs");
  if (s.n_grid < 1) throw ConfigError("synthetic: grid must have at least one point");
  if (s.n_cruises < 1) throw ConfigError("synthetic: need at least one cruise");
  if (!(s.noise >= 0.0)) throw ConfigError("synthetic: noise must be nonnegative");
  if (s.samples_per_cast < 1) throw ConfigError("synthetic: casts need at least one sample");

  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(s.n_asvs);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(s.n_asvs));

  auto random_direction = [&] {
    Eigen::VectorXd v(d);
    for (Eigen::Index l = 0; l < d; ++l) v(l) = gauss(rng);
    return Eigen::VectorXd(v / v.norm());
  };
  std::vector<Eigen::VectorXd> centers;
  for (int p = 0; p < s.n_provinces; ++p) {
    Eigen::VectorXd c(d);
    for (Eigen::Index l = 0; l < d; ++l) c(l) = s.separation * gauss(rng) * inv_sqrt_d;
    centers.push_back(c);
  }
  const Eigen::VectorXd lat_dir = random_direction();
  const Eigen::VectorXd depth_dir = random_direction();

  // Samples come from vertical casts. Cruises cover contiguous latitude
  // segments; each cast samples evenly spaced depth levels.
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  SyntheticData out;
  RowMatrix raw(static_cast<Eigen::Index>(s.n_samples), d);
  std::vector<std::string> sample_ids, asv_ids;
  for (std::size_t j = 0; j < s.n_asvs; ++j) asv_ids.push_back("asv" + std::to_string(j + 1));

  const std::size_t per_cast = std::min<std::size_t>(s.samples_per_cast, s.n_samples);
  const std::size_t n_casts = (s.n_samples + per_cast - 1) / per_cast;
  const double span = s.lat_max - s.lat_min;
  for (std::size_t i = 0; i < s.n_samples; ++i) {
    const std::size_t cast = i / per_cast;
    const std::size_t level = i % per_cast;
    const double frac = n_casts == 1 ? 0.5 : static_cast<double>(cast) / static_cast<double>(n_casts - 1);
    double lat = std::clamp(s.lat_min + span * frac + 0.25 * span / static_cast<double>(n_casts) *
                                                               jitter(rng),
                                  s.lat_min, s.lat_max);
    const double t = per_cast == 1 ? 0.5 : static_cast<double>(level) / static_cast<double>(per_cast - 1);
    const double depth = std::clamp(s.depth_max * t + 5.0 * jitter(rng), 0.0, s.depth_max);
    for (int b = 1; b < s.n_provinces; ++b) {
      const double edge = planted_boundary(s, b, depth);
      if (std::abs(lat - edge) < s.boundary_gap)
        lat = std::clamp(lat < edge ? edge - s.boundary_gap : edge + s.boundary_gap, s.lat_min, s.lat_max);
    }
    const int p = planted_province(s, lat, depth);

    Eigen::VectorXd z = centers[static_cast<std::size_t>(p - 1)] + s.lat_gradient * lat * lat_dir +
                        s.depth_gradient * depth * depth_dir;
    for (Eigen::Index l = 0; l < d; ++l) z(l) += s.noise * gauss(rng) * inv_sqrt_d;
    const double shift = z.maxCoeff();
    for (Eigen::Index l = 0; l < d; ++l) raw(static_cast<Eigen::Index>(i), l) = std::exp(z(l) - shift);

    SampleMeta m;
    m.sample_id = "s" + std::to_string(i + 1);
    m.latitude = lat;
    m.depth = depth;
    m.temperature = planted_temperature(s, lat, depth) + 0.3 * gauss(rng);
    m.salinity = planted_salinity(s, p, depth) + 0.05 * gauss(rng);
    m.cruise = "C" + std::to_string(cast * s.n_cruises / n_casts + 1);
    m.external_province = "P" + std::to_string(p);
    sample_ids.push_back(m.sample_id);
    out.samples.meta.push_back(std::move(m));
    out.sample_truth.push_back(p);
  }
  out.samples.table = make_composition_table(std::move(sample_ids), std::move(asv_ids), std::move(raw),
                                             ZeroPolicy{}, InputKind::fractions);

  // Regular latitude x depth lattice, latitude-major, truncated to n_grid.
  const auto n_depth = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(s.n_grid) / 5.0))));
  const std::size_t n_lat = (s.n_grid + n_depth - 1) / n_depth;
  for (std::size_t a = 0; a < n_lat && out.grid.size() < s.n_grid; ++a) {
    const double lat = n_lat == 1 ? 0.5 * (s.lat_min + s.lat_max)
                                  : s.lat_min + (s.lat_max - s.lat_min) * static_cast<double>(a) /
                                                    static_cast<double>(n_lat - 1);
    for (std::size_t b = 0; b < n_depth && out.grid.size() < s.n_grid; ++b) {
      const double depth = n_depth == 1 ? 0.5 * s.depth_max
                                        : s.depth_max * static_cast<double>(b) /
                                              static_cast<double>(n_depth - 1);
      const int p = planted_province(s, lat, depth);
      out.grid.grid_ids.push_back("g" + std::to_string(out.grid.size() + 1));
      out.grid.latitude.push_back(lat);
      out.grid.depth.push_back(depth);
      out.grid.temperature.push_back(planted_temperature(s, lat, depth));
      out.grid.salinity.push_back(planted_salinity(s, p, depth));
      out.grid_truth.push_back(p);
    }
  }
  return out;
}

}  // namespace bioprovince
