#pragma once

// Sample and grid ingestion: compositional closure, zero replacement and
// ASV-column subsampling.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bioprovince/csv.hpp"
#include "bioprovince/errors.hpp"

namespace bioprovince {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// n samples x d ASV relative abundances. Every entry is strictly positive and
// each row sums to one.
struct CompositionTable {
  std::vector<std::string> sample_ids;
  std::vector<std::string> asv_ids;
  RowMatrix values;

  std::size_t n() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(values.cols()); }
  auto row(std::size_t i) const { return values.row(static_cast<Eigen::Index>(i)); }
};

struct SampleMeta {
  std::string sample_id;
  double latitude = 0.0;  // degrees
  double depth = 0.0;     // meters, positive downward
  double temperature = 0.0;
  double salinity = 0.0;
  std::string cruise;
  std::optional<std::string> external_province;
};

struct GridSpec {
  std::vector<std::string> grid_ids;
  std::vector<double> latitude;
  std::vector<double> depth;
  std::vector<double> temperature;
  std::vector<double> salinity;

  std::size_t size() const { return grid_ids.size(); }
};

struct SampleSet {
  CompositionTable table;
  std::vector<SampleMeta> meta;
};

struct ZeroPolicy {
  enum class Kind { multiplicative, pseudocount };
  Kind kind = Kind::multiplicative;
  double pseudocount = 0.0;

  // "multiplicative" or "pseudocount:<value>".
  static ZeroPolicy parse(const std::string& text) {
    if (text == "multiplicative") return {};
    const std::string prefix = "pseudocount:";
    if (text.rfind(prefix, 0) == 0) {
      double v = 0.0;
      try {
        v = csv::parse_double(text.substr(prefix.size()), "zero policy");
      } catch (const DataError&) {
        throw ConfigError("invalid zero policy '" + text + "'");
      }
      if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError("pseudocount must be positive and finite");
      return {Kind::pseudocount, v};
    }
    throw ConfigError("invalid zero policy '" + text +
                      "' (expected multiplicative or pseudocount:<value>)");
  }

  std::string to_string() const {
    return kind == Kind::multiplicative ? "multiplicative"
                                        : "pseudocount:" + csv::format_double(pseudocount);
  }
};

// Whether raw abundance rows hold counts or fractions. Auto treats the input
// as counts when any row sums to more than 1.5.
enum class InputKind { automatic, counts, fractions };

namespace detail {

inline void check_unique(const std::vector<std::string>& ids, const std::string& what) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second) throw DataError("duplicate " + what + " '" + id + "'");
}

inline void close_rows(RowMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i) /= m.row(i).sum();
}

}  // namespace detail

// Builds a valid table from raw nonnegative abundances: closure, zero
// replacement, closure again.
inline CompositionTable make_composition_table(std::vector<std::string> sample_ids,
                                               std::vector<std::string> asv_ids, RowMatrix raw,
                                               const ZeroPolicy& policy = {},
                                               InputKind kind = InputKind::automatic) {
  if (raw.rows() < 2) throw DataError("composition table needs at least 2 samples");
  if (raw.cols() < 2) throw DataError("composition table needs at least 2 ASVs");
  if (static_cast<std::size_t>(raw.rows()) != sample_ids.size() ||
      static_cast<std::size_t>(raw.cols()) != asv_ids.size())
    throw DataError("composition table shape does not match its identifiers");
  detail::check_unique(sample_ids, "sample id");
  detail::check_unique(asv_ids, "ASV id");

  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
      const double v = raw(i, j);
      if (!std::isfinite(v) || v < 0.0)
        throw DataError("sample '" + sample_ids[i] + "': abundances must be finite and >= 0");
    }
    if (!(raw.row(i).sum() > 0.0)) throw DataError("sample '" + sample_ids[i] + "': row of all zeros");
  }

  bool counts = kind == InputKind::counts;
  if (kind == InputKind::automatic)
    for (Eigen::Index i = 0; i < raw.rows() && !counts; ++i) counts = raw.row(i).sum() > 1.5;

  RowMatrix m = std::move(raw);
  if (policy.kind == ZeroPolicy::Kind::pseudocount) {
    // The pseudocount is in count units; for fraction input it is applied
    // after closure.
    if (!counts) detail::close_rows(m);
    m.array() += policy.pseudocount;
    detail::close_rows(m);
  } else {
    detail::close_rows(m);
    const bool has_zero = (m.array() == 0.0).any();
    if (has_zero) {
      double min_nonzero = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        const double v = m.data()[i];
        if (v > 0.0) min_nonzero = std::min(min_nonzero, v);
      }
      const double delta = 0.5 * min_nonzero;
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        bool touched = false;
        for (Eigen::Index j = 0; j < m.cols(); ++j)
          if (m(i, j) == 0.0) {
            m(i, j) = delta;
            touched = true;
          }
        if (touched) m.row(i) /= m.row(i).sum();
      }
    }
  }
  return CompositionTable{std::move(sample_ids), std::move(asv_ids), std::move(m)};
}

inline void validate_meta(const SampleMeta& m) {
  if (!std::isfinite(m.latitude) || std::abs(m.latitude) > 90.0)
    throw DataError("sample '" + m.sample_id + "': latitude out of range");
  if (!std::isfinite(m.depth)) throw DataError("sample '" + m.sample_id + "': depth not finite");
  if (m.depth < 0.0) throw DataError("sample '" + m.sample_id + "': depth must be >= 0");
}

inline std::vector<SampleMeta> parse_meta(const csv::Table& t, const std::string& name) {
  const auto c_id = t.require_column("sample_id", name);
  const auto c_lat = t.require_column("latitude", name);
  const auto c_depth = t.require_column("depth", name);
  const auto c_temp = t.require_column("temperature", name);
  const auto c_sal = t.require_column("salinity", name);
  const auto c_cruise = t.require_column("cruise", name);
  const auto c_ext = t.column("external_province");

  std::vector<SampleMeta> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    SampleMeta m;
    m.sample_id = r[c_id];
    const std::string ctx = name + " (sample '" + m.sample_id + "')";
    m.latitude = csv::parse_double(r[c_lat], ctx);
    m.depth = csv::parse_double(r[c_depth], ctx);
    m.temperature = csv::parse_double(r[c_temp], ctx);
    m.salinity = csv::parse_double(r[c_sal], ctx);
    m.cruise = r[c_cruise];
    if (c_ext && !r[*c_ext].empty()) m.external_province = r[*c_ext];
    validate_meta(m);
    out.push_back(std::move(m));
  }
  return out;
}

// Orders meta rows to match sample_ids. Extra meta rows are ignored.
inline std::vector<SampleMeta> align_meta(const std::vector<std::string>& sample_ids,
                                          std::vector<SampleMeta> meta) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < meta.size(); ++i)
    if (!index.emplace(meta[i].sample_id, i).second)
      throw DataError("duplicate sample id '" + meta[i].sample_id + "' in meta table");
  std::vector<SampleMeta> out;
  out.reserve(sample_ids.size());
  for (const auto& id : sample_ids) {
    auto it = index.find(id);
    if (it == index.end()) throw DataError("sample '" + id + "' has no meta row");
    out.push_back(meta[it->second]);
  }
  return out;
}

inline SampleSet parse_samples(const csv::Table& comp, const std::string& comp_name,
                               const csv::Table& meta, const std::string& meta_name,
                               const ZeroPolicy& policy = {},
                               InputKind kind = InputKind::automatic) {
  if (comp.header.empty() || comp.header[0] != "sample_id")
    throw DataError(comp_name + ": first column must be 'sample_id'");
  std::vector<std::string> asv_ids(comp.header.begin() + 1, comp.header.end());
  std::vector<std::string> sample_ids;
  RowMatrix raw(static_cast<Eigen::Index>(comp.rows.size()),
                static_cast<Eigen::Index>(asv_ids.size()));
  for (std::size_t i = 0; i < comp.rows.size(); ++i) {
    const auto& r = comp.rows[i];
    sample_ids.push_back(r[0]);
    const std::string ctx = comp_name + " (sample '" + r[0] + "')";
    for (std::size_t j = 0; j < asv_ids.size(); ++j)
      raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          csv::parse_double(r[j + 1], ctx);
  }
  auto table = make_composition_table(std::move(sample_ids), std::move(asv_ids), std::move(raw),
                                      policy, kind);
  auto aligned = align_meta(table.sample_ids, parse_meta(meta, meta_name));
  return SampleSet{std::move(table), std::move(aligned)};
}

inline SampleSet load_samples(const std::string& composition_csv, const std::string& meta_csv,
                              const ZeroPolicy& policy = {},
                              InputKind kind = InputKind::automatic) {
  return parse_samples(csv::read(composition_csv), composition_csv, csv::read(meta_csv), meta_csv,
                       policy, kind);
}

inline GridSpec parse_grid(const csv::Table& t, const std::string& name) {
  if (t.header.empty() && t.rows.empty()) throw DataError(name + ": empty grid");
  const auto c_lat = t.require_column("latitude", name);
  const auto c_depth = t.require_column("depth", name);
  const auto c_temp = t.require_column("temperature", name);
  const auto c_sal = t.require_column("salinity", name);
  const auto c_id = t.column("grid_id");
  if (t.rows.empty()) throw DataError(name + ": empty grid");

  GridSpec g;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const std::string id = c_id ? r[*c_id] : std::to_string(i + 1);
    const std::string ctx = name + " (grid point '" + id + "')";
    const double lat = csv::parse_double(r[c_lat], ctx);
    const double depth = csv::parse_double(r[c_depth], ctx);
    const double temp = csv::parse_double(r[c_temp], ctx);
    const double sal = csv::parse_double(r[c_sal], ctx);
    if (!std::isfinite(lat) || !std::isfinite(depth) || !std::isfinite(temp) ||
        !std::isfinite(sal))
      throw DataError(ctx + ": non-finite value");
    g.grid_ids.push_back(id);
    g.latitude.push_back(lat);
    g.depth.push_back(depth);
    g.temperature.push_back(temp);
    g.salinity.push_back(sal);
  }
  return g;
}

inline GridSpec load_grid(const std::string& path) { return parse_grid(csv::read(path), path); }

// Number of ASV columns kept by subsample_asvs.
inline std::size_t subsample_width(std::size_t d, double fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(d) * fraction + 1e-9));
}

// Keeps floor(d * fraction) ASV columns chosen uniformly without replacement
// (the same columns for every sample, original column order) and re-closes
// each row. fraction == 1 returns the input unchanged.
inline CompositionTable subsample_asvs(const CompositionTable& table, double fraction,
                                       std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("subsample fraction must lie in (0, 1]");
  const std::size_t d = table.d();
  const std::size_t keep = subsample_width(d, fraction);
  if (keep < 2) throw ConfigError("subsampling leaves fewer than 2 ASVs");
  if (keep == d) return table;

  std::vector<std::size_t> cols(d);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `keep` slots become a uniform subset.
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, d - 1);
    std::swap(cols[i], cols[pick(rng)]);
  }
  cols.resize(keep);
  std::sort(cols.begin(), cols.end());

  CompositionTable out;
  out.sample_ids = table.sample_ids;
  out.values.resize(table.values.rows(), static_cast<Eigen::Index>(keep));
  for (std::size_t j = 0; j < keep; ++j) {
    out.asv_ids.push_back(table.asv_ids[cols[j]]);
    out.values.col(static_cast<Eigen::Index>(j)) =
        table.values.col(static_cast<Eigen::Index>(cols[j]));
  }
  detail::close_rows(out.values);
  return out;
}

}  // namespace bioprovince
