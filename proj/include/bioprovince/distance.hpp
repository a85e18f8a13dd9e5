#pragma once

// Biological (Aitchison), spatial (r-scaled latitude and depth) and mixed
// distance matrices.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "bioprovince/data.hpp"
#include "bioprovince/errors.hpp"
#include "bioprovince/numerics.hpp"
#include "bioprovince/parallel.hpp"

namespace bioprovince {

struct MixParams {
  double alpha = 0.0;  // weight of the spatial matrix
  double r = 1.0;      // latitude-to-depth scale, meters per degree

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("r must be positive and finite");
  }
};

struct SpatialPoint {
  double latitude = 0.0;
  double depth = 0.0;
};

inline std::vector<SpatialPoint> spatial_points(const std::vector<SampleMeta>& meta) {
  std::vector<SpatialPoint> out;
  out.reserve(meta.size());
  for (const auto& m : meta) out.push_back({m.latitude, m.depth});
  return out;
}

// Centered log-ratio transform.
inline Eigen::VectorXd clr(std::span<const double> p) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(p.size()));
  double mean_log = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) {
    if (!(p[l] > 0.0) || !std::isfinite(p[l]))
      throw DataError("composition parts must be strictly positive and finite");
    out(static_cast<Eigen::Index>(l)) = std::log(p[l]);
    mean_log += out(static_cast<Eigen::Index>(l));
  }
  mean_log /= static_cast<double>(p.size());
  out.array() -= mean_log;
  return out;
}

inline double aitchison_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DataError("aitchison_distance: length mismatch");
  if (p.size() < 2) throw DataError("aitchison_distance: need at least 2 parts");
  return (clr(p) - clr(q)).norm();
}

inline RowMatrix clr_rows(const CompositionTable& table) {
  RowMatrix out(table.values.rows(), table.values.cols());
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    const auto row = table.values.row(i);
    out.row(i) = clr(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
  return out;
}

// Pairwise Aitchison distances. Each entry is computed on its own from the clr
// rows, so the result does not depend on the thread schedule.
inline DistanceMatrix bio_distance_matrix(const CompositionTable& table) {
  const RowMatrix z = clr_rows(table);
  const Eigen::Index n = z.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t ii) {
    const auto i = static_cast<Eigen::Index>(ii);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (z.row(i) - z.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  });
  return DistanceMatrix::trusted(std::move(d));
}

inline double spatial_distance(const SpatialPoint& a, const SpatialPoint& b, double r) {
  const double dl = r * (a.latitude - b.latitude);
  const double dz = a.depth - b.depth;
  return std::sqrt(dl * dl + dz * dz);
}

inline DistanceMatrix spatial_distance_matrix(std::span<const SpatialPoint> pts, double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("r must be positive and finite");
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = spatial_distance(pts[i], pts[j], r);
      d(i, j) = v;
      d(j, i) = v;
    }
  return DistanceMatrix::trusted(std::move(d));
}

inline DistanceMatrix spatial_distance_matrix(const std::vector<SampleMeta>& meta, double r) {
  const auto pts = spatial_points(meta);
  return spatial_distance_matrix(std::span<const SpatialPoint>(pts), r);
}

// h(): divide by the spectral norm. A zero matrix stays zero.
inline Eigen::MatrixXd scale_by_operator_norm(const DistanceMatrix& m) {
  const double norm = operator_norm(m.matrix());
  if (norm == 0.0) return Eigen::MatrixXd::Zero(m.matrix().rows(), m.matrix().cols());
  return m.matrix() / norm;
}

// D_alpha = (1 - alpha) h(D_bio) + alpha h(D_spatial).
inline DistanceMatrix mix_distance_matrix(const DistanceMatrix& d_bio,
                                          const DistanceMatrix& d_spatial, double alpha) {
  if (d_bio.size() != d_spatial.size())
    throw NumericalError("mix_distance_matrix: size mismatch");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  Eigen::MatrixXd bio = scale_by_operator_norm(d_bio);
  Eigen::MatrixXd geo = scale_by_operator_norm(d_spatial);
  if (alpha == 0.0) return DistanceMatrix::trusted(std::move(bio));
  if (alpha == 1.0) return DistanceMatrix::trusted(std::move(geo));
  return DistanceMatrix::trusted((1.0 - alpha) * bio + alpha * geo);
}

}  // namespace bioprovince
