#pragma once

// Dense numerical kernels: spectral norm, classical MDS, convex-hull
// membership, linear assignment and simple linear regression.

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bioprovince/errors.hpp"

namespace bioprovince {

// Symmetric, nonnegative, zero-diagonal n x n matrix.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;

  explicit DistanceMatrix(Eigen::MatrixXd values) : values_(std::move(values)) { validate(); }

  static DistanceMatrix zeros(std::size_t n) {
    DistanceMatrix d;
    d.values_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    return d;
  }

  std::size_t size() const { return static_cast<std::size_t>(values_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Eigen::MatrixXd& matrix() const { return values_; }

  // Builds from an already symmetric matrix without re-checking; used by the
  // constructors in this library that produce entries pairwise.
  static DistanceMatrix trusted(Eigen::MatrixXd values) {
    DistanceMatrix d;
    d.values_ = std::move(values);
    return d;
  }

  // Principal submatrix over the given indices (repeats allowed).
  DistanceMatrix select(std::span<const std::size_t> idx) const {
    const auto m = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd out(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b)
        out(a, b) = values_(static_cast<Eigen::Index>(idx[a]), static_cast<Eigen::Index>(idx[b]));
    for (Eigen::Index a = 0; a < m; ++a) out(a, a) = 0.0;
    return trusted(std::move(out));
  }

 private:
  void validate() const {
    if (values_.rows() != values_.cols()) throw NumericalError("distance matrix must be square");
    const double scale = std::max(1.0, values_.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      if (values_(i, i) != 0.0) throw NumericalError("distance matrix diagonal must be zero");
      for (Eigen::Index j = 0; j < values_.cols(); ++j) {
        const double v = values_(i, j);
        if (!std::isfinite(v) || v < 0.0)
          throw NumericalError("distance matrix entries must be finite and nonnegative");
        if (std::abs(v - values_(j, i)) > 1e-12 * scale)
          throw NumericalError("distance matrix must be symmetric");
      }
    }
  }

  Eigen::MatrixXd values_;
};

// Largest absolute eigenvalue of a symmetric matrix by power iteration.
// Returns 0 for the zero matrix.
inline double operator_norm(const Eigen::MatrixXd& a, double rel_tol = 1e-12,
                            int max_iter = 10000) {
  if (a.rows() != a.cols()) throw NumericalError("operator_norm: matrix must be square");
  if (!a.allFinite()) throw NumericalError("operator_norm: non-finite entries");
  const Eigen::Index n = a.rows();
  if (n == 0 || a.cwiseAbs().maxCoeff() == 0.0) return 0.0;

  // A non-uniform start vector avoids being orthogonal to the dominant
  // eigenvector of structured inputs such as [[1,-1],[-1,1]].
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + 0.5 * std::sin(static_cast<double>(i) + 1.0);
  v.normalize();

  double estimate = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = a * v;
    const double next = w.norm();
    if (next == 0.0) break;
    v = w / next;
    if (std::abs(next - estimate) <= rel_tol * next) return next;
    estimate = next;
  }
  if (estimate == 0.0) {
    // Start vector fell in the null space; fall back to an exact solve.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  return estimate;
}

// Torgerson classical scaling: B = -1/2 J D^2 J, coordinates are the top
// eigenvectors scaled by sqrt(max(lambda, 0)). Each coordinate column is
// sign-normalized so its first nonzero entry is positive.
inline Eigen::MatrixXd classical_mds(const DistanceMatrix& dist, int dims = 2) {
  const auto n = static_cast<Eigen::Index>(dist.size());
  if (n < 3) throw NumericalError("classical_mds needs at least 3 points");
  if (dims < 1 || dims > n) throw NumericalError("classical_mds: invalid dimension count");

  const Eigen::MatrixXd sq = dist.matrix().array().square().matrix();
  const Eigen::VectorXd row_mean = sq.rowwise().mean();
  const double grand_mean = row_mean.mean();
  Eigen::MatrixXd b(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      b(i, j) = -0.5 * (sq(i, j) - row_mean(i) - row_mean(j) + grand_mean);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
  if (es.info() != Eigen::Success) throw NumericalError("classical_mds: eigensolver failed");

  Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(n, dims);
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  for (int k = 0; k < dims; ++k) {
    const Eigen::Index col = n - 1 - k;  // eigenvalues are ascending
    const double lambda = es.eigenvalues()(col);
    if (!(lambda > 1e-14 * scale)) continue;
    Eigen::VectorXd vec = es.eigenvectors().col(col);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(vec(i)) > 1e-10) {
        if (vec(i) < 0) vec = -vec;
        break;
      }
    }
    coords.col(k) = vec * std::sqrt(lambda);
  }
  return coords;
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct HullScore {
  double fraction = 0.0;
  bool degenerate = false;  // corners collinear, no area
};

namespace detail {

inline double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew's monotone chain, counter-clockwise, collinear points dropped.
inline std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace detail

// Fraction of points inside or on the convex hull of the four corners.
inline HullScore convex_hull_fraction(std::span<const Point2> points,
                                      const std::array<Point2, 4>& corners,
                                      double tol = 1e-9) {
  const auto hull = detail::convex_hull({corners.begin(), corners.end()});
  if (hull.size() < 3) return {0.0, true};
  if (points.empty()) return {0.0, false};

  std::size_t inside = 0;
  for (const auto& p : points) {
    bool in = true;
    for (std::size_t e = 0; e < hull.size() && in; ++e) {
      const Point2& a = hull[e];
      const Point2& b = hull[(e + 1) % hull.size()];
      const double len = std::hypot(b.x - a.x, b.y - a.y);
      // signed distance from the edge line, positive on the interior side
      if (detail::cross(a, b, p) / len < -tol) in = false;
    }
    inside += in ? 1 : 0;
  }
  return {static_cast<double>(inside) / static_cast<double>(points.size()), false};
}

namespace detail {

// O(K^3) shortest augmenting path assignment. Returns row -> column.
inline std::vector<std::size_t> assignment_core(const Eigen::MatrixXd& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) -
                           u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

inline double assignment_total(const Eigen::MatrixXd& cost, const std::vector<std::size_t>& perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i)
    total += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(perm[i]));
  return total;
}

}  // namespace detail

// Minimum-cost perfect assignment on a square cost matrix. Returns perm with
// perm[row] = column (0-based). Among optimal assignments the
// lexicographically smallest permutation is returned.
inline std::vector<std::size_t> hungarian(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw NumericalError("hungarian: cost matrix must be square");
  if (!cost.allFinite()) throw NumericalError("hungarian: non-finite cost");
  const auto n = static_cast<std::size_t>(cost.rows());
  if (n == 0) return {};

  const auto first = detail::assignment_core(cost);
  const double best = detail::assignment_total(cost, first);
  const double tol = 1e-12 * std::max(1.0, cost.cwiseAbs().sum());

  // Fix rows in order, taking the smallest column that still admits an
  // optimal completion.
  std::vector<std::size_t> perm(n);
  std::vector<std::size_t> free_rows(n), free_cols(n);
  std::iota(free_rows.begin(), free_rows.end(), std::size_t{0});
  std::iota(free_cols.begin(), free_cols.end(), std::size_t{0});
  double fixed_cost = 0.0;
  for (std::size_t row = 0; row < n; ++row) {
    const std::size_t rest = n - row - 1;
    bool placed = false;
    for (std::size_t ci = 0; ci < free_cols.size() && !placed; ++ci) {
      const std::size_t col = free_cols[ci];
      const double here = cost(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
      double completion = 0.0;
      if (rest > 0) {
        Eigen::MatrixXd sub(static_cast<Eigen::Index>(rest), static_cast<Eigen::Index>(rest));
        std::size_t cj = 0;
        for (std::size_t c = 0; c < free_cols.size(); ++c) {
          if (c == ci) continue;
          for (std::size_t r = 0; r < rest; ++r)
            sub(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cj)) =
                cost(static_cast<Eigen::Index>(row + 1 + r),
                     static_cast<Eigen::Index>(free_cols[c]));
          ++cj;
        }
        completion = detail::assignment_total(sub, detail::assignment_core(sub));
      }
      if (fixed_cost + here + completion <= best + tol) {
        perm[row] = col;
        fixed_cost += here;
        free_cols.erase(free_cols.begin() + static_cast<std::ptrdiff_t>(ci));
        placed = true;
      }
    }
    if (!placed) return first;  // numerical corner case; keep the plain optimum
  }
  return perm;
}

struct RegressionFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_err = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;  // two-sided, H0: slope == 0
  std::size_t n_pairs = 0;
};

// Ordinary least squares y ~ a + b x with a two-sided t-test on b using n-2
// degrees of freedom.
inline RegressionFit linear_regression(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw NumericalError("linear_regression: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw NumericalError("linear_regression: need at least 3 points");

  const double nd = static_cast<double>(n);
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nd;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nd;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw NumericalError("linear_regression: predictor is constant");

  RegressionFit fit;
  fit.n_pairs = n;
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
    fit.intercept = y[0];
    return fit;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    sse += r * r;
  }
  const double dof = nd - 2.0;
  fit.slope_std_err = std::sqrt(sse / dof / sxx);
  if (fit.slope_std_err == 0.0) {
    fit.t_stat = fit.slope == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), fit.slope);
    fit.p_value = fit.slope == 0.0 ? 1.0 : 0.0;
    return fit;
  }
  fit.t_stat = fit.slope / fit.slope_std_err;
  const boost::math::students_t dist(dof);
  fit.p_value = std::clamp(2.0 * boost::math::cdf(dist, -std::abs(fit.t_stat)), 0.0, 1.0);
  return fit;
}

}  // namespace bioprovince
