#pragma once

// Independent reference implementations used by the tests. None of these share
// code with the library beyond plain data types.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <vector>

namespace oracle {

// Cyclic Jacobi rotations; returns eigenvalues of a symmetric matrix.
inline std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
  return ev;
}

inline double spectral_norm(const Eigen::MatrixXd& a) {
  double best = 0.0;
  for (double v : jacobi_eigenvalues(a)) best = std::max(best, std::abs(v));
  return best;
}

struct Assignment {
  std::vector<std::size_t> perm;
  double cost = 0.0;
};

// Minimum-cost permutation by enumeration; the first minimum in
// lexicographic order wins.
inline Assignment brute_force_assignment(const Eigen::MatrixXd& cost) {
  const auto k = static_cast<std::size_t>(cost.rows());
  std::vector<std::size_t> p(k);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Assignment best{p, std::numeric_limits<double>::infinity()};
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < k; ++i) c += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p[i]));
    if (c < best.cost) best = {p, c};
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

// Ward agglomeration recomputed from scratch at every step. The merge cost of
// clusters A and B is twice the increase in within-cluster sum of squares,
// with S(C) the sum of squared dissimilarities over unordered pairs in C and
// W(C) = S(C) / |C|. Clusters are keyed by their smallest member; ties go to
// the smallest key pair.
struct NaiveMerge {
  std::size_t left, right;
  double height;
};

inline std::vector<NaiveMerge> naive_ward(const Eigen::MatrixXd& d) {
  const auto n = static_cast<std::size_t>(d.rows());
  std::vector<std::vector<std::size_t>> members(n);
  std::vector<std::size_t> node(n);
  for (std::size_t i = 0; i < n; ++i) {
    members[i] = {i};
    node[i] = i;
  }
  std::vector<bool> alive(n, true);
  auto S = [&](const std::vector<std::size_t>& c) {
    double s = 0.0;
    for (std::size_t a = 0; a < c.size(); ++a)
      for (std::size_t b = a + 1; b < c.size(); ++b) {
        const double v = d(static_cast<Eigen::Index>(c[a]), static_cast<Eigen::Index>(c[b]));
        s += v * v;
      }
    return s;
  };
  std::vector<NaiveMerge> out;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!alive[j]) continue;
        auto u = members[i];
        u.insert(u.end(), members[j].begin(), members[j].end());
        const double a = static_cast<double>(members[i].size());
        const double b = static_cast<double>(members[j].size());
        const double cost = 2.0 * (S(u) / (a + b) - S(members[i]) / a - S(members[j]) / b);
        if (std::isinf(best) || cost < best - 1e-12 * std::max(1.0, std::abs(best))) {
          best = cost;
          bi = i;
          bj = j;
        }
      }
    }
    out.push_back({node[bi], node[bj], std::sqrt(std::max(best, 0.0))});
    members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
    alive[bj] = false;
    node[bi] = n + step;
  }
  return out;
}

// Flat cut of a naive merge list into K groups, labels by first appearance.
inline std::vector<int> naive_cut(const std::vector<NaiveMerge>& merges, std::size_t n, std::size_t K) {
  std::vector<std::set<std::size_t>> sets(2 * n);
  for (std::size_t i = 0; i < n; ++i) sets[i] = {i};
  std::set<std::size_t> roots;
  for (std::size_t i = 0; i < n; ++i) roots.insert(i);
  for (std::size_t s = 0; s < n - K; ++s) {
    sets[n + s] = sets[merges[s].left];
    sets[n + s].insert(sets[merges[s].right].begin(), sets[merges[s].right].end());
    roots.erase(merges[s].left);
    roots.erase(merges[s].right);
    roots.insert(n + s);
  }
  std::vector<int> label(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] >= 0) continue;
    for (std::size_t r : roots)
      if (sets[r].count(i)) {
        for (std::size_t m : sets[r]) label[m] = next;
        ++next;
        break;
      }
  }
  return label;
}

struct Ols {
  double slope, intercept, std_err, t;
};

// Textbook closed form.
inline Ols ols(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - intercept - slope * x[i];
    sse += e * e;
  }
  const double mx = sx / n;
  double ssx = 0;
  for (double v : x) ssx += (v - mx) * (v - mx);
  const double se = std::sqrt(sse / (n - 2) / ssx);
  return {slope, intercept, se, slope / se};
}

// Aitchison distance from all pairwise log-ratios:
// d^2 = 1/(2D) sum_i sum_j (ln(p_i/p_j) - ln(q_i/q_j))^2.
inline double aitchison_pairwise(const std::vector<double>& p, const std::vector<double>& q) {
  const std::size_t D = p.size();
  double s = 0.0;
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j) {
      const double v = std::log(p[i] / p[j]) - std::log(q[i] / q[j]);
      s += v * v;
    }
  return std::sqrt(s / (2.0 * static_cast<double>(D)));
}

// Two-sided Mann-Whitney U test, normal approximation with tie correction.
inline double mann_whitney_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<std::pair<double, int>> all;
  for (double v : a) all.emplace_back(v, 0);
  for (double v : b) all.emplace_back(v, 1);
  std::sort(all.begin(), all.end());
  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
  const double N = n1 + n2;
  double rank_a = 0.0, tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double t = static_cast<double>(j - i);
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j) + 1.0);
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second == 0) rank_a += avg;
    tie_term += t * t * t - t;
    i = j;
  }
  const double U = rank_a - n1 * (n1 + 1) / 2;
  const double mu = n1 * n2 / 2;
  const double var = n1 * n2 / 12.0 * ((N + 1) - tie_term / (N * (N - 1)));
  if (var <= 0.0) return 1.0;
  const double z = (std::abs(U - mu) - 0.5) / std::sqrt(var);
  return std::erfc(std::max(z, 0.0) / std::sqrt(2.0));
}

inline std::vector<double> random_composition(std::size_t d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> p(d);
  double s = 0;
  for (auto& v : p) s += (v = u(rng));
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace oracle
