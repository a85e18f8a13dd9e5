#include <gtest/gtest.h>

#include <random>

#include "bioprovince/numerics.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace bioprovince;

namespace {

Eigen::MatrixXd random_symmetric(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0, 1);
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = g(rng);
  return a;
}

}  // namespace

TEST(OperatorNorm, SmallCases) {
  EXPECT_DOUBLE_EQ(operator_norm(Eigen::MatrixXd::Identity(2, 2)), 1.0);
  Eigen::MatrixXd a(2, 2);
  a << 0, 3, 3, 0;
  EXPECT_NEAR(operator_norm(a), 3.0, 1e-12);
  EXPECT_EQ(operator_norm(Eigen::MatrixXd::Zero(3, 3)), 0.0);
  a << 1, -1, -1, 1;
  EXPECT_NEAR(operator_norm(a), 2.0, 1e-12);
  a(0, 0) = std::nan("");
  EXPECT_THROW(operator_norm(a), NumericalError);
}

TEST(OperatorNorm, MatchesJacobiOracle) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const auto a = random_symmetric(5, rng);
    EXPECT_NEAR(operator_norm(a), oracle::spectral_norm(a), 1e-9);
  }
}

TEST(OperatorNorm, RayleighBound) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0, 1);
  const auto a = random_symmetric(8, rng);
  const double norm = operator_norm(a);
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::VectorXd v(8);
    for (auto& x : v) x = g(rng);
    EXPECT_GE(norm + 1e-9, (a * v).norm() / v.norm());
  }
}

TEST(Mds, ReconstructsPlanarDistances) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const auto d = testing_util::random_planar(4 + rep % 7, rng);
    const auto x = classical_mds(d, 2);
    for (std::size_t i = 0; i < d.size(); ++i)
      for (std::size_t j = 0; j < d.size(); ++j)
        EXPECT_NEAR((x.row(i) - x.row(j)).norm(), d(i, j), 1e-8);
  }
}

TEST(Mds, DegenerateConfigurations) {
  const auto zero = classical_mds(DistanceMatrix::zeros(4));
  EXPECT_EQ(zero.cwiseAbs().maxCoeff(), 0.0);
  Eigen::MatrixXd d(3, 3);
  d << 0, 1, 3, 1, 0, 2, 3, 2, 0;  // collinear points 0, 1, 3
  const auto x = classical_mds(DistanceMatrix(d));
  EXPECT_LT(x.col(1).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(std::abs(x(0, 0) - x(2, 0)), 3.0, 1e-12);
  EXPECT_THROW(classical_mds(DistanceMatrix::zeros(2)), NumericalError);
}

TEST(Mds, SignConvention) {
  std::mt19937_64 rng(8);
  const auto d = testing_util::random_planar(6, rng);
  const auto x = classical_mds(d);
  for (Eigen::Index c = 0; c < 2; ++c) {
    Eigen::Index i = 0;
    while (i < x.rows() && std::abs(x(i, c)) < 1e-12) ++i;
    ASSERT_LT(i, x.rows());
    EXPECT_GT(x(i, c), 0.0);
  }
}

TEST(ConvexHull, UnitSquare) {
  const std::array<Point2, 4> sq{Point2{0, 0}, Point2{1, 0}, Point2{1, 1}, Point2{0, 1}};
  const std::vector<Point2> in{{0.5, 0.5}}, out{{2, 2}};
  EXPECT_EQ(convex_hull_fraction(in, sq).fraction, 1.0);
  EXPECT_EQ(convex_hull_fraction(out, sq).fraction, 0.0);
  const std::vector<Point2> edge{{1.0, 0.5}, {1.0 + 1e-10, 0.5}, {0.0, 0.0}};
  EXPECT_EQ(convex_hull_fraction(edge, sq).fraction, 1.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Point2> pts(100);
  for (auto& p : pts) p = {u(rng), u(rng)};
  EXPECT_EQ(convex_hull_fraction(pts, sq).fraction, 1.0);
}

TEST(ConvexHull, CornerOrderInvariance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 2);
  std::vector<Point2> pts(200);
  for (auto& p : pts) p = {u(rng), u(rng)};
  std::array<Point2, 4> c{Point2{0, 0}, Point2{1.5, 0.2}, Point2{1.2, 1.4}, Point2{-0.2, 0.9}};
  const double ref = convex_hull_fraction(pts, c).fraction;
  std::array<int, 4> idx{0, 1, 2, 3};
  do {
    std::array<Point2, 4> perm{c[idx[0]], c[idx[1]], c[idx[2]], c[idx[3]]};
    EXPECT_EQ(convex_hull_fraction(pts, perm).fraction, ref);
  } while (std::next_permutation(idx.begin(), idx.end()));
}

TEST(ConvexHull, CollinearCornersAreFlagged) {
  const std::array<Point2, 4> line{Point2{0, 0}, Point2{1, 1}, Point2{2, 2}, Point2{3, 3}};
  const std::vector<Point2> pts{{1, 1}, {0, 1}};
  const auto s = convex_hull_fraction(pts, line);
  EXPECT_TRUE(s.degenerate);
  EXPECT_EQ(s.fraction, 0.0);
}

TEST(Hungarian, SmallCases) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Ones(4, 4) - Eigen::MatrixXd::Identity(4, 4);
  EXPECT_EQ(hungarian(c), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(hungarian(Eigen::MatrixXd::Constant(1, 1, 5.0)), (std::vector<std::size_t>{0}));
  // All permutations tie: the lexicographically smallest is the identity.
  EXPECT_EQ(hungarian(Eigen::MatrixXd::Zero(3, 3)), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_THROW(hungarian(Eigen::MatrixXd::Zero(2, 3)), NumericalError);
  c(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(hungarian(c), NumericalError);
}

TEST(Hungarian, MatchesEnumerationOnIntegerCosts) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> u(0, 9);
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::MatrixXd c(3, 3);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = u(rng);
    const auto best = oracle::brute_force_assignment(c);
    EXPECT_EQ(hungarian(c), best.perm);
  }
}

TEST(Hungarian, NoWorseThanRandomPermutations) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0, 10);
  for (Eigen::Index K = 2; K <= 8; ++K) {
    Eigen::MatrixXd c(K, K);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = u(rng);
    const auto perm = hungarian(c);
    double total = 0;
    for (Eigen::Index i = 0; i < K; ++i) total += c(i, static_cast<Eigen::Index>(perm[i]));
    std::vector<std::size_t> p(static_cast<std::size_t>(K));
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (int rep = 0; rep < 1000; ++rep) {
      std::shuffle(p.begin(), p.end(), rng);
      double t = 0;
      for (Eigen::Index i = 0; i < K; ++i) t += c(i, static_cast<Eigen::Index>(p[i]));
      EXPECT_LE(total, t + 1e-12);
    }
  }
}

TEST(Regression, NoiselessLine) {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 6, 8, 10};
  const auto f = linear_regression(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 0.0, 1e-13);
  EXPECT_LT(f.p_value, 1e-6);
  EXPECT_EQ(f.n_pairs, 5u);
}

TEST(Regression, ConstantResponse) {
  const std::vector<double> x{1, 2, 3, 4}, y{7, 7, 7, 7};
  const auto f = linear_regression(x, y);
  EXPECT_EQ(f.slope, 0.0);
  EXPECT_NEAR(f.p_value, 1.0, 1e-12);
}

TEST(Regression, MatchesClosedFormOls) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0, 1);
  std::uniform_real_distribution<double> u(0, 10);
  std::vector<double> x(200), y(200);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = u(rng);
    y[i] = 3.0 * x[i] + 1.0 + g(rng);
  }
  const auto f = linear_regression(x, y);
  const auto o = oracle::ols(x, y);
  EXPECT_GE(f.slope, 2.8);
  EXPECT_LE(f.slope, 3.2);
  EXPECT_NEAR(f.slope, o.slope, 1e-10);
  EXPECT_NEAR(f.intercept, o.intercept, 1e-10);
  EXPECT_NEAR(f.slope_std_err, o.std_err, 1e-10);
  EXPECT_NEAR(f.t_stat, o.t, 1e-6);
  EXPECT_GE(f.p_value, 0.0);
  EXPECT_LE(f.p_value, 1.0);
}

TEST(Regression, KnownPValue) {
  // Residuals e are orthogonal to x and sum to zero, so y = x + c e keeps
  // slope 1 while t scales as 1 / c. Pick c so that t = 2 with 8 degrees of
  // freedom; the two-sided p-value is then 0.0805162...
  const std::vector<double> x{-2, -1, 0, 1, 2, -2, -1, 0, 1, 2};
  const std::vector<double> e{1, -1, 1, -1, 0, -1, 1, -1, 1, 0};
  std::vector<double> y(10);
  for (std::size_t i = 0; i < 10; ++i) y[i] = x[i] + e[i];
  const double c = linear_regression(x, y).t_stat / 2.0;
  for (std::size_t i = 0; i < 10; ++i) y[i] = x[i] + c * e[i];
  const auto f = linear_regression(x, y);
  EXPECT_NEAR(f.slope, 1.0, 1e-12);
  EXPECT_NEAR(f.t_stat, 2.0, 1e-9);
  EXPECT_NEAR(f.p_value, 0.08051623795726257, 1e-9);
}

TEST(Regression, Errors) {
  const std::vector<double> x{1, 1, 1}, y{1, 2, 3};
  EXPECT_THROW(linear_regression(x, y), NumericalError);
  const std::vector<double> x2{1, 2}, y2{1, 2};
  EXPECT_THROW(linear_regression(x2, y2), NumericalError);
}

TEST(DistanceMatrixType, Validation) {
  Eigen::MatrixXd d(2, 2);
  d << 0, 1, 2, 0;
  EXPECT_THROW(DistanceMatrix{d}, NumericalError);
  d << 0, -1, -1, 0;
  EXPECT_THROW(DistanceMatrix{d}, NumericalError);
  d << 1, 1, 1, 0;
  EXPECT_THROW(DistanceMatrix{d}, NumericalError);
  d << 0, 1, 1, 0;
  EXPECT_NO_THROW(DistanceMatrix{d});
}
