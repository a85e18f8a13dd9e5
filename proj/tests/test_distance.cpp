#include <gtest/gtest.h>

#include <random>

#include "bioprovince/distance.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace bioprovince;

namespace {

double dist(const std::vector<double>& p, const std::vector<double>& q) {
  return aitchison_distance(std::span<const double>(p), std::span<const double>(q));
}

}  // namespace

TEST(Aitchison, IdentityAndKnownValue) {
  const std::vector<double> u{1.0 / 3, 1.0 / 3, 1.0 / 3}, p{0.2, 0.3, 0.5};
  EXPECT_EQ(dist(u, u), 0.0);
  EXPECT_NEAR(dist(p, u), 0.649341583736314, 1e-12);
  EXPECT_NEAR(dist(p, u), oracle::aitchison_pairwise(p, u), 1e-12);
}

TEST(Aitchison, MatchesPairwiseLogRatioFormula) {
  std::mt19937_64 rng(1);
  for (std::size_t d : {2u, 3u, 10u, 60u}) {
    const auto p = oracle::random_composition(d, rng), q = oracle::random_composition(d, rng);
    EXPECT_NEAR(dist(p, q), oracle::aitchison_pairwise(p, q), 1e-12);
  }
}

TEST(Aitchison, PerturbationInvariance) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.1, 10);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = oracle::random_composition(7, rng), q = oracle::random_composition(7, rng);
    const double before = dist(p, q);
    double sp = 0, sq = 0;
    for (std::size_t l = 0; l < 7; ++l) {
      const double c = u(rng);
      sp += (p[l] *= c);
      sq += (q[l] *= c);
    }
    for (auto& v : p) v /= sp;
    for (auto& v : q) v /= sq;
    EXPECT_NEAR(dist(p, q), before, 1e-9);
  }
}

TEST(Aitchison, Errors) {
  const std::vector<double> a{0.5, 0.5}, b{1.0, 0.0}, c{0.2, 0.3, 0.5};
  EXPECT_THROW(dist(a, b), DataError);
  EXPECT_THROW(dist(a, c), DataError);
}

TEST(BioDistance, SmallTables) {
  RowMatrix raw(3, 3);
  raw << 0.2, 0.3, 0.5, 0.2, 0.3, 0.5, 0.1, 0.1, 0.8;
  const auto t = make_composition_table({"a", "b", "c"}, {"x", "y", "z"}, raw);
  const auto d = bio_distance_matrix(t);
  EXPECT_EQ(d(0, 1), 0.0);
  EXPECT_EQ(d(0, 0), 0.0);
  const std::vector<double> p{0.2, 0.3, 0.5}, q{0.1, 0.1, 0.8};
  EXPECT_NEAR(d(0, 2), oracle::aitchison_pairwise(p, q), 1e-12);
  EXPECT_EQ(d(0, 2), d(2, 0));
}

TEST(BioDistance, CountsAndFractionsAgree) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> u(1, 500);
  RowMatrix counts(6, 12);
  for (Eigen::Index i = 0; i < counts.size(); ++i) counts.data()[i] = u(rng);
  std::vector<std::string> s{"a", "b", "c", "d", "e", "f"}, a;
  for (int j = 0; j < 12; ++j) a.push_back("x" + std::to_string(j));
  const auto from_counts = make_composition_table(s, a, counts, {}, InputKind::counts);
  RowMatrix fractions = counts;
  for (Eigen::Index i = 0; i < 6; ++i) fractions.row(i) /= fractions.row(i).sum();
  const auto from_fractions = make_composition_table(s, a, fractions, {}, InputKind::fractions);
  EXPECT_LE((bio_distance_matrix(from_counts).matrix() - bio_distance_matrix(from_fractions).matrix())
                .cwiseAbs()
                .maxCoeff(),
            1e-9);
}

TEST(SpatialDistance, Formula) {
  std::vector<SampleMeta> m(3);
  m[0] = {"a", 0, 0, 0, 0, "C", {}};
  m[1] = {"b", 1, 0, 0, 0, "C", {}};
  m[2] = {"c", 3, 40, 0, 0, "C", {}};
  const auto d = spatial_distance_matrix(m, 30.0);
  EXPECT_DOUBLE_EQ(d(0, 1), 30.0);
  EXPECT_NEAR(d(0, 2), 98.48857801796105, 1e-12);
  m[1] = m[0];
  EXPECT_EQ(spatial_distance_matrix(m, 30.0)(0, 1), 0.0);
  EXPECT_THROW(spatial_distance_matrix(m, 0.0), ConfigError);
  EXPECT_THROW(spatial_distance_matrix(m, -1.0), ConfigError);
}

TEST(Mixture, Boundaries) {
  std::mt19937_64 rng(4);
  const auto a = testing_util::random_planar(6, rng), b = testing_util::random_planar(6, rng);
  const auto d0 = mix_distance_matrix(a, b, 0.0), d1 = mix_distance_matrix(a, b, 1.0);
  EXPECT_TRUE((d0.matrix().array() == scale_by_operator_norm(a).array()).all());
  EXPECT_TRUE((d1.matrix().array() == scale_by_operator_norm(b).array()).all());
  EXPECT_THROW(mix_distance_matrix(a, b, 1.5), ConfigError);
  EXPECT_THROW(mix_distance_matrix(a, DistanceMatrix::zeros(3), 0.5), NumericalError);
}

TEST(Mixture, HalfwayIsEntrywiseMean) {
  Eigen::MatrixXd a(3, 3), b(3, 3);
  a << 0, 1, 2, 1, 0, 1, 2, 1, 0;
  b << 0, 4, 0, 4, 0, 4, 0, 4, 0;
  // Spectral norms by hand: b has eigenvalues 0 and +-4 sqrt(2).
  const double nb = 4.0 * std::sqrt(2.0);
  const double na = oracle::spectral_norm(a);
  const auto m = mix_distance_matrix(DistanceMatrix(a), DistanceMatrix(b), 0.5);
  const Eigen::MatrixXd expected = 0.5 * (a / na + b / nb);
  EXPECT_LE((m.matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Mixture, ConvexityAndScaling) {
  std::mt19937_64 rng(5);
  const auto a = testing_util::random_planar(10, rng), b = testing_util::random_planar(10, rng);
  const auto ha = scale_by_operator_norm(a), hb = scale_by_operator_norm(b);
  EXPECT_NEAR(oracle::spectral_norm(ha), 1.0, 1e-9);
  EXPECT_NEAR(oracle::spectral_norm(hb), 1.0, 1e-9);
  for (double alpha : {0.1, 0.37, 0.9}) {
    const auto m = mix_distance_matrix(a, b, alpha).matrix();
    EXPECT_EQ(m, m.transpose());
    for (Eigen::Index i = 0; i < 10; ++i) {
      EXPECT_EQ(m(i, i), 0.0);
      for (Eigen::Index j = 0; j < 10; ++j) {
        EXPECT_GE(m(i, j), std::min(ha(i, j), hb(i, j)) - 1e-15);
        EXPECT_LE(m(i, j), std::max(ha(i, j), hb(i, j)) + 1e-15);
      }
    }
  }
  EXPECT_EQ(scale_by_operator_norm(DistanceMatrix::zeros(3)).cwiseAbs().maxCoeff(), 0.0);
}
