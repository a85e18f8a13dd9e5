#include <gtest/gtest.h>

#include <set>

#include "bioprovince/province.hpp"
#include "test_helpers.hpp"

using namespace bioprovince;

namespace {

SampleMeta sample(const std::string& id, double lat, double depth, double temp, double sal) {
  return {id, lat, depth, temp, sal, "C", {}};
}

GridSpec one_point(double lat, double depth, double temp, double sal) {
  return {{"g"}, {lat}, {depth}, {temp}, {sal}};
}

}  // namespace

TEST(Rescale, Examples) {
  const std::vector<double> s{0.0, 10.0}, g{5.0};
  const auto a = min_max_rescale(s, g);
  EXPECT_EQ(a.grid[0], 0.5);
  EXPECT_EQ(a.samples[1], 1.0);
  const std::vector<double> c{3.0, 3.0}, gc{3.0};
  EXPECT_EQ(min_max_rescale(c, gc).grid[0], 0.5);
  EXPECT_EQ(min_max_rescale(c, gc).samples[0], 0.5);
  // Grid beyond the sample range stays inside [0, 1] only with the union.
  const std::vector<double> far{20.0};
  EXPECT_EQ(min_max_rescale(s, far).grid[0], 1.0);
  EXPECT_EQ(min_max_rescale(s, far, false).grid[0], 2.0);
  const std::vector<double> bad{std::nan("")};
  EXPECT_THROW(min_max_rescale(s, bad), DataError);
}

TEST(Predict, SelfMatchWithKOne) {
  std::vector<SampleMeta> meta;
  std::vector<int> labels;
  GridSpec grid;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const double lat = -40 + 80 * u(rng), depth = 200 * u(rng), t = 30 * u(rng), s = 34 + u(rng);
    meta.push_back(sample("s" + std::to_string(i), lat, depth, t, s));
    labels.push_back(1 + i % 4);
    grid.grid_ids.push_back("g" + std::to_string(i));
    grid.latitude.push_back(lat);
    grid.depth.push_back(depth);
    grid.temperature.push_back(t);
    grid.salinity.push_back(s);
  }
  const auto m = predict(grid, meta, labels, 1, 10.0);
  EXPECT_EQ(m.memberships, labels);
  for (const auto& p : m.provenance) {
    EXPECT_EQ(p.k_prime, 1);
    EXPECT_FALSE(p.fallback_used);
    EXPECT_FALSE(p.tie_broken);
  }
}

TEST(Predict, FallbackWhenNeighborSetsAreDisjoint) {
  // Sample 0 is spatially nearest but abiotically remote; sample 1 the reverse.
  const std::vector<SampleMeta> meta{sample("a", 0.0, 0.0, 0.0, 0.0), sample("b", 30.0, 0.0, 1.0, 1.0)};
  const std::vector<int> labels{1, 2};
  const auto m = predict(one_point(1.0, 0.0, 1.0, 1.0), meta, labels, 1, 1.0);
  EXPECT_EQ(m.memberships[0], 1);
  EXPECT_TRUE(m.provenance[0].fallback_used);
  EXPECT_EQ(m.provenance[0].k_prime, 0);
}

TEST(Predict, TieGoesToNearestCandidate) {
  // Identical abiotics, so all four samples are candidates with k = 4.
  const std::vector<SampleMeta> meta{sample("a", 4.0, 0, 1, 1), sample("b", 3.0, 0, 1, 1),
                                     sample("c", 1.0, 0, 1, 1), sample("d", 2.0, 0, 1, 1)};
  const std::vector<int> labels{2, 2, 3, 3};
  const auto m = predict(one_point(0.0, 0.0, 1.0, 1.0), meta, labels, 4, 1.0);
  EXPECT_EQ(m.memberships[0], 3);
  EXPECT_TRUE(m.provenance[0].tie_broken);
  EXPECT_EQ(m.provenance[0].k_prime, 4);
}

TEST(Predict, TieTakesNearestCandidateEvenOutsideTiedLabels) {
  // Votes 1:2, 2:2, 3:1 tie; the nearest candidate carries label 3.
  const std::vector<SampleMeta> meta{sample("a", 1.0, 0, 1, 1), sample("b", 4.0, 0, 1, 1),
                                     sample("c", 2.0, 0, 1, 1), sample("d", 5.0, 0, 1, 1),
                                     sample("e", 3.0, 0, 1, 1)};
  const std::vector<int> labels{3, 1, 2, 1, 2};
  const auto m = predict(one_point(0.0, 0.0, 1.0, 1.0), meta, labels, 5, 1.0);
  EXPECT_EQ(m.memberships[0], 3);
  EXPECT_TRUE(m.provenance[0].tie_broken);
}

TEST(Predict, MajorityWins) {
  const std::vector<SampleMeta> meta{sample("a", 1.0, 0, 1, 1), sample("b", 2.0, 0, 1, 1),
                                     sample("c", 3.0, 0, 1, 1)};
  const std::vector<int> labels{1, 2, 2};
  const auto m = predict(one_point(0.0, 0.0, 1.0, 1.0), meta, labels, 3, 1.0);
  EXPECT_EQ(m.memberships[0], 2);
  EXPECT_FALSE(m.provenance[0].tie_broken);
}

TEST(Predict, KOneIsSpatialNearestOrFallback) {
  // With k = 1 the prediction is always the label of the spatially nearest
  // sample: either it is also abiotically nearest, or the fallback applies.
  const auto meta = testing_util::random_meta(40, 9);
  std::vector<int> labels(40);
  for (std::size_t i = 0; i < 40; ++i) labels[i] = 1 + static_cast<int>(i % 3);
  GridSpec grid;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int j = 0; j < 50; ++j) {
    grid.grid_ids.push_back("g" + std::to_string(j));
    grid.latitude.push_back(-60 + 120 * u(rng));
    grid.depth.push_back(500 * u(rng));
    grid.temperature.push_back(30 * u(rng));
    grid.salinity.push_back(33 + 3 * u(rng));
  }
  const double r = 7.0;
  const auto m = predict(grid, meta, labels, 1, r);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < meta.size(); ++i) {
      auto d = [&](std::size_t s) {
        return std::hypot(r * (grid.latitude[j] - meta[s].latitude), grid.depth[j] - meta[s].depth);
      };
      if (d(i) < d(best)) best = i;
    }
    EXPECT_EQ(m.memberships[j], labels[best]);
    EXPECT_EQ(m.provenance[j].k_prime == 0, m.provenance[j].fallback_used);
  }
}

TEST(Predict, LabelsComeFromSamplesAndAreDeterministic) {
  const auto meta = testing_util::random_meta(30, 4);
  std::vector<int> labels(30);
  for (std::size_t i = 0; i < 30; ++i) labels[i] = 2 + static_cast<int>(i % 2);
  GridSpec grid;
  for (int j = 0; j < 100; ++j) {
    grid.grid_ids.push_back("g" + std::to_string(j));
    grid.latitude.push_back(-50 + j);
    grid.depth.push_back(3.0 * j);
    grid.temperature.push_back(0.3 * j);
    grid.salinity.push_back(34 + 0.01 * j);
  }
  const auto a = predict(grid, meta, labels, 3, 5.0);
  const auto b = predict(grid, meta, labels, 3, 5.0);
  EXPECT_EQ(a.memberships, b.memberships);
  for (int v : a.memberships) EXPECT_TRUE(v == 2 || v == 3);
  EXPECT_EQ(a.grid_ids, grid.grid_ids);
}

TEST(Predict, Errors) {
  const std::vector<SampleMeta> meta{sample("a", 0, 0, 0, 0)};
  const std::vector<int> labels{1};
  const auto g = one_point(0, 0, 0, 0);
  EXPECT_THROW(predict(g, meta, labels, 0, 1.0), ConfigError);
  EXPECT_THROW(predict(g, meta, labels, 1, 0.0), ConfigError);
  EXPECT_THROW(predict(GridSpec{}, meta, labels, 1, 1.0), DataError);
  EXPECT_THROW(predict(g, meta, std::vector<int>{1, 2}, 1, 1.0), DataError);
  // k larger than n uses all samples
  EXPECT_EQ(predict(g, meta, labels, 5, 1.0).memberships[0], 1);
}
