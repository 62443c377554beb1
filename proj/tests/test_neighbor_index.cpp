#include "trustagg/error.hpp"
#include "trustagg/kdtree.hpp"
#include "trustagg/neighbor_index.hpp"
#include "trustagg/random.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace trustagg;

namespace {

Dataset one_dim(std::vector<double> xs, std::vector<int> ys) {
  FeatureMatrix x(static_cast<Eigen::Index>(xs.size()), 1);
  std::vector<SampleId> ids(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = xs[i];
    ids[i] = static_cast<SampleId>(i);
  }
  const int c = *std::max_element(ys.begin(), ys.end()) + 1;
  return Dataset(x, std::move(ys), c, ids);
}

std::vector<Neighbor> brute_force(const FeatureMatrix& pts, const std::vector<SampleId>& ids,
                                  std::span<const double> q, std::size_t k, std::optional<SampleId> exclude) {
  std::vector<std::pair<double, SampleId>> all;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    if (exclude && ids[static_cast<std::size_t>(i)] == *exclude) continue;
    double d2 = 0.0;
    for (Eigen::Index j = 0; j < pts.cols(); ++j) d2 += (q[static_cast<std::size_t>(j)] - pts(i, j)) * (q[static_cast<std::size_t>(j)] - pts(i, j));
    all.emplace_back(d2, ids[static_cast<std::size_t>(i)]);
  }
  std::sort(all.begin(), all.end());
  std::vector<Neighbor> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back({all[i].second, std::sqrt(all[i].first)});
  return out;
}

}  // namespace

TEST(KdTree, MatchesBruteForce) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 500)(rng);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    FeatureMatrix pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    // Coarse grid values make exact distance ties common.
    const bool coarse = trial % 2 == 0;
    for (Eigen::Index i = 0; i < pts.size(); ++i) {
      pts.data()[i] = coarse ? std::round(u(rng) * 3) : u(rng);
    }
    std::vector<SampleId> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<SampleId>(n - i) * 3;  // non-monotone ids
    const KdTree tree(pts, ids, 4);
    for (int q = 0; q < 40; ++q) {
      std::vector<double> x(d);
      for (auto& v : x) v = coarse ? std::round(u(rng) * 3) : u(rng);
      const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
      std::optional<SampleId> exclude;
      if (q % 3 == 0) exclude = ids[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)];
      const auto got = tree.knn(x, k, exclude);
      const auto want = brute_force(pts, ids, x, k, exclude);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].id, want[i].id) << "trial " << trial << " query " << q << " rank " << i;
        EXPECT_EQ(got[i].distance, want[i].distance);
      }
    }
  }
}

TEST(ClassIndex, BuildSizes) {
  const Dataset ds = one_dim({0, 1, 2, 3, 4, 10, 11, 12, 13, 14}, {0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
  const ClassIndex idx = ClassIndex::build(ds, {}, 3);
  EXPECT_EQ(idx.num_classes(), 2);
  EXPECT_EQ(idx.class_size(0), 5u);
  EXPECT_EQ(idx.class_size(1), 5u);
  EXPECT_EQ(idx.size(), 10u);
}

TEST(ClassIndex, EmptyClassAndBadK) {
  FeatureMatrix x(2, 1);
  x << 0, 1;
  const std::vector<int> y = {0, 0};
  const std::vector<SampleId> ids = {0, 1};
  EXPECT_THROW(ClassIndex::build(x, y, ids, 2, {}, 1), DataError);
  const Dataset ds = one_dim({0, 1}, {0, 1});
  EXPECT_THROW(ClassIndex::build(ds, {}, 0), ConfigError);
}

TEST(ClassIndex, RebuildGivesSameResults) {
  const Dataset ds = make_blobs(300, random_centers(3, 4, 3.0, 1), 1.0, 2);
  const ClassIndex a = ClassIndex::build(ds, {}, 5);
  const ClassIndex b = ClassIndex::build(ds, {}, 5);
  Rng rng(1);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(4);
    for (auto& v : x) v = g(rng);
    EXPECT_EQ(a.neighborhood_vector(x), b.neighborhood_vector(x));
  }
}

TEST(KnnQuery, OneDimensionalExample) {
  const Dataset ds = one_dim({0, 1, 3, 5}, {0, 0, 0, 1});
  const ClassIndex idx = ClassIndex::build(ds, {}, 2);
  const std::vector<double> q = {0.9};
  const auto nn = idx.knn_query(q, 0);
  ASSERT_EQ(nn.size(), 2u);
  EXPECT_EQ(nn[0].id, 1);
  EXPECT_NEAR(nn[0].distance, 0.1, 1e-15);
  EXPECT_EQ(nn[1].id, 0);
  EXPECT_NEAR(nn[1].distance, 0.9, 1e-15);
}

TEST(KnnQuery, ExclusionAndTies) {
  const Dataset ds = one_dim({2, 0, 4, 9}, {0, 0, 0, 1});
  const ClassIndex idx = ClassIndex::build(ds, {}, 3);
  const std::vector<double> q = {2.0};
  const auto self = idx.knn_query(q, 0, SampleId{0});
  for (const auto& n : self) EXPECT_NE(n.id, 0);
  // Points 0 and 4 are both at distance 2; the lower id comes first.
  ASSERT_EQ(self.size(), 2u);
  EXPECT_EQ(self[0].id, 1);
  EXPECT_EQ(self[1].id, 2);
}

TEST(SimilarityVector, KernelValuesAndPadding) {
  const Dataset ds = one_dim({0, std::log(2.0), 7}, {0, 0, 1});
  const ClassIndex idx = ClassIndex::build(ds, {}, 3);
  const std::vector<double> q = {0.0};
  const Eigen::VectorXd s0 = idx.similarity_vector(q, 0);
  EXPECT_DOUBLE_EQ(s0(0), 1.0);
  EXPECT_NEAR(s0(1), 0.5, 1e-15);
  EXPECT_EQ(s0(2), 0.0);
  const Eigen::VectorXd s1 = idx.similarity_vector(q, 1);
  EXPECT_NEAR(s1(0), std::exp(-7.0), 1e-18);
  EXPECT_EQ(s1(1), 0.0);
  EXPECT_EQ(s1(2), 0.0);
}

TEST(NeighborhoodVector, ClassMajorLayout) {
  // Class 0 at distances 0 and ln 2, class 1 at distances -ln 0.2 and -ln 0.1.
  const Dataset ds = one_dim({0, std::log(2.0), -std::log(0.2), -std::log(0.1)}, {0, 0, 1, 1});
  const ClassIndex idx = ClassIndex::build(ds, {}, 2);
  const std::vector<double> q = {0.0};
  const Eigen::VectorXd h = idx.neighborhood_vector(q);
  ASSERT_EQ(h.size(), 4);
  EXPECT_NEAR(h(0), 1.0, 1e-15);
  EXPECT_NEAR(h(1), 0.5, 1e-15);
  EXPECT_NEAR(h(2), 0.2, 1e-15);
  EXPECT_NEAR(h(3), 0.1, 1e-15);
}

TEST(NeighborhoodVector, FarAwayDecaysToZero) {
  const Dataset ds = one_dim({0, 1, 2, 3}, {0, 0, 1, 1});
  const ClassIndex idx = ClassIndex::build(ds, {}, 2);
  const std::vector<double> q = {1e4};
  EXPECT_LT(idx.neighborhood_vector(q).maxCoeff(), 1e-300);
}

TEST(NeighborhoodVector, PropertiesOnRandomData) {
  const Dataset ds = make_blobs(200, random_centers(3, 3, 2.0, 4), 1.0, 5);
  const ClassIndex idx = ClassIndex::build(ds, {}, 4);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Eigen::VectorXd h = idx.neighborhood_vector(ds.row(i), ds.id(i));
    for (int c = 0; c < 3; ++c) {
      for (int k = 0; k < 4; ++k) {
        const double v = h(c * 4 + k);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        if (k > 0) EXPECT_LE(v, h(c * 4 + k - 1));
      }
    }
    // No duplicates in continuous blobs, so leaving self out drops the top similarity below 1.
    EXPECT_LT(h(ds.label(i) * 4), 1.0);
    EXPECT_DOUBLE_EQ(idx.neighborhood_vector(ds.row(i))(ds.label(i) * 4), 1.0);
  }
}
