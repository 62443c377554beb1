#include "trustagg/baselines.hpp"
#include "trustagg/random.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace trustagg;

namespace {

ProbVector pv(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x(i++) = d;
  return ProbVector::from_output(x);
}

Dataset one_dim(std::vector<double> xs, std::vector<int> ys, int c) {
  FeatureMatrix x(static_cast<Eigen::Index>(xs.size()), 1);
  std::vector<SampleId> ids(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = xs[i];
    ids[i] = static_cast<SampleId>(i);
  }
  return Dataset(x, std::move(ys), c, ids);
}

/// Logits and labels drawn from softmax(z / softness); the reported
/// probabilities are softmax(z).
void synthetic_calibration(double softness, std::size_t n, std::vector<ProbVector>& probs, std::vector<int>& labels) {
  Rng rng(31);
  std::normal_distribution<double> g(0.0, 2.0);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd z(3);
    for (int c = 0; c < 3; ++c) z(c) = g(rng);
    const Eigen::VectorXd truth = softmax(z / softness);
    std::discrete_distribution<int> draw({truth(0), truth(1), truth(2)});
    labels.push_back(draw(rng));
    probs.push_back(ProbVector::from_logits(z));
  }
}

}  // namespace

TEST(Confidence, MaxEntry) {
  EXPECT_DOUBLE_EQ(confidence_score(pv({0.2, 0.8})), 0.8);
  EXPECT_DOUBLE_EQ(confidence_score(pv({0.2, 0.2, 0.2, 0.2, 0.2})), 0.2);
  EXPECT_DOUBLE_EQ(confidence_score(pv({0.4, 0.6})), 0.6);
}

TEST(Temperature, GridShape) {
  const auto grid = temperature_grid();
  ASSERT_EQ(grid.size(), 401u);
  EXPECT_NEAR(grid.front(), 1e-2, 1e-16);
  EXPECT_NEAR(grid.back(), 1e2, 1e-12);
  EXPECT_NEAR(grid[200], 1.0, 1e-14);
}

TEST(Temperature, CalibratedProbsGiveUnitTemperature) {
  std::vector<ProbVector> probs;
  std::vector<int> labels;
  synthetic_calibration(1.0, 50000, probs, labels);
  const double t = fit_temperature(probs, labels).temperature;
  EXPECT_LE(std::abs(std::log10(t)), 0.01 + 1e-12) << "T = " << t;
}

TEST(Temperature, OverconfidentProbsGiveLargerTemperature) {
  std::vector<ProbVector> probs;
  std::vector<int> labels;
  synthetic_calibration(2.0, 20000, probs, labels);
  const TemperatureModel m = fit_temperature(probs, labels);
  EXPECT_GT(m.temperature, 1.0);
  // Grid oracle: direct NLL evaluation at every grid point, first minimum wins.
  double best = std::numeric_limits<double>::infinity();
  double best_t = 0.0;
  for (double t : temperature_grid()) {
    const TemperatureModel cand{t};
    double nll = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) nll -= std::log(cand.rescale(probs[i])(labels[i]));
    nll /= static_cast<double>(probs.size());
    if (nll < best - 1e-12) {
      best = nll;
      best_t = t;
    }
  }
  EXPECT_NEAR(m.temperature, best_t, 1e-12);
}

TEST(Temperature, SingleSampleAndZeros) {
  const std::vector<ProbVector> probs = {pv({0.0, 1.0})};
  const std::vector<int> labels = {1};
  const double t = fit_temperature(probs, labels).temperature;
  EXPECT_TRUE(std::isfinite(t));
  EXPECT_GT(t, 0.0);
  const std::vector<int> wrong = {0};
  EXPECT_TRUE(std::isfinite(temperature_nll(1.0, probs, wrong)));
}

TEST(Temperature, PreservesArgmax) {
  Rng rng(4);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd z(4);
    for (int c = 0; c < 4; ++c) z(c) = g(rng);
    const ProbVector p = ProbVector::from_logits(z);
    for (double t : {0.01, 0.3, 1.0, 7.0, 100.0}) {
      EXPECT_EQ(argmax(TemperatureModel{t}.rescale(p)), p.predicted());
    }
  }
}

TEST(TrustScore, RatioExamples) {
  // Query at 0; class 0 nearest at distance 1, class 1 at 2, class 2 at 3.
  const Dataset train = one_dim({1, -2, 3, 5}, {0, 1, 2, 0}, 3);
  const ClassIndex idx = ClassIndex::build(train, {}, 1);
  const std::vector<double> q = {0.0};
  EXPECT_DOUBLE_EQ(trust_score(idx, q, 0), 2.0);
  EXPECT_DOUBLE_EQ(trust_score(idx, q, 1), 0.5);

  const Dataset coincide = one_dim({0, 1}, {0, 1}, 2);
  const ClassIndex idx2 = ClassIndex::build(coincide, {}, 1);
  EXPECT_DOUBLE_EQ(trust_score(idx2, q, 0), 1.0 / kDistanceFloor);

  const Dataset equal = one_dim({-1, 1}, {0, 1}, 2);
  const ClassIndex idx3 = ClassIndex::build(equal, {}, 1);
  EXPECT_DOUBLE_EQ(trust_score(idx3, q, 0), 1.0);
}

TEST(TrustScore, AboveOneIffPredictedClassIsCloser) {
  const Dataset train = make_blobs(200, random_centers(3, 2, 3.0, 2), 1.0, 3);
  const ClassIndex idx = ClassIndex::build(train, {}, 5);
  Rng rng(6);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> x = {g(rng), g(rng)};
    const int pred = i % 3;
    const double d_pred = idx.knn_query(x, pred, std::nullopt, 1)[0].distance;
    double d_other = std::numeric_limits<double>::infinity();
    for (int c = 0; c < 3; ++c) {
      if (c != pred) d_other = std::min(d_other, idx.knn_query(x, c, std::nullopt, 1)[0].distance);
    }
    EXPECT_EQ(trust_score(idx, x, pred) > 1.0, d_other > d_pred);
  }
}

TEST(OneHopGcn, SingleNodeHandExample) {
  const Dataset train = one_dim({0.0, 0.0}, {0, 1}, 2);
  const Dataset query = one_dim({0.0, 1.0}, {0, 1}, 2);
  const Dataset q1 = query.subset(std::vector<std::size_t>{0, 1});
  const std::vector<ProbVector> probs = {pv({0.3, 0.7}), pv({0.5, 0.5})};
  const OneHopGcn g = OneHopGcn::build(train, q1, probs, {}, 1);
  const Eigen::MatrixXd za = g.node_features() * g.adjacency();
  const Eigen::Vector4d col = za.col(2);
  EXPECT_NEAR(col(0), 1.0, 1e-15);
  EXPECT_NEAR(col(1), 1.0, 1e-15);
  EXPECT_EQ(col(2), 0.0);
  EXPECT_EQ(col(3), 0.0);
}

TEST(OneHopGcn, AdjacencyStructure) {
  const Dataset train = make_blobs(40, random_centers(3, 2, 3.0, 1), 1.0, 2);
  const Dataset val = make_blobs(12, random_centers(3, 2, 3.0, 1), 1.0, 3);
  std::vector<ProbVector> probs;
  for (std::size_t i = 0; i < val.size(); ++i) probs.push_back(pv({0.2, 0.3, 0.5}));
  const int k = 3;
  const OneHopGcn g = OneHopGcn::build(train, val, probs, {}, k);
  const Eigen::MatrixXd a = Eigen::MatrixXd(g.adjacency());
  const auto n_tr = static_cast<Eigen::Index>(train.size());
  const auto n_q = static_cast<Eigen::Index>(val.size());
  EXPECT_EQ(a.topLeftCorner(n_tr, n_tr).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(a.bottomRightCorner(n_q, n_q).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a - a.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GE(a.minCoeff(), 0.0);
  EXPECT_LE(a.maxCoeff(), 1.0 / k);
  for (Eigen::Index q = 0; q < n_q; ++q) {
    Eigen::Index nonzeros = 0;
    for (Eigen::Index i = 0; i < n_tr; ++i) nonzeros += a(i, n_tr + q) > 0.0 ? 1 : 0;
    EXPECT_EQ(nonzeros, 3 * k);
  }
  // Node features: [y | 0] for training nodes, [0 | p] for queries.
  const Eigen::MatrixXd& z = g.node_features();
  EXPECT_EQ(z(train.label(0), 0), 1.0);
  EXPECT_EQ(z.col(0).sum(), 1.0);
  EXPECT_NEAR(z.col(n_tr).tail(3).sum(), 1.0, 1e-15);
  EXPECT_EQ(z.col(n_tr).head(3).cwiseAbs().sum(), 0.0);
}

TEST(OneHopGcn, SmallClassGivesFewerEdges) {
  const Dataset train = one_dim({0, 1, 2, 10}, {0, 0, 0, 1}, 2);
  const Dataset val = one_dim({0.5, 9}, {0, 1}, 2);
  const std::vector<ProbVector> probs = {pv({0.5, 0.5}), pv({0.5, 0.5})};
  const OneHopGcn g = OneHopGcn::build(train, val, probs, {}, 3);
  const Eigen::MatrixXd a = Eigen::MatrixXd(g.adjacency());
  // Class 1 has one member: the K-neighborhood holds 3 + 1 edges and the
  // class-1 mass is below 1.
  Eigen::Index nonzeros = 0;
  for (Eigen::Index i = 0; i < 4; ++i) nonzeros += a(i, 4) > 0.0 ? 1 : 0;
  EXPECT_EQ(nonzeros, 4);
  EXPECT_LT(a(3, 4), 1.0);
}

TEST(OneHopGcn, MatchesAggregatorWithIdentityActivation) {
  const Dataset train = make_blobs(50, random_centers(4, 3, 2.0, 8), 1.0, 9);
  const Dataset val = make_blobs(16, random_centers(4, 3, 2.0, 8), 1.0, 10);
  Rng rng(5);
  std::vector<ProbVector> probs;
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t i = 0; i < val.size(); ++i) {
    probs.push_back(ProbVector::from_logits(Eigen::Vector4d(g(rng), g(rng), g(rng), g(rng))));
  }
  const int k = 3;
  const ClassIndex idx = ClassIndex::build(train, {}, k);
  AggregatorParams params = init_params(4, k, InitMode::gcn_warm_start);
  params.activation = Activation::identity;
  const OneHopGcn gcn = OneHopGcn::build(train, val, probs, {}, k);
  const Eigen::MatrixXd logits = gcn.query_logits(params.w_out, Activation::identity);
  for (std::size_t i = 0; i < val.size(); ++i) {
    const Eigen::VectorXd agg = forward_pass(params, idx.neighborhood_vector(val.row(i)), probs[i].values()).logits;
    EXPECT_LT((agg - logits.col(static_cast<Eigen::Index>(i))).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(VerifyGcn, HundredSeedsAgree) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    EXPECT_LT(verify_gcn_equivalence(seed).max_abs_difference, 1e-9) << "seed " << seed;
  }
}

TEST(VerifyGcn, RandomSizesRespectBounds) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const GcnCheckResult r = verify_gcn_equivalence(seed);
    EXPECT_LE(r.num_train, 60u);
    EXPECT_LE(r.num_val, 20u);
    EXPECT_GE(r.num_classes, 2);
    EXPECT_LE(r.num_classes, 4);
    EXPECT_LE(r.k, 3);
    EXPECT_LE(r.dim, 5u);
  }
}

TEST(VerifyGcn, PerturbationIsDetected) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_GT(verify_gcn_equivalence(seed, {}, 0.1).max_abs_difference, 1e-3) << "seed " << seed;
  }
}

TEST(VerifyGcn, MinimalInstance) {
  GcnCheckSizes sizes;
  sizes.max_classes = 2;
  sizes.max_k = 1;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GcnCheckResult r = verify_gcn_equivalence(seed, sizes);
    EXPECT_EQ(r.num_classes, 2);
    EXPECT_EQ(r.k, 1);
    EXPECT_LT(r.max_abs_difference, 1e-9);
  }
}
