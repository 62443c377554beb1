#pragma once

#include "trustagg/aggregator.hpp"
#include "trustagg/classifiers.hpp"
#include "trustagg/dataset.hpp"
#include "trustagg/neighbor_index.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace trustagg {

/// Max-softmax confidence.
double confidence_score(const ProbVector& p);

// ---------------------------------------------------------------- temperature scaling

struct TemperatureModel {
  double temperature = 1.0;

  /// softmax(log p / T) with p clamped to kLogEps before the log.
  Eigen::VectorXd rescale(const ProbVector& p) const;
  /// Max entry of the rescaled vector.
  double score(const ProbVector& p) const;
};

/// Mean NLL of softmax(log p / T) at the true labels.
double temperature_nll(double temperature, std::span<const ProbVector> probs, std::span<const int> labels);

/// Grid of 401 log-spaced temperatures over [1e-2, 1e2].
std::vector<double> temperature_grid();

/// NLL minimizer over temperature_grid(); ties go to the smaller T.
TemperatureModel fit_temperature(std::span<const ProbVector> probs, std::span<const int> labels);

// ---------------------------------------------------------------- trust score

inline constexpr double kDistanceFloor = 1e-12;

/// Ratio of the nearest other-class distance to the nearest predicted-class
/// distance, with the denominator floored at kDistanceFloor.
double trust_score(const ClassIndex& index, std::span<const double> x, int predicted,
                   std::optional<SampleId> exclude = std::nullopt);

// ---------------------------------------------------------------- one-hop GCN

/// Bipartite one-hop graph between training nodes (features [y | 0]) and
/// query nodes (features [0 | p]). Column i of A's train-to-query block
/// holds K_f(x_i, n)/K for each of query i's class-wise K nearest training
/// neighbors n. The propagation is Z' = Z (I + A).
///
/// Neighbors are found by a brute-force scan here, independent of
/// ClassIndex, so the two constructions can be checked against each other.
class OneHopGcn {
 public:
  static OneHopGcn build(const FeatureMatrix& train_features, std::span<const int> train_labels,
                         std::span<const SampleId> train_ids, int num_classes, const FeatureMatrix& query_features,
                         std::span<const ProbVector> query_probs, const KernelConfig& cfg, int k);
  static OneHopGcn build(const Dataset& train, const Dataset& queries, std::span<const ProbVector> query_probs,
                         const KernelConfig& cfg, int k);

  int num_classes() const noexcept { return num_classes_; }
  std::size_t num_train() const noexcept { return num_train_; }
  std::size_t num_queries() const noexcept { return num_queries_; }

  /// 2C x (N_train + N_query).
  const Eigen::MatrixXd& node_features() const noexcept { return z_; }
  /// (N_train + N_query) square, symmetric, zero on the train-train and
  /// query-query blocks.
  const Eigen::SparseMatrix<double>& adjacency() const noexcept { return a_; }

  /// Z (I + A).
  Eigen::MatrixXd propagate() const;

  /// W_out sigma(z'_i) for every query node, one column each (C x N_query).
  Eigen::MatrixXd query_logits(const Eigen::MatrixXd& w_out, Activation activation) const;

 private:
  Eigen::MatrixXd z_;
  Eigen::SparseMatrix<double> a_;
  int num_classes_ = 0;
  std::size_t num_train_ = 0;
  std::size_t num_queries_ = 0;
};

struct GcnCheckSizes {
  std::size_t max_train = 60;
  std::size_t max_val = 20;
  int max_classes = 4;
  int max_k = 3;
  std::size_t max_dim = 5;
};

struct GcnCheckResult {
  double max_abs_difference = 0.0;
  std::size_t num_train = 0;
  std::size_t num_val = 0;
  int num_classes = 0;
  int k = 0;
  std::size_t dim = 0;
};

/// Draws a random instance from `seed`, then compares warm-start aggregator
/// logits against the one-hop GCN output on every validation node. A
/// nonzero `perturb_w_h` is added to W_h(0, 0) of the aggregator only, as a
/// negative control.
GcnCheckResult verify_gcn_equivalence(std::uint64_t seed, const GcnCheckSizes& sizes = {},
                                      double perturb_w_h = 0.0);

}  // namespace trustagg
