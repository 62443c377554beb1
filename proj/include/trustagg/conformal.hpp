#pragma once

#include "trustagg/aggregator.hpp"
#include "trustagg/classifiers.hpp"
#include "trustagg/dataset.hpp"
#include "trustagg/neighbor_index.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace trustagg {

/// Signed reliability of a sample's label: +t_y when the classifier agrees
/// with the label, -t_y otherwise.
struct ReliabilityScore {
  SampleId id = 0;
  int label = 0;
  int predicted = 0;
  double r = 0.0;
};

/// (2 * [predicted == label] - 1) * t(label).
double reliability(const Eigen::VectorXd& trust, int predicted, int label);

/// One score per row of ds, in row order. With leave_one_out each sample's id
/// is excluded from its own neighbor queries; use it whenever ds shares ids
/// with the index's training split.
std::vector<ReliabilityScore> reliability_scores(const AggregatorParams& params, const ClassIndex& index,
                                                 const BaseClassifier& clf, const Dataset& ds, bool leave_one_out,
                                                 std::size_t threads = 1);

struct ConformalConfig {
  double alpha = 0.1;
  /// Estimated mislabeling rate p in [0, 1).
  double noise_rate = 0.0;
};

/// Throws ConfigError unless 1/(N+1) < alpha < 1 and 0 <= p < 1.
void validate(const ConformalConfig& cfg, std::size_t n);

/// B = ceil((N+1)(1-alpha) + alpha N p). Throws ConfigError when B > N,
/// which p > 0 can cause even inside the alpha range.
std::size_t conformal_rank(std::size_t n, const ConformalConfig& cfg);

struct DetectionResult {
  double threshold = 0.0;  // tau, the B-th largest r
  std::size_t rank = 0;    // B
  ConformalConfig config;
  /// Every input score, r non-increasing with ties by ascending id.
  std::vector<ReliabilityScore> sorted;
  /// Scores with r <= tau, in the order of `sorted`.
  std::vector<ReliabilityScore> flagged;

  /// p = 0 reduces the rank to the plain conformal one.
  bool standard_conformal() const noexcept { return config.noise_rate == 0.0; }
};

DetectionResult detect_mislabels(std::span<const ReliabilityScore> scores, const ConformalConfig& cfg);

/// `id,label,predicted,reliability,flagged` in input order.
void write_detection_csv(std::span<const ReliabilityScore> scores, const DetectionResult& result,
                         const std::filesystem::path& path);

/// `threshold,rank,alpha,noise_rate,mode,n,flagged`, one row.
void write_detection_summary(const DetectionResult& result, const std::filesystem::path& path);

/// Mislabeling rate estimated from a manually audited subset.
double estimate_noise_rate(std::size_t audited, std::size_t mislabeled);

// ---------------------------------------------------------------- coverage harness

struct CoverageConfig {
  std::size_t n_calibration = 2000;
  std::size_t n_test = 2000;
  /// Samples used to fit the classifier, index and aggregator.
  std::size_t n_fit = 1000;
  double noise_rate = 0.05;
  /// p handed to the rank; normally the true noise rate.
  double assumed_noise_rate = 0.05;
  double alpha = 0.1;
  int runs = 5;
  std::uint64_t seed = 0;
  int num_classes = 3;
  std::size_t dim = 2;
  double spread = 3.0;
  double stddev = 1.0;
  int k = ClassIndex::kDefaultK;
  std::size_t threads = 1;
};

struct CoverageResult {
  /// Fraction of fresh correctly-labeled test points with r <= tau, per run.
  std::vector<double> rates;
  std::vector<std::size_t> ranks;
  double mean_rate = 0.0;
  /// Binomial standard error of the pooled rate.
  double standard_error = 0.0;
  /// alpha + 2 sqrt(alpha (1 - alpha) / n_test).
  double bound = 0.0;
};

/// Per run: draws blobs, fits the pipeline on a noisy fit set, sets tau on a
/// noisy calibration set and counts flags among fresh clean test points.
CoverageResult coverage_harness(const CoverageConfig& cfg);

}  // namespace trustagg
