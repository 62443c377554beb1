#pragma once

#include "trustagg/classifiers.hpp"
#include "trustagg/dataset.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trustagg {

/// A trust score (higher = more trusted) and whether the prediction was right.
struct ScoredOutcome {
  double score = 0.0;
  bool correct = false;
};

/// Mann-Whitney AUROC with correct predictions as positives and ties counted
/// one half. nullopt when either class is absent.
std::optional<double> auroc(std::span<const ScoredOutcome> outcomes);

/// Un-interpolated average precision. With positive_is_correct the ranking is
/// by descending score and correct outcomes are positive (APC); otherwise by
/// ascending score with errors positive (APM). Equal scores keep input order.
/// nullopt when there are no positives.
std::optional<double> average_precision(std::span<const ScoredOutcome> outcomes, bool positive_is_correct);

struct MetricReport {
  std::optional<double> auc;
  std::optional<double> apc;
  std::optional<double> apm;
  double accuracy = 0.0;
  std::size_t n = 0;
  std::size_t n_correct = 0;
};

/// What a scorer sees for one test sample. The label is only there for the
/// oracle scorer used in testing.
struct ScorerInput {
  std::span<const double> x;
  SampleId id = 0;
  const ProbVector* probs = nullptr;
  int label = 0;
};

using Scorer = std::function<double(const ScorerInput&)>;

struct SampleScore {
  SampleId id = 0;
  int predicted = 0;
  int label = 0;
  double score = 0.0;

  bool correct() const noexcept { return predicted == label; }
};

/// Scores every row of `test`, in row order. Throws DataError on a
/// non-finite score.
std::vector<SampleScore> score_samples(const Scorer& scorer, const Dataset& test, const BaseClassifier& clf,
                                       std::size_t threads = 1);

MetricReport summarize(std::span<const SampleScore> samples);

MetricReport evaluate(const Scorer& scorer, const Dataset& test, const BaseClassifier& clf, std::size_t threads = 1);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population convention
};

struct AggregateReport {
  std::optional<MeanStd> auc;
  std::optional<MeanStd> apc;
  std::optional<MeanStd> apm;
  MeanStd accuracy;
  std::size_t runs = 0;
};

/// Mean and std across runs. A metric undefined in any run is undefined in
/// the aggregate.
AggregateReport aggregate(std::span<const MetricReport> reports);

MeanStd mean_std(std::span<const double> values);

/// `metric,value,std`; undefined metrics are written as NA.
void write_report_csv(const AggregateReport& report, const std::filesystem::path& path);

/// `id,predicted,label,score,correct`.
void write_scores_csv(std::span<const SampleScore> samples, const std::filesystem::path& path);

/// Value, or NA.
std::string format_metric(const std::optional<double>& v);

}  // namespace trustagg
