#pragma once

#include "trustagg/aggregator.hpp"
#include "trustagg/baselines.hpp"
#include "trustagg/classifiers.hpp"
#include "trustagg/conformal.hpp"
#include "trustagg/dataset.hpp"
#include "trustagg/metrics.hpp"
#include "trustagg/neighbor_index.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace trustagg {

enum class ClassifierKind { logreg, mlp, external };

ClassifierKind parse_classifier_kind(const std::string& s);
std::string to_string(ClassifierKind k);

/// Everything a command needs. Trial t of a run derives all its seeds from
/// (seed, t) through derive_seed, one stream per consumer.
struct RunConfig {
  std::filesystem::path data;
  std::string label_column = "label";
  SplitSpec split;
  ClassifierKind classifier = ClassifierKind::logreg;
  std::filesystem::path probs;
  LogRegOptions logreg;
  MlpOptions mlp;
  int k = ClassIndex::kDefaultK;
  KernelConfig kernel;
  TrainConfig train;
  bool standardize = true;
  std::vector<std::string> scorers;
  std::filesystem::path out = "out";
  std::uint64_t seed = 0;
  int seeds = 1;
  std::size_t threads = 0;
  ConformalConfig conformal;
};

/// Scorer names accepted by eval, in report order. "oracle" is accepted too
/// but left out of this list.
const std::vector<std::string>& scorer_names();

/// Checks ranges and paths that do not need the data. Throws ConfigError.
void validate(const RunConfig& cfg);

/// Loads the configured CSV; a missing path is a ConfigError.
Dataset load_data(const RunConfig& cfg);

/// One seeded pass of split -> standardize -> classifier -> index.
struct Trial {
  int index = 0;
  std::optional<Standardizer> standardizer;
  Dataset train;
  Dataset val;
  Dataset test;
  BaseClassifier classifier;
  ClassIndex neighbors;
};

Trial prepare_trial(const Dataset& data, const RunConfig& cfg, int trial);

/// Training config of trial t: cfg.train with its seed replaced.
TrainConfig trial_train_config(const RunConfig& cfg, int trial);

// ---------------------------------------------------------------- commands

struct TrainOutput {
  TrainResult result;
  std::filesystem::path model_path;
  std::filesystem::path trace_path;
};

/// Trial 0 only. Writes model.txt and loss_trace.csv into cfg.out.
TrainOutput run_train(const RunConfig& cfg);

struct ScorerReport {
  std::string scorer;
  std::vector<MetricReport> runs;  // one per seed
  AggregateReport summary;
};

/// Trains whatever each scorer needs per seed and evaluates on the test
/// split. Writes metrics.csv, summary_<scorer>.csv and
/// scores_<scorer>_<trial>.csv into cfg.out.
std::vector<ScorerReport> run_eval(const RunConfig& cfg);

struct DetectOutput {
  std::vector<ReliabilityScore> scores;
  DetectionResult result;
};

/// Trial 0: fits the pipeline, then scores every sample of the dataset
/// (training samples leave-one-out) and thresholds. Writes detection.csv
/// and detection_summary.csv into cfg.out.
DetectOutput run_detect(const RunConfig& cfg);

struct VerifyGcnOutput {
  std::vector<GcnCheckResult> results;  // one per seed
  double max_difference = 0.0;
  /// First instance whose difference reaches the tolerance.
  std::optional<int> failing_instance;
};

inline constexpr double kGcnTolerance = 1e-9;

/// Instance i is drawn from derive_seed(seed, i, Stream::verify).
VerifyGcnOutput run_verify_gcn(std::uint64_t seed, int count, double perturb_w_h = 0.0,
                               const GcnCheckSizes& sizes = {});

struct SynthConfig {
  std::string kind = "moons";  // moons | blobs
  std::size_t n = 2000;
  double noise = 0.25;         // moons: coordinate noise
  int num_classes = 3;         // blobs
  std::size_t dim = 2;         // blobs
  double spread = 10.0;        // blobs
  double stddev = 1.0;         // blobs
  double label_noise = 0.0;
  std::uint64_t seed = 0;
  std::filesystem::path out = "synth.csv";
};

struct SynthOutput {
  Dataset clean;
  NoisyLabels noisy;
};

/// Writes the (possibly label-corrupted) dataset to cfg.out. With label
/// noise a `<stem>_mask.csv` of `id,clean_label,flipped` goes next to it.
SynthOutput run_synth(const SynthConfig& cfg);

}  // namespace trustagg
