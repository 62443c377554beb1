#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace trustagg {

using SampleId = std::int64_t;
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Column layout of the source file, kept so datasets re-serialize with the
/// same column order they were read with.
struct ColumnLayout {
  std::vector<std::string> feature_names;
  std::string label_name = "label";
  std::size_t label_position = 0;  // index among all columns
};

/// Labeled tabular data. Immutable once constructed; the constructor enforces
///  - labels in [0, C) with every class present,
///  - finite features,
///  - unique sample ids.
class Dataset {
 public:
  Dataset(FeatureMatrix features, std::vector<int> labels, int num_classes,
          std::vector<SampleId> ids, ColumnLayout layout = {});

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(features_.cols()); }
  int num_classes() const noexcept { return num_classes_; }

  const FeatureMatrix& features() const noexcept { return features_; }
  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * dim(), dim()};
  }
  const std::vector<int>& labels() const noexcept { return labels_; }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<SampleId>& ids() const noexcept { return ids_; }
  SampleId id(std::size_t i) const { return ids_[i]; }
  const ColumnLayout& layout() const noexcept { return layout_; }

  /// Rows in the given order. The result must still contain every class.
  Dataset subset(std::span<const std::size_t> rows) const;
  /// Same samples with replaced features (same shape).
  Dataset with_features(FeatureMatrix features) const;
  /// Same samples with replaced labels.
  Dataset with_labels(std::vector<int> labels) const;

  std::vector<std::size_t> class_counts() const;

 private:
  FeatureMatrix features_;
  std::vector<int> labels_;
  int num_classes_;
  std::vector<SampleId> ids_;
  ColumnLayout layout_;
};

/// Reads a headed numeric CSV. C is 1 + max(label); ids are 0-based data-row
/// indices. Throws CsvError with the offending row/column.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column = "label");

/// Writes the dataset back with the column order it was loaded with.
void write_csv(const Dataset& ds, const std::filesystem::path& path);

struct SplitSpec {
  double train_frac = 0.4;
  double val_frac = 0.1;
  double test_frac = 0.5;
  std::uint64_t seed = 0;
};

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Stratified, seeded partition. Within each split rows keep their original
/// relative order.
Splits split(const Dataset& ds, const SplitSpec& spec);

/// Per-split row indices into ds, the primitive behind split().
std::vector<std::vector<std::size_t>> split_indices(const Dataset& ds, const SplitSpec& spec);

/// Feature standardization fitted on one split and applied to any other.
/// Uses the population standard deviation with a floor for constant columns.
class Standardizer {
 public:
  static constexpr double kStdFloor = 1e-12;

  static Standardizer fit(const Dataset& train);

  Dataset apply(const Dataset& ds) const;
  Dataset invert(const Dataset& ds) const;

  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::VectorXd& stddev() const noexcept { return stddev_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd stddev_;
};

/// Two interleaving half circles; class 0 is the upper arc of the unit
/// circle, class 1 the lower arc shifted by (1, -0.5).
Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed);

/// Isotropic Gaussian blobs, one per row of `centers`; classes assigned
/// round-robin so counts differ by at most one.
Dataset make_blobs(std::size_t n, const Eigen::MatrixXd& centers, double stddev,
                   std::uint64_t seed);

/// Random blob centers drawn uniformly from [-spread, spread]^dim.
Eigen::MatrixXd random_centers(int num_classes, std::size_t dim, double spread,
                               std::uint64_t seed);

struct NoisyLabels {
  Dataset data;              // same samples, corrupted labels
  std::vector<bool> flipped;  // flipped[i]: row i carries a wrong label
};

/// Relabels exactly round(rate * N) rows, each to a uniformly chosen
/// different class.
NoisyLabels inject_label_noise(const Dataset& ds, double rate, std::uint64_t seed);

}  // namespace trustagg
