#pragma once

#include "trustagg/dataset.hpp"
#include "trustagg/kdtree.hpp"

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace trustagg {

/// Feature transform applied before distances. Only the identity is
/// provided; learned embeddings would slot in here.
enum class Transform { identity };

/// Laplacian kernel exp(-||f(x) - f(z)||_2) under a Euclidean metric.
struct KernelConfig {
  Transform transform = Transform::identity;
};

inline double laplacian_kernel(double distance) { return std::exp(-distance); }

/// One exact KD-tree per class over the training split, plus the
/// similarity features derived from them.
class ClassIndex {
 public:
  static constexpr int kDefaultK = 5;

  static ClassIndex build(const Dataset& train, const KernelConfig& cfg, int k);
  /// Raw form; used directly to exercise the empty-class error.
  static ClassIndex build(const FeatureMatrix& features, std::span<const int> labels,
                          std::span<const SampleId> ids, int num_classes, const KernelConfig& cfg, int k);

  int num_classes() const noexcept { return static_cast<int>(trees_.size()); }
  int k() const noexcept { return k_; }
  std::size_t dim() const noexcept { return dim_; }
  const KernelConfig& kernel() const noexcept { return cfg_; }
  std::size_t class_size(int c) const { return trees_[static_cast<std::size_t>(c)].size(); }
  std::size_t size() const noexcept { return label_of_.size(); }
  bool contains(SampleId id) const { return label_of_.count(id) != 0; }

  /// Exact neighbors of x within class c, ascending (distance, id); at most
  /// `limit` results (default K).
  std::vector<Neighbor> knn_query(std::span<const double> x, int c, std::optional<SampleId> exclude = std::nullopt,
                                  std::optional<int> limit = std::nullopt) const;

  /// Length-K similarities to class c, nearest first, zero-padded.
  Eigen::VectorXd similarity_vector(std::span<const double> x, int c,
                                    std::optional<SampleId> exclude = std::nullopt) const;

  /// Class-major concatenation [s_0 | s_1 | ... | s_{C-1}], length C*K.
  Eigen::VectorXd neighborhood_vector(std::span<const double> x,
                                      std::optional<SampleId> exclude = std::nullopt) const;

 private:
  std::vector<KdTree> trees_;
  std::unordered_map<SampleId, int> label_of_;
  KernelConfig cfg_;
  int k_ = kDefaultK;
  std::size_t dim_ = 0;
};

}  // namespace trustagg
