#pragma once

#include "trustagg/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace trustagg {

struct Neighbor {
  SampleId id;
  double distance;
};

/// Exact Euclidean k-nearest-neighbor search over a fixed point set.
///
/// Results are ordered by (distance, id) ascending, so equidistant points
/// come back lowest id first. The tree is immutable after construction and
/// queries are safe from multiple threads.
class KdTree {
 public:
  KdTree() = default;
  KdTree(FeatureMatrix points, std::vector<SampleId> ids, std::size_t leaf_size = 8);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(points_.cols()); }
  const std::vector<SampleId>& ids() const noexcept { return ids_; }

  /// Up to k neighbors of `query`; `exclude`, when set, is never returned.
  std::vector<Neighbor> knn(std::span<const double> query, std::size_t k,
                            std::optional<SampleId> exclude = std::nullopt) const;

 private:
  struct Node {
    std::uint32_t begin = 0;  // range into order_
    std::uint32_t end = 0;
    std::int32_t split_dim = -1;  // -1 marks a leaf
    double split_value = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  FeatureMatrix points_;
  std::vector<SampleId> ids_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 8;
};

}  // namespace trustagg
