#include "trustagg/kdtree.hpp"

#include "trustagg/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace trustagg {

KdTree::KdTree(FeatureMatrix points, std::vector<SampleId> ids, std::size_t leaf_size)
    : points_(std::move(points)), ids_(std::move(ids)), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  if (static_cast<std::size_t>(points_.rows()) != ids_.size()) throw DataError("kd-tree: points/ids size mismatch");
  order_.resize(ids_.size());
  std::iota(order_.begin(), order_.end(), std::uint32_t{0});
  if (!ids_.empty()) build(0, static_cast<std::uint32_t>(ids_.size()));
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto index = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return index;

  // Split on the dimension of largest spread at the median.
  Eigen::Index best_dim = 0;
  double best_spread = -1.0;
  for (Eigen::Index d = 0; d < points_.cols(); ++d) {
    double lo = points_(order_[begin], d);
    double hi = lo;
    for (std::uint32_t k = begin + 1; k < end; ++k) {
      const double v = points_(order_[k], d);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = d;
    }
  }
  if (best_spread <= 0.0) return index;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_(a, best_dim) < points_(b, best_dim); });
  const double split = points_(order_[mid], best_dim);

  nodes_[static_cast<std::size_t>(index)].split_dim = static_cast<std::int32_t>(best_dim);
  nodes_[static_cast<std::size_t>(index)].split_value = split;
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[static_cast<std::size_t>(index)].left = left;
  nodes_[static_cast<std::size_t>(index)].right = right;
  return index;
}

std::vector<Neighbor> KdTree::knn(std::span<const double> query, std::size_t k,
                                  std::optional<SampleId> exclude) const {
  if (query.size() != dim()) {
    throw DataError("kd-tree query has dimension " + std::to_string(query.size()) + ", index has " +
                    std::to_string(dim()));
  }
  if (k == 0 || ids_.empty()) return {};

  struct Candidate {
    double d2;
    SampleId id;
    bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && id < o.id); }
  };
  std::vector<Candidate> heap;  // max-heap on (d2, id)
  heap.reserve(k + 1);

  const auto cols = points_.cols();
  auto visit_leaf = [&](const Node& node) {
    for (std::uint32_t p = node.begin; p < node.end; ++p) {
      const std::uint32_t row = order_[p];
      const SampleId id = ids_[row];
      if (exclude && *exclude == id) continue;
      double d2 = 0.0;
      for (Eigen::Index j = 0; j < cols; ++j) {
        const double diff = query[static_cast<std::size_t>(j)] - points_(row, j);
        d2 += diff * diff;
      }
      const Candidate c{d2, id};
      if (heap.size() < k) {
        heap.push_back(c);
        std::push_heap(heap.begin(), heap.end());
      } else if (c < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = c;
        std::push_heap(heap.begin(), heap.end());
      }
    }
  };

  // Iterative depth-first search; the far child is pushed with the squared
  // distance to the splitting plane as its lower bound.
  struct Pending {
    std::int32_t node;
    double bound;
  };
  std::vector<Pending> stack{{0, 0.0}};
  while (!stack.empty()) {
    const Pending top = stack.back();
    stack.pop_back();
    // Equality must still be explored: a tie in distance may carry a lower id.
    if (heap.size() == k && top.bound > heap.front().d2) continue;
    const Node& node = nodes_[static_cast<std::size_t>(top.node)];
    if (node.split_dim < 0) {
      visit_leaf(node);
      continue;
    }
    const double diff = query[static_cast<std::size_t>(node.split_dim)] - node.split_value;
    const std::int32_t near = diff < 0.0 ? node.left : node.right;
    const std::int32_t far = diff < 0.0 ? node.right : node.left;
    stack.push_back({far, std::max(top.bound, diff * diff)});
    stack.push_back({near, top.bound});
  }

  std::sort_heap(heap.begin(), heap.end());
  std::vector<Neighbor> out;
  out.reserve(heap.size());
  for (const auto& c : heap) out.push_back(Neighbor{c.id, std::sqrt(c.d2)});
  return out;
}

}  // namespace trustagg
