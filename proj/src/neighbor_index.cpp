#include "trustagg/neighbor_index.hpp"

#include "trustagg/error.hpp"

namespace trustagg {

ClassIndex ClassIndex::build(const Dataset& train, const KernelConfig& cfg, int k) {
  return build(train.features(), train.labels(), train.ids(), train.num_classes(), cfg, k);
}

ClassIndex ClassIndex::build(const FeatureMatrix& features, std::span<const int> labels,
                             std::span<const SampleId> ids, int num_classes, const KernelConfig& cfg, int k) {
  if (k < 1) throw ConfigError("K must be >= 1, got " + std::to_string(k));
  if (num_classes < 1) throw ConfigError("index needs at least one class");
  if (labels.size() != static_cast<std::size_t>(features.rows()) || ids.size() != labels.size()) {
    throw DataError("index build: features/labels/ids size mismatch");
  }

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw DataError("index build: label out of range");
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }

  ClassIndex index;
  index.cfg_ = cfg;
  index.k_ = k;
  index.dim_ = static_cast<std::size_t>(features.cols());
  index.trees_.reserve(members.size());
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c].empty()) throw DataError("index build: class " + std::to_string(c) + " has no training samples");
    FeatureMatrix pts(static_cast<Eigen::Index>(members[c].size()), features.cols());
    std::vector<SampleId> class_ids;
    class_ids.reserve(members[c].size());
    for (std::size_t m = 0; m < members[c].size(); ++m) {
      // Identity transform: f(x) = x.
      pts.row(static_cast<Eigen::Index>(m)) = features.row(static_cast<Eigen::Index>(members[c][m]));
      class_ids.push_back(ids[members[c][m]]);
      index.label_of_.emplace(ids[members[c][m]], static_cast<int>(c));
    }
    index.trees_.emplace_back(std::move(pts), std::move(class_ids));
  }
  return index;
}

std::vector<Neighbor> ClassIndex::knn_query(std::span<const double> x, int c, std::optional<SampleId> exclude,
                                            std::optional<int> limit) const {
  if (c < 0 || c >= num_classes()) throw DataError("knn_query: class " + std::to_string(c) + " out of range");
  const int k = limit.value_or(k_);
  return trees_[static_cast<std::size_t>(c)].knn(x, static_cast<std::size_t>(std::max(k, 0)), exclude);
}

Eigen::VectorXd ClassIndex::similarity_vector(std::span<const double> x, int c,
                                              std::optional<SampleId> exclude) const {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(k_);
  const auto nbrs = knn_query(x, c, exclude);
  for (std::size_t j = 0; j < nbrs.size(); ++j) s(static_cast<Eigen::Index>(j)) = laplacian_kernel(nbrs[j].distance);
  return s;
}

Eigen::VectorXd ClassIndex::neighborhood_vector(std::span<const double> x, std::optional<SampleId> exclude) const {
  Eigen::VectorXd h(static_cast<Eigen::Index>(num_classes()) * k_);
  for (int c = 0; c < num_classes(); ++c) h.segment(static_cast<Eigen::Index>(c) * k_, k_) = similarity_vector(x, c, exclude);
  return h;
}

}  // namespace trustagg
