#include "trustagg/baselines.hpp"

#include "trustagg/error.hpp"
#include "trustagg/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace trustagg {

double confidence_score(const ProbVector& p) { return p.values().maxCoeff(); }

// ---------------------------------------------------------------- temperature scaling

namespace {

Eigen::VectorXd log_probs(const ProbVector& p) { return p.values().cwiseMax(kLogEps).array().log(); }

}  // namespace

Eigen::VectorXd TemperatureModel::rescale(const ProbVector& p) const {
  return softmax(log_probs(p) / temperature);
}

double TemperatureModel::score(const ProbVector& p) const { return rescale(p).maxCoeff(); }

double temperature_nll(double temperature, std::span<const ProbVector> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw DataError("temperature_nll: probs/labels size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const Eigen::VectorXd z = log_probs(probs[i]) / temperature;
    const double top = z.maxCoeff();
    const double log_norm = top + std::log((z.array() - top).exp().sum());
    total += log_norm - z(labels[i]);
  }
  return total / static_cast<double>(probs.size());
}

std::vector<double> temperature_grid() {
  constexpr int kPoints = 401;
  std::vector<double> grid(kPoints);
  for (int i = 0; i < kPoints; ++i) grid[static_cast<std::size_t>(i)] = std::pow(10.0, -2.0 + 4.0 * i / (kPoints - 1));
  return grid;
}

TemperatureModel fit_temperature(std::span<const ProbVector> probs, std::span<const int> labels) {
  if (probs.empty()) throw DataError("temperature fit needs at least one sample");
  TemperatureModel best{1.0};
  double best_nll = std::numeric_limits<double>::infinity();
  for (double t : temperature_grid()) {
    const double nll = temperature_nll(t, probs, labels);
    if (nll < best_nll) {
      best_nll = nll;
      best.temperature = t;
    }
  }
  return best;
}

// ---------------------------------------------------------------- trust score

double trust_score(const ClassIndex& index, std::span<const double> x, int predicted,
                   std::optional<SampleId> exclude) {
  double d_pred = std::numeric_limits<double>::infinity();
  double d_other = std::numeric_limits<double>::infinity();
  for (int c = 0; c < index.num_classes(); ++c) {
    const auto nn = index.knn_query(x, c, exclude, 1);
    if (nn.empty()) continue;
    if (c == predicted) {
      d_pred = nn.front().distance;
    } else {
      d_other = std::min(d_other, nn.front().distance);
    }
  }
  if (!std::isfinite(d_other)) return 0.0;
  return d_other / std::max(d_pred, kDistanceFloor);
}

// ---------------------------------------------------------------- one-hop GCN

OneHopGcn OneHopGcn::build(const Dataset& train, const Dataset& queries, std::span<const ProbVector> query_probs,
                           const KernelConfig& cfg, int k) {
  return build(train.features(), train.labels(), train.ids(), train.num_classes(), queries.features(), query_probs,
               cfg, k);
}

OneHopGcn OneHopGcn::build(const FeatureMatrix& train_features, std::span<const int> train_labels,
                           std::span<const SampleId> train_ids, int num_classes, const FeatureMatrix& query_features,
                           std::span<const ProbVector> query_probs, const KernelConfig& /*cfg*/, int k) {
  if (k < 1) throw ConfigError("GCN needs K >= 1");
  const auto n_train = static_cast<std::size_t>(train_features.rows());
  const auto n_query = static_cast<std::size_t>(query_features.rows());
  if (train_labels.size() != n_train || train_ids.size() != n_train) throw DataError("GCN: train size mismatch");
  if (query_probs.size() != n_query) throw DataError("GCN: query probs size mismatch");
  if (train_features.cols() != query_features.cols()) throw DataError("GCN: feature dimension mismatch");

  OneHopGcn g;
  g.num_classes_ = num_classes;
  g.num_train_ = n_train;
  g.num_queries_ = n_query;
  const Eigen::Index c = num_classes;
  const Eigen::Index n = static_cast<Eigen::Index>(n_train + n_query);

  g.z_ = Eigen::MatrixXd::Zero(2 * c, n);
  for (std::size_t j = 0; j < n_train; ++j) g.z_(train_labels[j], static_cast<Eigen::Index>(j)) = 1.0;
  for (std::size_t i = 0; i < n_query; ++i) {
    if (query_probs[i].size() != num_classes) throw DataError("GCN: probability vector length mismatch");
    g.z_.block(c, static_cast<Eigen::Index>(n_train + i), c, 1) = query_probs[i].values();
  }

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t j = 0; j < n_train; ++j) by_class[static_cast<std::size_t>(train_labels[j])].push_back(j);

  std::vector<Eigen::Triplet<double>> edges;
  struct Cand {
    double d2;
    SampleId id;
    std::size_t row;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < n_query; ++i) {
    for (const auto& members : by_class) {
      cands.clear();
      for (std::size_t j : members) {
        double d2 = 0.0;
        for (Eigen::Index d = 0; d < train_features.cols(); ++d) {
          const double diff = query_features(static_cast<Eigen::Index>(i), d) - train_features(static_cast<Eigen::Index>(j), d);
          d2 += diff * diff;
        }
        cands.push_back({d2, train_ids[j], j});
      }
      const std::size_t take = std::min(cands.size(), static_cast<std::size_t>(k));
      std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end(),
                        [](const Cand& a, const Cand& b) { return a.d2 < b.d2 || (a.d2 == b.d2 && a.id < b.id); });
      for (std::size_t m = 0; m < take; ++m) {
        const double w = laplacian_kernel(std::sqrt(cands[m].d2)) / static_cast<double>(k);
        const auto train_node = static_cast<Eigen::Index>(cands[m].row);
        const auto query_node = static_cast<Eigen::Index>(n_train + i);
        edges.emplace_back(train_node, query_node, w);
        edges.emplace_back(query_node, train_node, w);
      }
    }
  }
  g.a_.resize(n, n);
  g.a_.setFromTriplets(edges.begin(), edges.end());
  return g;
}

Eigen::MatrixXd OneHopGcn::propagate() const { return z_ + z_ * a_; }

Eigen::MatrixXd OneHopGcn::query_logits(const Eigen::MatrixXd& w_out, Activation activation) const {
  if (w_out.rows() != num_classes_ || w_out.cols() != 2 * num_classes_) throw DataError("GCN: W_out shape mismatch");
  const Eigen::MatrixXd updated = propagate();
  Eigen::MatrixXd hidden = updated.rightCols(static_cast<Eigen::Index>(num_queries_));
  if (activation == Activation::relu) hidden = hidden.cwiseMax(0.0);
  return w_out * hidden;
}

// ---------------------------------------------------------------- equivalence check

GcnCheckResult verify_gcn_equivalence(std::uint64_t seed, const GcnCheckSizes& sizes, double perturb_w_h) {
  Rng rng(seed);
  auto uniform_int = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  GcnCheckResult res;
  res.num_classes = static_cast<int>(uniform_int(2, static_cast<std::size_t>(std::max(2, sizes.max_classes))));
  res.k = static_cast<int>(uniform_int(1, static_cast<std::size_t>(std::max(1, sizes.max_k))));
  res.dim = uniform_int(1, std::max<std::size_t>(1, sizes.max_dim));
  const auto classes = static_cast<std::size_t>(res.num_classes);
  res.num_train = uniform_int(classes, std::max(classes, sizes.max_train));
  res.num_val = uniform_int(1, std::max<std::size_t>(1, sizes.max_val));

  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_points = [&](std::size_t n) {
    FeatureMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(res.dim));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = gauss(rng);
    }
    return x;
  };
  const FeatureMatrix train_x = random_points(res.num_train);
  const FeatureMatrix val_x = random_points(res.num_val);
  std::vector<int> train_y(res.num_train);
  std::vector<SampleId> train_ids(res.num_train);
  for (std::size_t i = 0; i < res.num_train; ++i) {
    // The first C rows cover every class.
    train_y[i] = i < classes ? static_cast<int>(i) : static_cast<int>(uniform_int(0, classes - 1));
    train_ids[i] = static_cast<SampleId>(i);
  }
  std::vector<ProbVector> val_p;
  for (std::size_t i = 0; i < res.num_val; ++i) {
    Eigen::VectorXd logits(res.num_classes);
    for (int c = 0; c < res.num_classes; ++c) logits(c) = 2.0 * gauss(rng);
    val_p.push_back(ProbVector::from_logits(logits));
  }

  const KernelConfig cfg;
  const ClassIndex index = ClassIndex::build(train_x, train_y, train_ids, res.num_classes, cfg, res.k);
  AggregatorParams params = init_params(res.num_classes, res.k, InitMode::gcn_warm_start);
  const OneHopGcn gcn = OneHopGcn::build(train_x, train_y, train_ids, res.num_classes, val_x, val_p, cfg, res.k);
  const Eigen::MatrixXd gcn_logits = gcn.query_logits(params.w_out, params.activation);

  params.w_h(0, 0) += perturb_w_h;
  for (std::size_t i = 0; i < res.num_val; ++i) {
    const std::span<const double> row(val_x.data() + i * res.dim, res.dim);
    const Eigen::VectorXd agg = forward_pass(params, index.neighborhood_vector(row), val_p[i].values()).logits;
    const double diff = (agg - gcn_logits.col(static_cast<Eigen::Index>(i))).cwiseAbs().maxCoeff();
    res.max_abs_difference = std::max(res.max_abs_difference, diff);
  }
  return res;
}

}  // namespace trustagg
