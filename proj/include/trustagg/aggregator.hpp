#pragma once

#include "trustagg/classifiers.hpp"
#include "trustagg/dataset.hpp"
#include "trustagg/neighbor_index.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trustagg {

enum class Activation { relu, identity };
enum class Variant { full, neigh_only, prob_only };
enum class InitMode { gcn_warm_start, random };

std::string to_string(Activation a);
std::string to_string(Variant v);
Activation parse_activation(const std::string& s);
Variant parse_variant(const std::string& s);

/// Learnable state of the aggregator
///   t = softmax(W_out * sigma([W_h h | W_p p]))
/// with W_h: C x CK, W_p: C x C, W_out: C x 2C.
struct AggregatorParams {
  int num_classes = 0;
  int k = 0;
  Eigen::MatrixXd w_h;
  Eigen::MatrixXd w_p;
  Eigen::MatrixXd w_out;
  Activation activation = Activation::relu;
  /// Ablations mask one input branch. The masked weight matrix is also held
  /// at zero, so a serialized ablation model scores identically as `full`.
  Variant variant = Variant::full;
};

/// Warm start: W_h = (1/K) (I_C kron 1_K^T), W_p = I_C, W_out = [I_C | I_C],
/// the configuration under which the model reduces to a one-hop GCN.
/// Random: Glorot uniform with the given seed.
AggregatorParams init_params(int num_classes, int k, InitMode mode, Variant variant = Variant::full,
                             std::uint64_t seed = 0);

struct ForwardPass {
  Eigen::VectorXd pre_activation;  // [W_h h | W_p p], length 2C
  Eigen::VectorXd hidden;          // sigma(pre_activation)
  Eigen::VectorXd logits;          // W_out hidden, length C
  Eigen::VectorXd trust;           // softmax(logits)
};

/// Throws NumericError if any intermediate is non-finite.
ForwardPass forward_pass(const AggregatorParams& params, const Eigen::VectorXd& h, const Eigen::VectorXd& p);
Eigen::VectorXd forward(const AggregatorParams& params, const Eigen::VectorXd& h, const Eigen::VectorXd& p);

/// Clamp inside the log of the per-sample loss.
inline constexpr double kLogEps = 1e-12;

/// Per-sample loss -(1/C) log t_y with t_y clamped to kLogEps.
double loss(const Eigen::VectorXd& trust, int label);

struct ParamGradients {
  Eigen::MatrixXd w_h;
  Eigen::MatrixXd w_p;
  Eigen::MatrixXd w_out;
};

/// Exact gradient of loss(forward(params, h, p), label). The ReLU
/// sub-gradient at 0 is taken as 0.
ParamGradients gradients(const AggregatorParams& params, const Eigen::VectorXd& h, const Eigen::VectorXd& p,
                         int label);

/// Inputs for a batch of samples, one row each.
struct FeatureBatch {
  Eigen::MatrixXd h;  // N x CK
  Eigen::MatrixXd p;  // N x C
  std::vector<int> labels;
  std::vector<int> predicted;
  std::vector<SampleId> ids;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Builds h and p for every row of ds. With leave_one_out each sample's own
/// id is excluded from its neighbor queries.
FeatureBatch compute_features(const ClassIndex& index, const BaseClassifier& clf, const Dataset& ds,
                              bool leave_one_out, std::size_t threads = 1);

double mean_loss(const AggregatorParams& params, const FeatureBatch& batch);

struct TrainConfig {
  int epochs = 300;
  double learning_rate = 0.05;
  int batch_size = 1;
  std::uint64_t seed = 0;
  InitMode init = InitMode::gcn_warm_start;
  Variant variant = Variant::full;
  /// When false W_h and W_p stay at their initial values and only W_out is
  /// learned (the one-hop GCN baseline).
  bool train_input_maps = true;
};

struct TrainResult {
  AggregatorParams params;
  /// loss_trace[0] is the mean loss before training, loss_trace[e] after epoch e.
  std::vector<double> loss_trace;
};

/// Mini-batch gradient descent on the mean loss over `batch`.
TrainResult train_on_features(const FeatureBatch& batch, int k, const TrainConfig& cfg);

/// Trains on the validation split; the index must be built on a disjoint
/// training split.
TrainResult train(const ClassIndex& index, const BaseClassifier& clf, const Dataset& val, const TrainConfig& cfg,
                  std::size_t threads = 1);

struct ScoredPrediction {
  double trust = 0.0;  // t at the predicted class
  int predicted = 0;
  Eigen::VectorXd t;
};

ScoredPrediction score(const AggregatorParams& params, const ClassIndex& index, const BaseClassifier& clf,
                       std::span<const double> x, SampleId id, std::optional<SampleId> exclude = std::nullopt);

/// Pearson correlation between per-class diagonal-block means of W_h and the
/// diagonal of W_p; nullopt when either has zero variance.
std::optional<double> complementarity_correlation(const AggregatorParams& params);

/// Text model format: a `C K activation` header line, then W_h, W_p and W_out
/// row by row at 17 significant digits.
std::string serialize_model(const AggregatorParams& params);
AggregatorParams parse_model(const std::string& text);
void save_model(const AggregatorParams& params, const std::filesystem::path& path);
AggregatorParams load_model(const std::filesystem::path& path);

}  // namespace trustagg
