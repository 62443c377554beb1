#pragma once

#include "trustagg/dataset.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

namespace trustagg {

/// Numerically stable softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// Index of the largest entry; the lowest index wins ties.
int argmax(const Eigen::VectorXd& v);

/// A point on the probability simplex: entries in [0, 1] summing to 1
/// within 1e-6.
class ProbVector {
 public:
  static constexpr double kSimplexTol = 1e-6;

  /// Accepts a classifier output as-is when it already lies on the simplex;
  /// anything else is treated as logits and softmax-normalized.
  static ProbVector from_output(const Eigen::VectorXd& v);

  /// Always softmax-normalizes.
  static ProbVector from_logits(const Eigen::VectorXd& logits);

  /// Renormalizes a non-negative vector; throws DataError on negative
  /// entries or zero mass.
  static ProbVector from_unnormalized(const Eigen::VectorXd& v);

  static bool on_simplex(const Eigen::VectorXd& v);

  /// Empty placeholder so containers can be pre-sized.
  ProbVector() = default;

  const Eigen::VectorXd& values() const noexcept { return values_; }
  int size() const noexcept { return static_cast<int>(values_.size()); }
  double operator[](int c) const { return values_(c); }
  int predicted() const { return argmax(values_); }

 private:
  explicit ProbVector(Eigen::VectorXd v) : values_(std::move(v)) {}
  Eigen::VectorXd values_;
};

// ---------------------------------------------------------------- logistic regression

struct LogisticRegression {
  Eigen::MatrixXd weights;  // C x D
  Eigen::VectorXd bias;     // C

  Eigen::VectorXd logits(std::span<const double> x) const;
};

struct LogRegOptions {
  int max_iter = 5000;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
};

/// Full-batch gradient descent on the mean cross-entropy from zero weights.
LogisticRegression train_logreg(const Dataset& train, const LogRegOptions& opts);

/// Mean cross-entropy over (x, labels) and its gradient in `grad`.
double logreg_loss_and_grad(const LogisticRegression& model, const FeatureMatrix& x,
                            std::span<const int> labels, LogisticRegression& grad);

// ---------------------------------------------------------------- MLP

/// D -> h1 -> h2 -> C with ReLU hidden layers.
struct Mlp {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;

  Eigen::VectorXd logits(std::span<const double> x) const;
};

struct MlpOptions {
  int hidden1 = 200;
  int hidden2 = 70;
  int epochs = 200;
  double learning_rate = 0.05;
  int batch_size = 64;
  std::uint64_t seed = 0;
};

/// Glorot-uniform initialization, zero biases.
Mlp init_mlp(std::size_t dim, int num_classes, const MlpOptions& opts);

/// Mini-batch gradient descent with a seeded shuffle per epoch.
Mlp train_mlp(const Dataset& train, const MlpOptions& opts);

double mlp_loss_and_grad(const Mlp& model, const FeatureMatrix& x, std::span<const int> labels,
                         Mlp& grad);

// ---------------------------------------------------------------- external

/// Probability table produced by some other model, keyed by sample id.
struct ExternalProbs {
  int num_classes = 0;
  std::unordered_map<SampleId, ProbVector> table;
};

/// Reads `id,p0,...,p{C-1}`. Rows off the simplex are renormalized when
/// non-negative, rejected otherwise.
ExternalProbs load_external_probs(const std::filesystem::path& path, int num_classes);

// ---------------------------------------------------------------- facade

class BaseClassifier {
 public:
  enum class Kind { logistic_regression, mlp, external };

  explicit BaseClassifier(LogisticRegression model);
  explicit BaseClassifier(Mlp model);
  explicit BaseClassifier(ExternalProbs table);

  Kind kind() const noexcept;
  int num_classes() const noexcept { return num_classes_; }

  /// Trained kinds evaluate x (its dimension must match training); the
  /// external kind looks the sample up by id.
  ProbVector predict_proba(std::span<const double> x, SampleId id) const;

  const std::variant<LogisticRegression, Mlp, ExternalProbs>& model() const noexcept { return model_; }

 private:
  std::variant<LogisticRegression, Mlp, ExternalProbs> model_;
  int num_classes_ = 0;
  std::size_t dim_ = 0;
};

/// Probabilities of every row of ds, in row order.
std::vector<ProbVector> predict_all(const BaseClassifier& clf, const Dataset& ds,
                                    std::size_t threads = 1);

double accuracy(const BaseClassifier& clf, const Dataset& ds);

}  // namespace trustagg
