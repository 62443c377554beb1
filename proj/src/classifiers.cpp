#include "trustagg/classifiers.hpp"

#include "trustagg/error.hpp"
#include "trustagg/format.hpp"
#include "trustagg/parallel.hpp"
#include "trustagg/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace trustagg {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double top = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - top).exp();
  return e / e.sum();
}

int argmax(const Eigen::VectorXd& v) {
  int best = 0;
  for (int c = 1; c < v.size(); ++c) {
    if (v(c) > v(best)) best = c;
  }
  return best;
}

bool ProbVector::on_simplex(const Eigen::VectorXd& v) {
  if (v.size() == 0 || !v.allFinite()) return false;
  if ((v.array() < 0.0).any() || (v.array() > 1.0).any()) return false;
  return std::abs(v.sum() - 1.0) <= kSimplexTol;
}

ProbVector ProbVector::from_output(const Eigen::VectorXd& v) {
  if (!v.allFinite()) throw NumericError("classifier output contains NaN or Inf");
  if (on_simplex(v)) return ProbVector(v);
  return ProbVector(softmax(v));
}

ProbVector ProbVector::from_logits(const Eigen::VectorXd& logits) {
  if (!logits.allFinite()) throw NumericError("logits contain NaN or Inf");
  return ProbVector(softmax(logits));
}

ProbVector ProbVector::from_unnormalized(const Eigen::VectorXd& v) {
  if (!v.allFinite()) throw DataError("probability row contains NaN or Inf");
  if ((v.array() < 0.0).any()) throw DataError("probability row has a negative entry");
  const double mass = v.sum();
  if (!(mass > 0.0)) throw DataError("probability row sums to 0");
  if (std::abs(mass - 1.0) <= kSimplexTol) return ProbVector(v);
  return ProbVector(v / mass);
}

namespace {

// Row-wise softmax in place; returns the mean negative log-likelihood.
double softmax_rows_nll(Eigen::MatrixXd& z, std::span<const int> labels) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double top = z.row(i).maxCoeff();
    z.row(i).array() -= top;
    const double log_norm = std::log(z.row(i).array().exp().sum());
    loss += log_norm - z(i, labels[static_cast<std::size_t>(i)]);
    z.row(i) = (z.row(i).array() - log_norm).exp().matrix();
  }
  return loss / static_cast<double>(z.rows());
}

void subtract_one_hot(Eigen::MatrixXd& probs, std::span<const int> labels) {
  for (Eigen::Index i = 0; i < probs.rows(); ++i) probs(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

}  // namespace

// ---------------------------------------------------------------- logistic regression

Eigen::VectorXd LogisticRegression::logits(std::span<const double> x) const {
  return weights * as_vector(x) + bias;
}

double logreg_loss_and_grad(const LogisticRegression& model, const FeatureMatrix& x,
                            std::span<const int> labels, LogisticRegression& grad) {
  Eigen::MatrixXd z = x * model.weights.transpose();
  z.rowwise() += model.bias.transpose();
  const double loss = softmax_rows_nll(z, labels);
  subtract_one_hot(z, labels);
  z /= static_cast<double>(x.rows());
  grad.weights = z.transpose() * x;
  grad.bias = z.colwise().sum().transpose();
  return loss;
}

LogisticRegression train_logreg(const Dataset& train, const LogRegOptions& opts) {
  if (opts.max_iter < 0) throw ConfigError("logreg max_iter must be >= 0");
  if (!(opts.learning_rate > 0.0)) throw ConfigError("logreg learning rate must be > 0");
  const int classes = train.num_classes();
  LogisticRegression model{Eigen::MatrixXd::Zero(classes, static_cast<Eigen::Index>(train.dim())),
                           Eigen::VectorXd::Zero(classes)};
  LogisticRegression grad;
  for (int it = 0; it < opts.max_iter; ++it) {
    const double loss = logreg_loss_and_grad(model, train.features(), train.labels(), grad);
    if (!std::isfinite(loss) || !grad.weights.allFinite()) {
      throw NumericError("logistic regression: non-finite loss at iteration " + std::to_string(it) +
                         " (lr=" + format_double(opts.learning_rate) + ")");
    }
    model.weights -= opts.learning_rate * grad.weights;
    model.bias -= opts.learning_rate * grad.bias;
  }
  return model;
}

// ---------------------------------------------------------------- MLP

Eigen::VectorXd Mlp::logits(std::span<const double> x) const {
  const Eigen::VectorXd h1 = (w1 * as_vector(x) + b1).cwiseMax(0.0);
  const Eigen::VectorXd h2 = (w2 * h1 + b2).cwiseMax(0.0);
  return w3 * h2 + b3;
}

Mlp init_mlp(std::size_t dim, int num_classes, const MlpOptions& opts) {
  if (opts.hidden1 <= 0 || opts.hidden2 <= 0) {
    throw ConfigError("mlp hidden sizes must be positive, got (" + std::to_string(opts.hidden1) + ", " +
                      std::to_string(opts.hidden2) + ")");
  }
  Rng rng(opts.seed);
  auto glorot = [&rng](Eigen::Index fan_out, Eigen::Index fan_in) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> unif(-a, a);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < fan_out; ++i) {
      for (Eigen::Index j = 0; j < fan_in; ++j) w(i, j) = unif(rng);
    }
    return w;
  };
  Mlp m;
  m.w1 = glorot(opts.hidden1, static_cast<Eigen::Index>(dim));
  m.w2 = glorot(opts.hidden2, opts.hidden1);
  m.w3 = glorot(num_classes, opts.hidden2);
  m.b1 = Eigen::VectorXd::Zero(opts.hidden1);
  m.b2 = Eigen::VectorXd::Zero(opts.hidden2);
  m.b3 = Eigen::VectorXd::Zero(num_classes);
  return m;
}

double mlp_loss_and_grad(const Mlp& model, const FeatureMatrix& x, std::span<const int> labels, Mlp& grad) {
  const double n = static_cast<double>(x.rows());
  Eigen::MatrixXd a1 = x * model.w1.transpose();
  a1.rowwise() += model.b1.transpose();
  const Eigen::MatrixXd h1 = a1.cwiseMax(0.0);
  Eigen::MatrixXd a2 = h1 * model.w2.transpose();
  a2.rowwise() += model.b2.transpose();
  const Eigen::MatrixXd h2 = a2.cwiseMax(0.0);
  Eigen::MatrixXd z = h2 * model.w3.transpose();
  z.rowwise() += model.b3.transpose();

  const double loss = softmax_rows_nll(z, labels);
  subtract_one_hot(z, labels);
  z /= n;

  grad.w3 = z.transpose() * h2;
  grad.b3 = z.colwise().sum().transpose();
  Eigen::MatrixXd d2 = (z * model.w3).cwiseProduct((a2.array() > 0.0).cast<double>().matrix());
  grad.w2 = d2.transpose() * h1;
  grad.b2 = d2.colwise().sum().transpose();
  Eigen::MatrixXd d1 = (d2 * model.w2).cwiseProduct((a1.array() > 0.0).cast<double>().matrix());
  grad.w1 = d1.transpose() * x;
  grad.b1 = d1.colwise().sum().transpose();
  return loss;
}

Mlp train_mlp(const Dataset& train, const MlpOptions& opts) {
  if (opts.epochs < 0) throw ConfigError("mlp epochs must be >= 0");
  if (opts.batch_size <= 0) throw ConfigError("mlp batch size must be positive");
  if (!(opts.learning_rate > 0.0)) throw ConfigError("mlp learning rate must be > 0");
  Mlp model = init_mlp(train.dim(), train.num_classes(), opts);
  Rng rng(mix64(opts.seed));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(opts.batch_size);
  FeatureMatrix xb;
  std::vector<int> yb;
  Mlp grad;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      xb.resize(static_cast<Eigen::Index>(end - start), static_cast<Eigen::Index>(train.dim()));
      yb.resize(end - start);
      for (std::size_t k = start; k < end; ++k) {
        xb.row(static_cast<Eigen::Index>(k - start)) = train.features().row(static_cast<Eigen::Index>(order[k]));
        yb[k - start] = train.label(order[k]);
      }
      const double loss = mlp_loss_and_grad(model, xb, yb, grad);
      if (!std::isfinite(loss)) {
        throw NumericError("mlp: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(start / batch) + " (lr=" + format_double(opts.learning_rate) + ")");
      }
      const double lr = opts.learning_rate;
      model.w1 -= lr * grad.w1;
      model.b1 -= lr * grad.b1;
      model.w2 -= lr * grad.w2;
      model.b2 -= lr * grad.b2;
      model.w3 -= lr * grad.w3;
      model.b3 -= lr * grad.b3;
    }
  }
  return model;
}

// ---------------------------------------------------------------- external

ExternalProbs load_external_probs(const std::filesystem::path& path, int num_classes) {
  if (num_classes < 2) throw ConfigError("external probabilities need at least 2 classes");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  auto fields_of = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string f;
    while (std::getline(ss, f, ',')) {
      while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
      while (!f.empty() && f.front() == ' ') f.erase(0, 1);
      out.push_back(f);
    }
    return out;
  };
  if (!std::getline(in, line)) throw CsvError(CsvError::Reason::empty_file, 0, 0, path.string() + ": empty file");
  ++line_no;
  const auto header = fields_of(line);
  if (header.size() != static_cast<std::size_t>(num_classes) + 1 || header[0] != "id") {
    throw CsvError(CsvError::Reason::missing_column, 1, 0,
                   path.string() + ": expected header id,p0,...,p" + std::to_string(num_classes - 1));
  }
  for (int c = 0; c < num_classes; ++c) {
    if (header[static_cast<std::size_t>(c) + 1] != "p" + std::to_string(c)) {
      throw CsvError(CsvError::Reason::missing_column, 1, static_cast<std::size_t>(c) + 1,
                     path.string() + ": expected column p" + std::to_string(c));
    }
  }

  ExternalProbs out;
  out.num_classes = num_classes;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = fields_of(line);
    if (fields.size() != header.size()) {
      throw CsvError(CsvError::Reason::ragged_row, line_no, fields.size(),
                     path.string() + ": row " + std::to_string(line_no) + " has wrong field count");
    }
    long long id = 0;
    {
      const auto& f = fields[0];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), id);
      if (ec != std::errc() || ptr != f.data() + f.size() || f.empty()) {
        throw CsvError(CsvError::Reason::non_numeric, line_no, 0,
                       path.string() + ": bad id '" + f + "' at row " + std::to_string(line_no));
      }
    }
    Eigen::VectorXd p(num_classes);
    for (int c = 0; c < num_classes; ++c) {
      const auto v = parse_double(fields[static_cast<std::size_t>(c) + 1]);
      if (!v) {
        throw CsvError(CsvError::Reason::non_numeric, line_no, static_cast<std::size_t>(c) + 1,
                       path.string() + ": non-numeric probability at row " + std::to_string(line_no));
      }
      p(c) = *v;
    }
    try {
      if (!out.table.emplace(static_cast<SampleId>(id), ProbVector::from_unnormalized(p)).second) {
        throw DataError("duplicate id");
      }
    } catch (const DataError& e) {
      throw DataError(path.string() + ": rejected row for id " + std::to_string(id) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------- facade

BaseClassifier::BaseClassifier(LogisticRegression model)
    : num_classes_(static_cast<int>(model.weights.rows())),
      dim_(static_cast<std::size_t>(model.weights.cols())) {
  model_ = std::move(model);
}

BaseClassifier::BaseClassifier(Mlp model)
    : num_classes_(static_cast<int>(model.w3.rows())), dim_(static_cast<std::size_t>(model.w1.cols())) {
  model_ = std::move(model);
}

BaseClassifier::BaseClassifier(ExternalProbs table) : num_classes_(table.num_classes) {
  model_ = std::move(table);
}

BaseClassifier::Kind BaseClassifier::kind() const noexcept {
  switch (model_.index()) {
    case 0: return Kind::logistic_regression;
    case 1: return Kind::mlp;
    default: return Kind::external;
  }
}

ProbVector BaseClassifier::predict_proba(std::span<const double> x, SampleId id) const {
  if (const auto* ext = std::get_if<ExternalProbs>(&model_)) {
    const auto it = ext->table.find(id);
    if (it == ext->table.end()) throw DataError("external probabilities have no row for id " + std::to_string(id));
    return it->second;
  }
  if (x.size() != dim_) {
    throw DataError("feature dimension mismatch: classifier expects " + std::to_string(dim_) + ", got " +
                    std::to_string(x.size()));
  }
  if (const auto* lr = std::get_if<LogisticRegression>(&model_)) return ProbVector::from_logits(lr->logits(x));
  return ProbVector::from_logits(std::get<Mlp>(model_).logits(x));
}

std::vector<ProbVector> predict_all(const BaseClassifier& clf, const Dataset& ds, std::size_t threads) {
  std::vector<ProbVector> out(ds.size());
  parallel_for(ds.size(), threads, [&](std::size_t i) { out[i] = clf.predict_proba(ds.row(i), ds.id(i)); });
  return out;
}

double accuracy(const BaseClassifier& clf, const Dataset& ds) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (clf.predict_proba(ds.row(i), ds.id(i)).predicted() == ds.label(i)) ++hits;
  }
  return ds.size() ? static_cast<double>(hits) / static_cast<double>(ds.size()) : 0.0;
}

}  // namespace trustagg
