#include "trustagg/aggregator.hpp"

#include "trustagg/error.hpp"
#include "trustagg/format.hpp"
#include "trustagg/parallel.hpp"
#include "trustagg/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace trustagg {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::neigh_only: return "neigh_only";
    case Variant::prob_only: return "prob_only";
  }
  return "full";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "neigh_only") return Variant::neigh_only;
  if (s == "prob_only") return Variant::prob_only;
  throw ConfigError("unknown variant '" + s + "' (expected full, neigh_only or prob_only)");
}

AggregatorParams init_params(int num_classes, int k, InitMode mode, Variant variant, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("aggregator needs C >= 2");
  if (k < 1) throw ConfigError("aggregator needs K >= 1");
  AggregatorParams params;
  params.num_classes = num_classes;
  params.k = k;
  params.variant = variant;
  const Eigen::Index c = num_classes;
  const Eigen::Index ck = c * k;
  if (mode == InitMode::gcn_warm_start) {
    params.w_h = Eigen::MatrixXd::Zero(c, ck);
    for (Eigen::Index i = 0; i < c; ++i) params.w_h.block(i, i * k, 1, k).setConstant(1.0 / k);
    params.w_p = Eigen::MatrixXd::Identity(c, c);
    params.w_out.resize(c, 2 * c);
    params.w_out << Eigen::MatrixXd::Identity(c, c), Eigen::MatrixXd::Identity(c, c);
  } else {
    Rng rng(seed);
    auto glorot = [&rng](Eigen::Index rows, Eigen::Index cols) {
      const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
      std::uniform_real_distribution<double> unif(-a, a);
      Eigen::MatrixXd w(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = unif(rng);
      }
      return w;
    };
    params.w_h = glorot(c, ck);
    params.w_p = glorot(c, c);
    params.w_out = glorot(c, 2 * c);
  }
  if (variant == Variant::neigh_only) params.w_p.setZero();
  if (variant == Variant::prob_only) params.w_h.setZero();
  return params;
}

namespace {

void check_shapes(const AggregatorParams& params, const Eigen::VectorXd& h, const Eigen::VectorXd& p) {
  const Eigen::Index c = params.num_classes;
  if (params.w_h.rows() != c || params.w_h.cols() != c * params.k || params.w_p.rows() != c ||
      params.w_p.cols() != c || params.w_out.rows() != c || params.w_out.cols() != 2 * c) {
    throw DataError("aggregator parameter shapes inconsistent with C=" + std::to_string(c) +
                    ", K=" + std::to_string(params.k));
  }
  if (h.size() != c * params.k) {
    throw DataError("neighborhood vector has length " + std::to_string(h.size()) + ", expected " +
                    std::to_string(c * params.k));
  }
  if (p.size() != c) {
    throw DataError("probability vector has length " + std::to_string(p.size()) + ", expected " + std::to_string(c));
  }
}

// Adds the gradient of one sample into `acc` and returns its loss.
double accumulate_gradient(const AggregatorParams& params, const Eigen::VectorXd& h, const Eigen::VectorXd& p,
                           int label, ParamGradients& acc) {
  const ForwardPass fp = forward_pass(params, h, p);
  const Eigen::Index c = params.num_classes;
  Eigen::VectorXd g_logits = fp.trust;
  g_logits(label) -= 1.0;
  g_logits /= static_cast<double>(c);

  acc.w_out.noalias() += g_logits * fp.hidden.transpose();
  Eigen::VectorXd g_pre = params.w_out.transpose() * g_logits;
  if (params.activation == Activation::relu) {
    g_pre = g_pre.cwiseProduct((fp.pre_activation.array() > 0.0).cast<double>().matrix());
  }
  if (params.variant != Variant::prob_only) acc.w_h.noalias() += g_pre.head(c) * h.transpose();
  if (params.variant != Variant::neigh_only) acc.w_p.noalias() += g_pre.tail(c) * p.transpose();
  return loss(fp.trust, label);
}

ParamGradients zero_like(const AggregatorParams& params) {
  return ParamGradients{Eigen::MatrixXd::Zero(params.w_h.rows(), params.w_h.cols()),
                        Eigen::MatrixXd::Zero(params.w_p.rows(), params.w_p.cols()),
                        Eigen::MatrixXd::Zero(params.w_out.rows(), params.w_out.cols())};
}

}  // namespace

ForwardPass forward_pass(const AggregatorParams& params, const Eigen::VectorXd& h, const Eigen::VectorXd& p) {
  check_shapes(params, h, p);
  const Eigen::Index c = params.num_classes;
  ForwardPass fp;
  fp.pre_activation = Eigen::VectorXd::Zero(2 * c);
  if (params.variant != Variant::prob_only) fp.pre_activation.head(c).noalias() = params.w_h * h;
  if (params.variant != Variant::neigh_only) fp.pre_activation.tail(c).noalias() = params.w_p * p;
  fp.hidden = params.activation == Activation::relu ? fp.pre_activation.cwiseMax(0.0) : fp.pre_activation;
  fp.logits.noalias() = params.w_out * fp.hidden;
  if (!fp.logits.allFinite() || !fp.pre_activation.allFinite()) {
    throw NumericError("aggregator forward pass produced a non-finite value");
  }
  fp.trust = softmax(fp.logits);
  return fp;
}

Eigen::VectorXd forward(const AggregatorParams& params, const Eigen::VectorXd& h, const Eigen::VectorXd& p) {
  return forward_pass(params, h, p).trust;
}

double loss(const Eigen::VectorXd& trust, int label) {
  return -std::log(std::max(trust(label), kLogEps)) / static_cast<double>(trust.size());
}

ParamGradients gradients(const AggregatorParams& params, const Eigen::VectorXd& h, const Eigen::VectorXd& p,
                         int label) {
  ParamGradients g = zero_like(params);
  accumulate_gradient(params, h, p, label, g);
  return g;
}

FeatureBatch compute_features(const ClassIndex& index, const BaseClassifier& clf, const Dataset& ds,
                              bool leave_one_out, std::size_t threads) {
  const Eigen::Index c = index.num_classes();
  if (clf.num_classes() != c) throw DataError("classifier and index disagree on the number of classes");
  FeatureBatch batch;
  const auto n = static_cast<Eigen::Index>(ds.size());
  batch.h.resize(n, c * index.k());
  batch.p.resize(n, c);
  batch.labels = ds.labels();
  batch.ids = ds.ids();
  batch.predicted.resize(ds.size());
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    const auto row = ds.row(i);
    const auto exclude = leave_one_out ? std::optional<SampleId>(ds.id(i)) : std::nullopt;
    batch.h.row(static_cast<Eigen::Index>(i)) = index.neighborhood_vector(row, exclude).transpose();
    const ProbVector p = clf.predict_proba(row, ds.id(i));
    batch.p.row(static_cast<Eigen::Index>(i)) = p.values().transpose();
    batch.predicted[i] = p.predicted();
  });
  return batch;
}

double mean_loss(const AggregatorParams& params, const FeatureBatch& batch) {
  if (batch.size() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    total += loss(forward(params, batch.h.row(r).transpose(), batch.p.row(r).transpose()), batch.labels[i]);
  }
  return total / static_cast<double>(batch.size());
}

TrainResult train_on_features(const FeatureBatch& batch, int k, const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("aggregator epochs must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("aggregator learning rate must be > 0");
  if (cfg.batch_size < 1) throw ConfigError("aggregator batch size must be >= 1");
  if (batch.size() == 0) throw DataError("aggregator training set is empty");
  const int c = static_cast<int>(batch.p.cols());

  TrainResult result;
  result.params = init_params(c, k, cfg.init, cfg.variant, cfg.seed);
  AggregatorParams& params = result.params;
  result.loss_trace.push_back(mean_loss(params, batch));

  Rng rng(mix64(cfg.seed));
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto step = static_cast<std::size_t>(cfg.batch_size);
  ParamGradients acc = zero_like(params);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += step) {
      const std::size_t end = std::min(order.size(), start + step);
      acc.w_h.setZero();
      acc.w_p.setZero();
      acc.w_out.setZero();
      try {
        for (std::size_t j = start; j < end; ++j) {
          const auto r = static_cast<Eigen::Index>(order[j]);
          accumulate_gradient(params, batch.h.row(r).transpose(), batch.p.row(r).transpose(),
                              batch.labels[order[j]], acc);
        }
      } catch (const NumericError&) {
        throw NumericError("aggregator training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(start / step) + " (lr=" + format_double(cfg.learning_rate) + ")");
      }
      const double scale = cfg.learning_rate / static_cast<double>(end - start);
      params.w_out -= scale * acc.w_out;
      if (cfg.train_input_maps) {
        params.w_h -= scale * acc.w_h;
        params.w_p -= scale * acc.w_p;
      }
      if (!params.w_out.allFinite() || !params.w_h.allFinite() || !params.w_p.allFinite()) {
        throw NumericError("aggregator training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(start / step) + " (lr=" + format_double(cfg.learning_rate) + ")");
      }
    }
    double epoch_loss = 0.0;
    try {
      epoch_loss = mean_loss(params, batch);
    } catch (const NumericError&) {
      epoch_loss = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(epoch_loss)) {
      throw NumericError("aggregator loss became non-finite after epoch " + std::to_string(epoch) +
                         " (lr=" + format_double(cfg.learning_rate) + ")");
    }
    result.loss_trace.push_back(epoch_loss);
  }
  return result;
}

TrainResult train(const ClassIndex& index, const BaseClassifier& clf, const Dataset& val, const TrainConfig& cfg,
                  std::size_t threads) {
  // Validation samples are not in the index, so no self-exclusion.
  const FeatureBatch batch = compute_features(index, clf, val, false, threads);
  return train_on_features(batch, index.k(), cfg);
}

ScoredPrediction score(const AggregatorParams& params, const ClassIndex& index, const BaseClassifier& clf,
                       std::span<const double> x, SampleId id, std::optional<SampleId> exclude) {
  const ProbVector p = clf.predict_proba(x, id);
  const Eigen::VectorXd h = index.neighborhood_vector(x, exclude);
  ScoredPrediction out;
  out.t = forward(params, h, p.values());
  out.predicted = p.predicted();
  out.trust = out.t(out.predicted);
  return out;
}

std::optional<double> complementarity_correlation(const AggregatorParams& params) {
  const int c = params.num_classes;
  const int k = params.k;
  Eigen::VectorXd block(c);
  Eigen::VectorXd diag(c);
  for (int i = 0; i < c; ++i) {
    block(i) = params.w_h.block(i, static_cast<Eigen::Index>(i) * k, 1, k).mean();
    diag(i) = params.w_p(i, i);
  }
  const Eigen::VectorXd a = block.array() - block.mean();
  const Eigen::VectorXd b = diag.array() - diag.mean();
  const double saa = a.squaredNorm();
  const double sbb = b.squaredNorm();
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
  return std::clamp(a.dot(b) / std::sqrt(saa * sbb), -1.0, 1.0);
}

// ---------------------------------------------------------------- serialization

std::string serialize_model(const AggregatorParams& params) {
  std::string out = std::to_string(params.num_classes) + " " + std::to_string(params.k) + " " +
                    to_string(params.activation) + "\n";
  auto dump = [&out](const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (j) out += ' ';
        out += format_double(m(i, j));
      }
      out += '\n';
    }
  };
  dump(params.w_h);
  dump(params.w_p);
  dump(params.w_out);
  return out;
}

AggregatorParams parse_model(const std::string& text) {
  std::istringstream in(text);
  AggregatorParams params;
  std::string activation;
  if (!(in >> params.num_classes >> params.k >> activation)) throw DataError("model file: malformed header");
  if (params.num_classes < 2 || params.k < 1) throw DataError("model file: invalid C or K in header");
  params.activation = parse_activation(activation);
  const Eigen::Index c = params.num_classes;
  auto read = [&in](Eigen::Index rows, Eigen::Index cols, const char* name) {
    Eigen::MatrixXd m(rows, cols);
    std::string token;
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (!(in >> token)) throw DataError(std::string("model file: truncated ") + name);
        const auto v = parse_double(token);
        if (!v || !std::isfinite(*v)) throw DataError(std::string("model file: bad value '") + token + "' in " + name);
        m(i, j) = *v;
      }
    }
    return m;
  };
  params.w_h = read(c, c * params.k, "W_h");
  params.w_p = read(c, c, "W_p");
  params.w_out = read(c, 2 * c, "W_out");
  std::string extra;
  if (in >> extra) throw DataError("model file: trailing data");
  return params;
}

void save_model(const AggregatorParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << serialize_model(params);
}

AggregatorParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace trustagg
