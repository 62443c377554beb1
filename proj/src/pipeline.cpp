#include "trustagg/pipeline.hpp"

#include "trustagg/error.hpp"
#include "trustagg/format.hpp"
#include "trustagg/random.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

namespace trustagg {

ClassifierKind parse_classifier_kind(const std::string& s) {
  if (s == "logreg") return ClassifierKind::logreg;
  if (s == "mlp") return ClassifierKind::mlp;
  if (s == "external") return ClassifierKind::external;
  throw ConfigError("unknown classifier '" + s + "' (expected logreg, mlp or external)");
}

std::string to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::logreg: return "logreg";
    case ClassifierKind::mlp: return "mlp";
    case ClassifierKind::external: return "external";
  }
  return "logreg";
}

const std::vector<std::string>& scorer_names() {
  static const std::vector<std::string> names = {"neighboragg", "neigh_only", "prob_only", "confidence",
                                                 "temperature", "trustscore", "gcn1hop"};
  return names;
}

void validate(const RunConfig& cfg) {
  if (cfg.k < 1) throw ConfigError("K must be >= 1");
  if (cfg.seeds < 1) throw ConfigError("--seeds must be >= 1");
  if (cfg.train.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.train.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(cfg.train.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (cfg.classifier == ClassifierKind::external && cfg.probs.empty()) {
    throw ConfigError("--clf external needs --probs");
  }
  for (const auto& s : cfg.scorers) {
    if (s != "oracle" && std::find(scorer_names().begin(), scorer_names().end(), s) == scorer_names().end()) {
      throw ConfigError("unknown scorer '" + s + "'");
    }
  }
}

Dataset load_data(const RunConfig& cfg) {
  if (cfg.data.empty()) throw ConfigError("no dataset given (--data)");
  if (!std::filesystem::is_regular_file(cfg.data)) throw ConfigError("dataset not found: " + cfg.data.string());
  return load_csv(cfg.data, cfg.label_column);
}

namespace {

std::uint64_t seed_of(const RunConfig& cfg, int trial, Stream s) {
  return derive_seed(cfg.seed, static_cast<std::uint64_t>(trial), s);
}

BaseClassifier fit_classifier(const Dataset& train, const RunConfig& cfg, int trial) {
  switch (cfg.classifier) {
    case ClassifierKind::logreg: {
      LogRegOptions o = cfg.logreg;
      o.seed = seed_of(cfg, trial, Stream::classifier);
      return BaseClassifier(train_logreg(train, o));
    }
    case ClassifierKind::mlp: {
      MlpOptions o = cfg.mlp;
      o.seed = seed_of(cfg, trial, Stream::classifier);
      return BaseClassifier(train_mlp(train, o));
    }
    case ClassifierKind::external:
      return BaseClassifier(load_external_probs(cfg.probs, train.num_classes()));
  }
  throw ConfigError("unknown classifier kind");
}

void ensure_out_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
}

}  // namespace

Trial prepare_trial(const Dataset& data, const RunConfig& cfg, int trial) {
  SplitSpec spec = cfg.split;
  spec.seed = seed_of(cfg, trial, Stream::split);
  Splits parts = split(data, spec);
  std::optional<Standardizer> standardizer;
  if (cfg.standardize) {
    standardizer = Standardizer::fit(parts.train);
    parts.train = standardizer->apply(parts.train);
    parts.val = standardizer->apply(parts.val);
    parts.test = standardizer->apply(parts.test);
  }
  BaseClassifier clf = fit_classifier(parts.train, cfg, trial);
  ClassIndex index = ClassIndex::build(parts.train, cfg.kernel, cfg.k);
  return Trial{trial,           standardizer,   std::move(parts.train), std::move(parts.val),
               std::move(parts.test), std::move(clf), std::move(index)};
}

TrainConfig trial_train_config(const RunConfig& cfg, int trial) {
  TrainConfig tc = cfg.train;
  tc.seed = seed_of(cfg, trial, Stream::aggregator);
  return tc;
}

// ---------------------------------------------------------------- train

TrainOutput run_train(const RunConfig& cfg) {
  validate(cfg);
  const Dataset data = load_data(cfg);
  ensure_out_dir(cfg.out);
  const Trial t = prepare_trial(data, cfg, 0);
  TrainOutput out;
  out.result = train(t.neighbors, t.classifier, t.val, trial_train_config(cfg, 0), cfg.threads);
  out.model_path = cfg.out / "model.txt";
  out.trace_path = cfg.out / "loss_trace.csv";
  save_model(out.result.params, out.model_path);
  std::ofstream trace(out.trace_path);
  if (!trace) throw ConfigError("cannot write " + out.trace_path.string());
  trace << "epoch,loss\n";
  for (std::size_t e = 0; e < out.result.loss_trace.size(); ++e) {
    trace << e << ',' << format_double(out.result.loss_trace[e]) << '\n';
  }
  return out;
}

// ---------------------------------------------------------------- eval

namespace {

double trust_at_prediction(const AggregatorParams& params, const ClassIndex& index, const ScorerInput& in) {
  const Eigen::VectorXd t = forward(params, index.neighborhood_vector(in.x), in.probs->values());
  return t(in.probs->predicted());
}

/// Per-trial scorer for one name. Trains what the name needs.
Scorer make_scorer(const std::string& name, const Trial& t, const RunConfig& cfg,
                   std::unordered_map<SampleId, double>& lookup) {
  const ClassIndex& index = t.neighbors;
  if (name == "neighboragg" || name == "neigh_only" || name == "prob_only") {
    TrainConfig tc = trial_train_config(cfg, t.index);
    tc.variant = name == "neighboragg" ? Variant::full : parse_variant(name);
    auto params = std::make_shared<AggregatorParams>(train(index, t.classifier, t.val, tc, cfg.threads).params);
    return [params, &index](const ScorerInput& in) { return trust_at_prediction(*params, index, in); };
  }
  if (name == "confidence") {
    return [](const ScorerInput& in) { return confidence_score(*in.probs); };
  }
  if (name == "temperature") {
    const auto probs = predict_all(t.classifier, t.val, cfg.threads);
    const TemperatureModel model = fit_temperature(probs, t.val.labels());
    return [model](const ScorerInput& in) { return model.score(*in.probs); };
  }
  if (name == "trustscore") {
    return [&index](const ScorerInput& in) { return trust_score(index, in.x, in.probs->predicted()); };
  }
  if (name == "gcn1hop") {
    TrainConfig tc = trial_train_config(cfg, t.index);
    tc.init = InitMode::gcn_warm_start;
    tc.variant = Variant::full;
    tc.train_input_maps = false;
    const AggregatorParams params = train(index, t.classifier, t.val, tc, cfg.threads).params;
    const auto probs = predict_all(t.classifier, t.test, cfg.threads);
    const OneHopGcn gcn = OneHopGcn::build(t.train, t.test, probs, cfg.kernel, cfg.k);
    const Eigen::MatrixXd logits = gcn.query_logits(params.w_out, params.activation);
    lookup.clear();
    for (std::size_t i = 0; i < t.test.size(); ++i) {
      const Eigen::VectorXd trust = softmax(logits.col(static_cast<Eigen::Index>(i)));
      lookup.emplace(t.test.id(i), trust(probs[i].predicted()));
    }
    return [&lookup](const ScorerInput& in) { return lookup.at(in.id); };
  }
  if (name == "oracle") {
    return [](const ScorerInput& in) { return in.probs->predicted() == in.label ? 1.0 : 0.0; };
  }
  throw ConfigError("unknown scorer '" + name + "'");
}

void write_metrics_csv(const std::vector<ScorerReport>& reports, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "scorer,trial,auc,apc,apm,accuracy,n,n_correct,auc_std,apc_std,apm_std,accuracy_std\n";
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.runs.size(); ++i) {
      const MetricReport& m = r.runs[i];
      out << r.scorer << ',' << i << ',' << format_metric(m.auc) << ',' << format_metric(m.apc) << ','
          << format_metric(m.apm) << ',' << format_double(m.accuracy) << ',' << m.n << ',' << m.n_correct
          << ",,,,\n";
    }
    const AggregateReport& a = r.summary;
    auto mean = [](const std::optional<MeanStd>& m) { return m ? format_double(m->mean) : std::string("NA"); };
    auto sd = [](const std::optional<MeanStd>& m) { return m ? format_double(m->std) : std::string("NA"); };
    out << r.scorer << ",mean," << mean(a.auc) << ',' << mean(a.apc) << ',' << mean(a.apm) << ','
        << format_double(a.accuracy.mean) << ",,," << sd(a.auc) << ',' << sd(a.apc) << ',' << sd(a.apm) << ','
        << format_double(a.accuracy.std) << '\n';
  }
}

}  // namespace

std::vector<ScorerReport> run_eval(const RunConfig& cfg) {
  validate(cfg);
  if (cfg.scorers.empty()) throw ConfigError("no scorers selected");
  const Dataset data = load_data(cfg);
  ensure_out_dir(cfg.out);

  std::vector<ScorerReport> reports(cfg.scorers.size());
  for (std::size_t s = 0; s < cfg.scorers.size(); ++s) reports[s].scorer = cfg.scorers[s];

  for (int trial = 0; trial < cfg.seeds; ++trial) {
    const Trial t = prepare_trial(data, cfg, trial);
    for (std::size_t s = 0; s < cfg.scorers.size(); ++s) {
      std::unordered_map<SampleId, double> lookup;
      const Scorer scorer = make_scorer(cfg.scorers[s], t, cfg, lookup);
      const auto samples = score_samples(scorer, t.test, t.classifier, cfg.threads);
      write_scores_csv(samples, cfg.out / ("scores_" + cfg.scorers[s] + "_" + std::to_string(trial) + ".csv"));
      reports[s].runs.push_back(summarize(samples));
    }
  }
  for (auto& r : reports) {
    r.summary = aggregate(r.runs);
    write_report_csv(r.summary, cfg.out / ("summary_" + r.scorer + ".csv"));
  }
  write_metrics_csv(reports, cfg.out / "metrics.csv");
  return reports;
}

// ---------------------------------------------------------------- detect

DetectOutput run_detect(const RunConfig& cfg) {
  validate(cfg);
  const Dataset data = load_data(cfg);
  // Fail on a bad alpha before spending time on training.
  conformal_rank(data.size(), cfg.conformal);
  ensure_out_dir(cfg.out);

  const Trial t = prepare_trial(data, cfg, 0);
  const AggregatorParams params =
      train(t.neighbors, t.classifier, t.val, trial_train_config(cfg, 0), cfg.threads).params;
  const Dataset all = t.standardizer ? t.standardizer->apply(data) : data;

  DetectOutput out;
  out.scores = reliability_scores(params, t.neighbors, t.classifier, all, true, cfg.threads);
  out.result = detect_mislabels(out.scores, cfg.conformal);
  write_detection_csv(out.scores, out.result, cfg.out / "detection.csv");
  write_detection_summary(out.result, cfg.out / "detection_summary.csv");
  return out;
}

// ---------------------------------------------------------------- verify-gcn

VerifyGcnOutput run_verify_gcn(std::uint64_t seed, int count, double perturb_w_h, const GcnCheckSizes& sizes) {
  if (count < 1) throw ConfigError("verify-gcn needs --seeds >= 1");
  VerifyGcnOutput out;
  for (int i = 0; i < count; ++i) {
    const GcnCheckResult r =
        verify_gcn_equivalence(derive_seed(seed, static_cast<std::uint64_t>(i), Stream::verify), sizes, perturb_w_h);
    out.max_difference = std::max(out.max_difference, r.max_abs_difference);
    if (!out.failing_instance && !(r.max_abs_difference < kGcnTolerance)) out.failing_instance = i;
    out.results.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------- synth

SynthOutput run_synth(const SynthConfig& cfg) {
  const std::uint64_t data_seed = derive_seed(cfg.seed, 0, Stream::synth);
  std::optional<Dataset> clean;
  if (cfg.kind == "moons") {
    clean = make_two_moons(cfg.n, cfg.noise, data_seed);
  } else if (cfg.kind == "blobs") {
    if (cfg.num_classes < 2) throw ConfigError("blobs need at least 2 classes");
    if (cfg.dim < 1) throw ConfigError("blobs need dim >= 1");
    const Eigen::MatrixXd centers =
        random_centers(cfg.num_classes, cfg.dim, cfg.spread, derive_seed(cfg.seed, 1, Stream::synth));
    clean = make_blobs(cfg.n, centers, cfg.stddev, data_seed);
  } else {
    throw ConfigError("unknown synth kind '" + cfg.kind + "' (expected moons or blobs)");
  }
  if (!(cfg.label_noise >= 0.0 && cfg.label_noise < 1.0)) throw ConfigError("label noise must lie in [0, 1)");

  NoisyLabels noisy = inject_label_noise(*clean, cfg.label_noise, derive_seed(cfg.seed, 0, Stream::label_noise));
  if (cfg.out.has_parent_path()) ensure_out_dir(cfg.out.parent_path());
  write_csv(noisy.data, cfg.out);
  if (cfg.label_noise > 0.0) {
    auto mask_path = cfg.out;
    mask_path.replace_filename(cfg.out.stem().string() + "_mask.csv");
    std::ofstream mask(mask_path);
    if (!mask) throw ConfigError("cannot write " + mask_path.string());
    mask << "id,clean_label,flipped\n";
    for (std::size_t i = 0; i < clean->size(); ++i) {
      mask << clean->id(i) << ',' << clean->label(i) << ',' << (noisy.flipped[i] ? 1 : 0) << '\n';
    }
  }
  return SynthOutput{std::move(*clean), std::move(noisy)};
}

}  // namespace trustagg
