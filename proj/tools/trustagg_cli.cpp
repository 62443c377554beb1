// trustagg: train, evaluate and audit neighbor-aware trust scores.

#include "trustagg/error.hpp"
#include "trustagg/format.hpp"
#include "trustagg/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <sstream>

namespace {

using namespace trustagg;

SplitSpec parse_split(const std::string& s) {
  std::vector<double> parts;
  std::stringstream ss(s);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const auto v = parse_double(field);
    if (!v) throw ConfigError("bad --split value '" + s + "'");
    parts.push_back(*v);
  }
  if (parts.size() != 3) throw ConfigError("--split needs three fractions, e.g. 0.4,0.1,0.5");
  return {parts[0], parts[1], parts[2], 0};
}

std::vector<std::string> clean_list(const std::vector<std::string>& in) {
  std::vector<std::string> out;
  for (const auto& s : in) {
    if (!s.empty()) out.push_back(s);
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Neighbor-aware trust scores for classifier predictions"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key = value config file; command-line flags override it");

  RunConfig cfg;
  std::string data, probs, out = "out", split = "0.4,0.1,0.5", clf = "logreg", variant = "full";
  std::vector<std::string> scorers;
  bool no_standardize = false;
  bool timing = false;
  bool oracle = false;
  double perturb = 0.0;

  app.add_option("--data", data, "Input CSV");
  app.add_option("--label-col", cfg.label_column, "Label column name")->capture_default_str();
  app.add_option("--split", split, "train,val,test fractions")->capture_default_str();
  app.add_option("--clf", clf, "Base classifier: logreg, mlp or external")->capture_default_str();
  app.add_option("--probs", probs, "Probability table id,p0,..,p{C-1} for --clf external");
  app.add_option("--k", cfg.k, "Neighbors per class")->capture_default_str();
  app.add_option("--alpha", cfg.conformal.alpha, "Conformal level")->capture_default_str();
  app.add_option("--noise-rate", cfg.conformal.noise_rate, "Estimated mislabeling rate p")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Root seed")->capture_default_str();
  app.add_option("--seeds", cfg.seeds, "Number of trials (verify-gcn: number of instances, default 100)")->capture_default_str();
  app.add_option("--out", out, "Output directory (synth: output file)")->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads, 0 = all cores")->capture_default_str();
  app.add_flag("--no-standardize", no_standardize, "Skip feature standardization");
  app.add_option("--variant", variant, "Aggregator for train: full, neigh_only or prob_only")->capture_default_str();
  app.add_option("--epochs", cfg.train.epochs, "Aggregator epochs")->capture_default_str();
  app.add_option("--lr", cfg.train.learning_rate, "Aggregator learning rate")->capture_default_str();
  app.add_option("--batch-size", cfg.train.batch_size, "Aggregator mini-batch size")->capture_default_str();
  app.add_option("--logreg-iters", cfg.logreg.max_iter, "Logistic regression iterations")->capture_default_str();
  app.add_option("--logreg-lr", cfg.logreg.learning_rate, "Logistic regression step size")->capture_default_str();
  app.add_option("--mlp-epochs", cfg.mlp.epochs, "MLP epochs")->capture_default_str();
  app.add_option("--mlp-hidden1", cfg.mlp.hidden1, "MLP first hidden width")->capture_default_str();
  app.add_option("--mlp-hidden2", cfg.mlp.hidden2, "MLP second hidden width")->capture_default_str();
  app.add_option("--mlp-lr", cfg.mlp.learning_rate, "MLP step size")->capture_default_str();
  app.add_flag("--timing", timing, "Print wall time to stderr");
  app.add_flag("--oracle", oracle)->group("");
  app.add_option("--perturb", perturb)->group("");

  auto* train_cmd = app.add_subcommand("train", "Fit the aggregator and write model.txt and loss_trace.csv");
  auto* eval_cmd = app.add_subcommand("eval", "Compare scorers across seeds and write metrics.csv");
  eval_cmd->add_option("--scorers", scorers, "Comma-separated scorers")->delimiter(',');
  auto* detect_cmd = app.add_subcommand("detect", "Flag likely mislabeled samples");
  auto* verify_cmd = app.add_subcommand("verify-gcn", "Check the one-hop GCN equivalence on random instances");
  SynthConfig synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--kind", synth.kind, "moons or blobs")->capture_default_str();
  synth_cmd->add_option("--n", synth.n, "Sample count")->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise, "Moons coordinate noise")->capture_default_str();
  synth_cmd->add_option("--classes", synth.num_classes, "Blob count")->capture_default_str();
  synth_cmd->add_option("--dim", synth.dim, "Blob dimension")->capture_default_str();
  synth_cmd->add_option("--spread", synth.spread, "Blob center range")->capture_default_str();
  synth_cmd->add_option("--stddev", synth.stddev, "Blob spread")->capture_default_str();
  synth_cmd->add_option("--label-noise", synth.label_noise, "Fraction of labels to corrupt")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::config);
  }

  const auto start = std::chrono::steady_clock::now();
  cfg.data = data;
  cfg.probs = probs;
  cfg.out = out;
  cfg.split = parse_split(split);
  cfg.classifier = parse_classifier_kind(clf);
  cfg.standardize = !no_standardize;
  cfg.train.variant = parse_variant(variant);

  int code = 0;
  if (train_cmd->parsed()) {
    const TrainOutput r = run_train(cfg);
    std::cout << "model " << r.model_path.string() << "\nloss " << format_fixed(r.result.loss_trace.front(), 6)
              << " -> " << format_fixed(r.result.loss_trace.back(), 6) << '\n';
  } else if (eval_cmd->parsed()) {
    if (eval_cmd->count("--scorers") > 0) {
      cfg.scorers = clean_list(scorers);
      if (cfg.scorers.empty()) throw ConfigError("--scorers is empty");
    } else {
      cfg.scorers = scorer_names();
    }
    if (oracle) cfg.scorers.push_back("oracle");
    for (const auto& r : run_eval(cfg)) {
      std::cout << r.scorer << " auc "
                << (r.summary.auc ? format_fixed(100 * r.summary.auc->mean, 2) + " +- " +
                                        format_fixed(100 * r.summary.auc->std, 2)
                                  : std::string("NA"))
                << '\n';
    }
  } else if (detect_cmd->parsed()) {
    const DetectOutput r = run_detect(cfg);
    const auto& d = r.result;
    std::cout << "tau " << format_double(d.threshold) << " B " << d.rank << " alpha " << format_double(d.config.alpha)
              << " p " << format_double(d.config.noise_rate) << " flagged " << d.flagged.size() << " of "
              << d.sorted.size() << '\n';
    if (d.standard_conformal()) std::cout << "mode standard-conformal (p = 0)\n";
  } else if (verify_cmd->parsed()) {
    const int count = app.count("--seeds") > 0 ? cfg.seeds : 100;
    const VerifyGcnOutput r = run_verify_gcn(cfg.seed, count, perturb);
    std::cout << "instances " << r.results.size() << " max_abs_difference " << format_double(r.max_difference)
              << '\n';
    if (r.failing_instance) {
      std::cout << "FAIL instance " << *r.failing_instance << " difference "
                << format_double(r.results[static_cast<std::size_t>(*r.failing_instance)].max_abs_difference)
                << '\n';
      code = static_cast<int>(ErrorKind::verification);
    }
  } else if (synth_cmd->parsed()) {
    synth.seed = cfg.seed;
    synth.out = out == "out" ? std::filesystem::path("synth.csv") : std::filesystem::path(out);
    const SynthOutput r = run_synth(synth);
    std::cout << "wrote " << synth.out.string() << " (" << r.noisy.data.size() << " rows)\n";
  }
  if (timing) {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    std::cerr << "elapsed " << format_fixed(dt.count(), 3) << " s\n";
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const trustagg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
