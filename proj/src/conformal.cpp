#include "trustagg/conformal.hpp"

#include "trustagg/error.hpp"
#include "trustagg/format.hpp"
#include "trustagg/parallel.hpp"
#include "trustagg/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace trustagg {

double reliability(const Eigen::VectorXd& trust, int predicted, int label) {
  const double sign = predicted == label ? 1.0 : -1.0;
  return sign * trust(label);
}

std::vector<ReliabilityScore> reliability_scores(const AggregatorParams& params, const ClassIndex& index,
                                                 const BaseClassifier& clf, const Dataset& ds, bool leave_one_out,
                                                 std::size_t threads) {
  std::vector<ReliabilityScore> out(ds.size());
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    const auto exclude = leave_one_out ? std::optional<SampleId>(ds.id(i)) : std::nullopt;
    const ScoredPrediction s = score(params, index, clf, ds.row(i), ds.id(i), exclude);
    out[i] = {ds.id(i), ds.label(i), s.predicted, reliability(s.t, s.predicted, ds.label(i))};
  });
  return out;
}

void validate(const ConformalConfig& cfg, std::size_t n) {
  if (n == 0) throw ConfigError("conformal detection needs at least one sample");
  const double lower = 1.0 / static_cast<double>(n + 1);
  if (!(cfg.alpha > lower && cfg.alpha < 1.0)) {
    throw ConfigError("alpha must lie in (1/(N+1), 1) = (" + format_double(lower) + ", 1) for N = " +
                      std::to_string(n) + "; got " + format_double(cfg.alpha));
  }
  if (!(cfg.noise_rate >= 0.0 && cfg.noise_rate < 1.0)) {
    throw ConfigError("noise rate must lie in [0, 1); got " + format_double(cfg.noise_rate));
  }
}

std::size_t conformal_rank(std::size_t n, const ConformalConfig& cfg) {
  validate(cfg, n);
  const double nd = static_cast<double>(n);
  const double v = (nd + 1.0) * (1.0 - cfg.alpha) + cfg.alpha * nd * cfg.noise_rate;
  // Absorb rounding noise so that exact integers are not bumped up by one.
  const double b = std::ceil(v - 1e-9 * std::max(1.0, v));
  const auto rank = static_cast<std::size_t>(std::max(1.0, b));
  if (rank > n) {
    throw ConfigError("rank " + std::to_string(rank) + " exceeds N = " + std::to_string(n) + " at alpha " +
                      format_double(cfg.alpha) + ", p " + format_double(cfg.noise_rate) +
                      "; raise alpha or lower p");
  }
  return rank;
}

DetectionResult detect_mislabels(std::span<const ReliabilityScore> scores, const ConformalConfig& cfg) {
  DetectionResult res;
  res.config = cfg;
  res.rank = conformal_rank(scores.size(), cfg);
  res.sorted.assign(scores.begin(), scores.end());
  std::sort(res.sorted.begin(), res.sorted.end(), [](const ReliabilityScore& a, const ReliabilityScore& b) {
    return a.r > b.r || (a.r == b.r && a.id < b.id);
  });
  res.threshold = res.sorted[res.rank - 1].r;
  for (const auto& s : res.sorted) {
    if (s.r <= res.threshold) res.flagged.push_back(s);
  }
  return res;
}

void write_detection_csv(std::span<const ReliabilityScore> scores, const DetectionResult& result,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "id,label,predicted,reliability,flagged\n";
  for (const auto& s : scores) {
    out << s.id << ',' << s.label << ',' << s.predicted << ',' << format_double(s.r) << ','
        << (s.r <= result.threshold ? 1 : 0) << '\n';
  }
}

void write_detection_summary(const DetectionResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "threshold,rank,alpha,noise_rate,mode,n,flagged\n"
      << format_double(result.threshold) << ',' << result.rank << ',' << format_double(result.config.alpha) << ','
      << format_double(result.config.noise_rate) << ','
      << (result.standard_conformal() ? "standard-conformal" : "noise-adjusted") << ',' << result.sorted.size()
      << ',' << result.flagged.size() << '\n';
}

double estimate_noise_rate(std::size_t audited, std::size_t mislabeled) {
  if (audited == 0) throw ConfigError("noise-rate estimate needs a nonempty audited subset");
  if (mislabeled > audited) throw ConfigError("more mislabeled samples than audited ones");
  return static_cast<double>(mislabeled) / static_cast<double>(audited);
}

// ---------------------------------------------------------------- coverage harness

CoverageResult coverage_harness(const CoverageConfig& cfg) {
  if (cfg.runs < 1) throw ConfigError("coverage harness needs at least one run");
  if (cfg.n_test == 0) throw ConfigError("coverage harness needs test points");
  CoverageResult res;
  std::size_t flagged_total = 0;
  for (int run = 0; run < cfg.runs; ++run) {
    const std::uint64_t base = derive_seed(cfg.seed, static_cast<std::uint64_t>(run), Stream::synth);
    auto sub = [base](std::uint64_t j) { return derive_seed(base, j, Stream::synth); };

    const Eigen::MatrixXd centers = random_centers(cfg.num_classes, cfg.dim, cfg.spread, sub(0));
    const Dataset train = inject_label_noise(make_blobs(cfg.n_fit, centers, cfg.stddev, sub(1)), cfg.noise_rate,
                                             derive_seed(base, 1, Stream::label_noise))
                              .data;
    const Dataset val = inject_label_noise(make_blobs(std::max<std::size_t>(cfg.n_fit / 4, 2 * centers.rows()),
                                                      centers, cfg.stddev, sub(2)),
                                           cfg.noise_rate, derive_seed(base, 2, Stream::label_noise))
                            .data;
    const Dataset calibration = inject_label_noise(make_blobs(cfg.n_calibration, centers, cfg.stddev, sub(3)),
                                                   cfg.noise_rate, derive_seed(base, 3, Stream::label_noise))
                                    .data;
    const Dataset test = make_blobs(cfg.n_test, centers, cfg.stddev, sub(4));

    LogRegOptions lr;
    lr.seed = derive_seed(base, 0, Stream::classifier);
    const BaseClassifier clf(train_logreg(train, lr));
    const ClassIndex index = ClassIndex::build(train, KernelConfig{}, cfg.k);
    TrainConfig tc;
    tc.seed = derive_seed(base, 0, Stream::aggregator);
    const AggregatorParams params = trustagg::train(index, clf, val, tc, cfg.threads).params;

    const auto cal_scores = reliability_scores(params, index, clf, calibration, false, cfg.threads);
    const DetectionResult det = detect_mislabels(cal_scores, {cfg.alpha, cfg.assumed_noise_rate});
    const auto test_scores = reliability_scores(params, index, clf, test, false, cfg.threads);
    std::size_t flagged = 0;
    for (const auto& s : test_scores) flagged += s.r <= det.threshold ? 1 : 0;

    res.rates.push_back(static_cast<double>(flagged) / static_cast<double>(cfg.n_test));
    res.ranks.push_back(det.rank);
    flagged_total += flagged;
  }
  const double pooled_n = static_cast<double>(cfg.n_test) * cfg.runs;
  res.mean_rate = static_cast<double>(flagged_total) / pooled_n;
  res.standard_error = std::sqrt(res.mean_rate * (1.0 - res.mean_rate) / pooled_n);
  res.bound = cfg.alpha + 2.0 * std::sqrt(cfg.alpha * (1.0 - cfg.alpha) / static_cast<double>(cfg.n_test));
  return res;
}

}  // namespace trustagg
