#include "trustagg/metrics.hpp"

#include "trustagg/error.hpp"
#include "trustagg/format.hpp"
#include "trustagg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace trustagg {

std::optional<double> auroc(std::span<const ScoredOutcome> outcomes) {
  std::vector<std::size_t> order(outcomes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return outcomes[a].score < outcomes[b].score; });

  // Walk groups of equal score upward; every positive beats the negatives
  // below its group and ties with those inside it. All partial sums are
  // multiples of 1/2, so they stay exact in double.
  double u = 0.0;
  double negatives_below = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t pos = 0;
    std::size_t neg = 0;
    while (j < order.size() && outcomes[order[j]].score == outcomes[order[i]].score) {
      (outcomes[order[j]].correct ? pos : neg) += 1;
      ++j;
    }
    u += static_cast<double>(pos) * (negatives_below + 0.5 * static_cast<double>(neg));
    negatives_below += static_cast<double>(neg);
    n_pos += pos;
    n_neg += neg;
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::optional<double> average_precision(std::span<const ScoredOutcome> outcomes, bool positive_is_correct) {
  std::vector<std::size_t> order(outcomes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return positive_is_correct ? outcomes[a].score > outcomes[b].score : outcomes[a].score < outcomes[b].score;
  });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (outcomes[order[rank]].correct == positive_is_correct) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

std::vector<SampleScore> score_samples(const Scorer& scorer, const Dataset& test, const BaseClassifier& clf,
                                       std::size_t threads) {
  const std::vector<ProbVector> probs = predict_all(clf, test, threads);
  std::vector<SampleScore> out(test.size());
  parallel_for(test.size(), threads, [&](std::size_t i) {
    const ScorerInput in{test.row(i), test.id(i), &probs[i], test.label(i)};
    out[i] = {test.id(i), probs[i].predicted(), test.label(i), scorer(in)};
  });
  for (const auto& s : out) {
    if (!std::isfinite(s.score)) throw DataError("non-finite score for sample " + std::to_string(s.id));
  }
  return out;
}

MetricReport summarize(std::span<const SampleScore> samples) {
  std::vector<ScoredOutcome> outcomes;
  outcomes.reserve(samples.size());
  MetricReport r;
  for (const auto& s : samples) {
    outcomes.push_back({s.score, s.correct()});
    r.n_correct += s.correct() ? 1 : 0;
  }
  r.n = samples.size();
  r.accuracy = r.n == 0 ? 0.0 : static_cast<double>(r.n_correct) / static_cast<double>(r.n);
  r.auc = auroc(outcomes);
  r.apc = average_precision(outcomes, true);
  r.apm = average_precision(outcomes, false);
  return r;
}

MetricReport evaluate(const Scorer& scorer, const Dataset& test, const BaseClassifier& clf, std::size_t threads) {
  const auto samples = score_samples(scorer, test, clf, threads);
  return summarize(samples);
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

namespace {

std::optional<MeanStd> aggregate_metric(std::span<const MetricReport> reports,
                                        std::optional<double> MetricReport::*field) {
  std::vector<double> values;
  for (const auto& r : reports) {
    if (!(r.*field)) return std::nullopt;
    values.push_back(*(r.*field));
  }
  if (values.empty()) return std::nullopt;
  return mean_std(values);
}

}  // namespace

AggregateReport aggregate(std::span<const MetricReport> reports) {
  AggregateReport a;
  a.runs = reports.size();
  a.auc = aggregate_metric(reports, &MetricReport::auc);
  a.apc = aggregate_metric(reports, &MetricReport::apc);
  a.apm = aggregate_metric(reports, &MetricReport::apm);
  std::vector<double> acc;
  for (const auto& r : reports) acc.push_back(r.accuracy);
  a.accuracy = mean_std(acc);
  return a;
}

std::string format_metric(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

void write_report_csv(const AggregateReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "metric,value,std\n";
  auto row = [&out](const char* name, const std::optional<MeanStd>& m) {
    if (m) {
      out << name << ',' << format_double(m->mean) << ',' << format_double(m->std) << '\n';
    } else {
      out << name << ",NA,NA\n";
    }
  };
  row("auc", report.auc);
  row("apc", report.apc);
  row("apm", report.apm);
  row("accuracy", report.accuracy);
}

void write_scores_csv(std::span<const SampleScore> samples, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "id,predicted,label,score,correct\n";
  for (const auto& s : samples) {
    out << s.id << ',' << s.predicted << ',' << s.label << ',' << format_double(s.score) << ','
        << (s.correct() ? 1 : 0) << '\n';
  }
}

}  // namespace trustagg
