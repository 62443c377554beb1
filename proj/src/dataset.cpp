#include "trustagg/dataset.hpp"

#include "trustagg/error.hpp"
#include "trustagg/format.hpp"
#include "trustagg/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace trustagg {

Dataset::Dataset(FeatureMatrix features, std::vector<int> labels, int num_classes,
                 std::vector<SampleId> ids, ColumnLayout layout)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      ids_(std::move(ids)),
      layout_(std::move(layout)) {
  if (num_classes_ < 2) throw DataError("dataset needs at least 2 classes, got " + std::to_string(num_classes_));
  if (static_cast<std::size_t>(features_.rows()) != labels_.size() || ids_.size() != labels_.size()) {
    throw DataError("dataset shape mismatch: " + std::to_string(features_.rows()) + " feature rows, " +
                    std::to_string(labels_.size()) + " labels, " + std::to_string(ids_.size()) + " ids");
  }
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_), 0);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const int y = labels_[i];
    if (y < 0 || y >= num_classes_) {
      throw DataError("label " + std::to_string(y) + " of sample " + std::to_string(ids_[i]) +
                      " outside [0, " + std::to_string(num_classes_) + ")");
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  for (int c = 0; c < num_classes_; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) throw DataError("class " + std::to_string(c) + " absent");
  }
  if (!features_.allFinite()) throw DataError("features contain NaN or Inf");
  std::unordered_set<SampleId> seen;
  seen.reserve(ids_.size());
  for (SampleId id : ids_) {
    if (!seen.insert(id).second) throw DataError("duplicate sample id " + std::to_string(id));
  }
  if (layout_.feature_names.empty() && features_.cols() > 0) {
    for (Eigen::Index j = 0; j < features_.cols(); ++j) layout_.feature_names.push_back("x" + std::to_string(j));
    layout_.label_position = layout_.feature_names.size();
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  FeatureMatrix f(static_cast<Eigen::Index>(rows.size()), features_.cols());
  std::vector<int> y;
  std::vector<SampleId> id;
  y.reserve(rows.size());
  id.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    f.row(static_cast<Eigen::Index>(k)) = features_.row(static_cast<Eigen::Index>(rows[k]));
    y.push_back(labels_[rows[k]]);
    id.push_back(ids_[rows[k]]);
  }
  return Dataset(std::move(f), std::move(y), num_classes_, std::move(id), layout_);
}

Dataset Dataset::with_features(FeatureMatrix features) const {
  if (features.rows() != features_.rows() || features.cols() != features_.cols()) {
    throw DataError("with_features: shape mismatch");
  }
  return Dataset(std::move(features), labels_, num_classes_, ids_, layout_);
}

Dataset Dataset::with_labels(std::vector<int> labels) const {
  return Dataset(features_, std::move(labels), num_classes_, ids_, layout_);
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_), 0);
  for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

// ---------------------------------------------------------------- CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

std::string cell_ref(std::size_t row, std::size_t col, const std::string& name) {
  return "row " + std::to_string(row) + ", column " + std::to_string(col) + " ('" + name + "')";
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!trim(line).empty()) return true;
    }
    return false;
  };

  if (!next_line()) throw CsvError(CsvError::Reason::empty_file, 0, 0, path.string() + ": empty file");
  // Strip a UTF-8 byte order mark.
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  std::vector<std::string> header;
  for (auto f : split_fields(line)) header.emplace_back(f);
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    throw CsvError(CsvError::Reason::missing_column, line_no, header.size(),
                   path.string() + ": missing label column '" + label_column + "'");
  }
  const std::size_t label_pos = static_cast<std::size_t>(label_it - header.begin());

  ColumnLayout layout;
  layout.label_name = label_column;
  layout.label_position = label_pos;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j != label_pos) layout.feature_names.push_back(header[j]);
  }
  const std::size_t dim = layout.feature_names.size();

  std::vector<double> values;
  std::vector<int> labels;
  while (next_line()) {
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw CsvError(CsvError::Reason::ragged_row, line_no, std::min(fields.size(), header.size()),
                     path.string() + ": row " + std::to_string(line_no) + " has " +
                         std::to_string(fields.size()) + " fields, header has " +
                         std::to_string(header.size()));
    }
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const std::string_view cell = fields[j];
      if (j == label_pos) {
        long long y = 0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), y);
        if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
          throw CsvError(CsvError::Reason::bad_label, line_no, j,
                         path.string() + ": non-integer label '" + std::string(cell) + "' at " +
                             cell_ref(line_no, j, header[j]));
        }
        if (y < 0 || y > 1'000'000) {
          throw CsvError(CsvError::Reason::bad_label, line_no, j,
                         path.string() + ": label " + std::string(cell) + " out of range at " +
                             cell_ref(line_no, j, header[j]));
        }
        labels.push_back(static_cast<int>(y));
        continue;
      }
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        throw CsvError(CsvError::Reason::non_numeric, line_no, j,
                       path.string() + ": non-numeric value '" + std::string(cell) + "' at " +
                           cell_ref(line_no, j, header[j]));
      }
      if (!std::isfinite(v)) {
        throw CsvError(CsvError::Reason::non_finite, line_no, j,
                       path.string() + ": " + std::string(std::isnan(v) ? "NaN" : "infinite") +
                           " value at " + cell_ref(line_no, j, header[j]));
      }
      values.push_back(v);
    }
  }
  if (labels.empty()) throw CsvError(CsvError::Reason::empty_file, line_no, 0, path.string() + ": no data rows");

  const std::size_t n = labels.size();
  FeatureMatrix features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::copy(values.begin(), values.end(), features.data());
  const int num_classes = 1 + *std::max_element(labels.begin(), labels.end());
  std::vector<SampleId> ids(n);
  std::iota(ids.begin(), ids.end(), SampleId{0});
  return Dataset(std::move(features), std::move(labels), num_classes, std::move(ids), std::move(layout));
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  const auto& layout = ds.layout();
  const std::size_t columns = layout.feature_names.size() + 1;
  std::string line;
  std::size_t f = 0;
  for (std::size_t j = 0; j < columns; ++j) {
    if (j) line += ',';
    line += (j == layout.label_position) ? layout.label_name : layout.feature_names[f++];
  }
  out << line << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    line.clear();
    const auto row = ds.row(i);
    f = 0;
    for (std::size_t j = 0; j < columns; ++j) {
      if (j) line += ',';
      if (j == layout.label_position) {
        line += std::to_string(ds.label(i));
      } else {
        line += format_double(row[f++]);
      }
    }
    out << line << '\n';
  }
}

// ---------------------------------------------------------------- splits

std::vector<std::vector<std::size_t>> split_indices(const Dataset& ds, const SplitSpec& spec) {
  const double fracs[3] = {spec.train_frac, spec.val_frac, spec.test_frac};
  for (double f : fracs) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
  }
  if (std::abs(fracs[0] + fracs[1] + fracs[2] - 1.0) > 1e-12) {
    throw ConfigError("fractions must sum to 1");
  }

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes()));
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);

  Rng rng(spec.seed);
  std::vector<std::vector<std::size_t>> parts(3);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    const std::size_t n = members.size();
    if (n < 3) {
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(n) +
                      " samples; stratified split needs at least 3");
    }
    std::shuffle(members.begin(), members.end(), rng);

    // Largest-remainder allocation with at least one sample per split.
    std::size_t sizes[3];
    double remainders[3];
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double exact = fracs[s] * static_cast<double>(n);
      sizes[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      remainders[s] = exact - static_cast<double>(sizes[s]);
      assigned += sizes[s];
    }
    while (assigned < n) {
      int best = 0;
      for (int s = 1; s < 3; ++s) {
        if (remainders[s] > remainders[best]) best = s;
      }
      ++sizes[best];
      remainders[best] = -1.0;
      ++assigned;
    }
    for (int s = 0; s < 3; ++s) {
      while (sizes[s] == 0) {
        int donor = 0;
        for (int t = 1; t < 3; ++t) {
          if (sizes[t] > sizes[donor]) donor = t;
        }
        --sizes[donor];
        ++sizes[s];
      }
    }
    std::size_t offset = 0;
    for (int s = 0; s < 3; ++s) {
      parts[static_cast<std::size_t>(s)].insert(parts[static_cast<std::size_t>(s)].end(),
                                                 members.begin() + static_cast<std::ptrdiff_t>(offset),
                                                 members.begin() + static_cast<std::ptrdiff_t>(offset + sizes[s]));
      offset += sizes[s];
    }
  }
  for (auto& p : parts) std::sort(p.begin(), p.end());
  return parts;
}

Splits split(const Dataset& ds, const SplitSpec& spec) {
  const auto parts = split_indices(ds, spec);
  return Splits{ds.subset(parts[0]), ds.subset(parts[1]), ds.subset(parts[2])};
}

// ---------------------------------------------------------------- standardizer

Standardizer Standardizer::fit(const Dataset& train) {
  if (train.size() == 0) throw DataError("cannot fit standardizer on an empty split");
  Standardizer s;
  const auto& x = train.features();
  const double n = static_cast<double>(train.size());
  s.mean_ = x.colwise().sum().transpose() / n;
  s.stddev_.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean_(j)).square().sum() / n;
    s.stddev_(j) = std::max(std::sqrt(var), kStdFloor);
  }
  return s;
}

Dataset Standardizer::apply(const Dataset& ds) const {
  if (static_cast<Eigen::Index>(ds.dim()) != mean_.size()) throw DataError("standardizer dimension mismatch");
  FeatureMatrix out = ds.features();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out.row(i) = (out.row(i) - mean_.transpose()).cwiseQuotient(stddev_.transpose());
  }
  return ds.with_features(std::move(out));
}

Dataset Standardizer::invert(const Dataset& ds) const {
  if (static_cast<Eigen::Index>(ds.dim()) != mean_.size()) throw DataError("standardizer dimension mismatch");
  FeatureMatrix out = ds.features();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out.row(i) = out.row(i).cwiseProduct(stddev_.transpose()) + mean_.transpose();
  }
  return ds.with_features(std::move(out));
}

// ---------------------------------------------------------------- generators

Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n < 4) throw ConfigError("two moons needs n >= 4, got " + std::to_string(n));
  if (!(noise >= 0.0)) throw ConfigError("two moons noise must be >= 0");
  const std::size_t n_upper = (n + 1) / 2;
  const std::size_t n_lower = n - n_upper;
  FeatureMatrix x(static_cast<Eigen::Index>(n), 2);
  std::vector<int> y(n);
  auto angle = [](std::size_t k, std::size_t count) {
    return count > 1 ? std::numbers::pi * static_cast<double>(k) / static_cast<double>(count - 1) : 0.0;
  };
  for (std::size_t k = 0; k < n_upper; ++k) {
    const double t = angle(k, n_upper);
    x(static_cast<Eigen::Index>(k), 0) = std::cos(t);
    x(static_cast<Eigen::Index>(k), 1) = std::sin(t);
    y[k] = 0;
  }
  for (std::size_t k = 0; k < n_lower; ++k) {
    const double t = angle(k, n_lower);
    const auto i = static_cast<Eigen::Index>(n_upper + k);
    x(i, 0) = 1.0 - std::cos(t);
    x(i, 1) = 0.5 - std::sin(t);
    y[n_upper + k] = 1;
  }
  if (noise > 0.0) {
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, noise);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      x(i, 0) += gauss(rng);
      x(i, 1) += gauss(rng);
    }
  }
  std::vector<SampleId> ids(n);
  std::iota(ids.begin(), ids.end(), SampleId{0});
  return Dataset(std::move(x), std::move(y), 2, std::move(ids));
}

Dataset make_blobs(std::size_t n, const Eigen::MatrixXd& centers, double stddev, std::uint64_t seed) {
  const auto classes = static_cast<std::size_t>(centers.rows());
  if (classes < 2) throw ConfigError("blobs need at least 2 centers");
  if (n < classes) throw ConfigError("blobs need at least one sample per center");
  if (!(stddev >= 0.0)) throw ConfigError("blob stddev must be >= 0");
  FeatureMatrix x(static_cast<Eigen::Index>(n), centers.cols());
  std::vector<int> y(n);
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(i % classes);
    y[i] = static_cast<int>(c);
    for (Eigen::Index j = 0; j < centers.cols(); ++j) {
      x(static_cast<Eigen::Index>(i), j) = centers(c, j) + stddev * gauss(rng);
    }
  }
  std::vector<SampleId> ids(n);
  std::iota(ids.begin(), ids.end(), SampleId{0});
  return Dataset(std::move(x), std::move(y), static_cast<int>(classes), std::move(ids));
}

Eigen::MatrixXd random_centers(int num_classes, std::size_t dim, double spread, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(-spread, spread);
  Eigen::MatrixXd centers(num_classes, static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < centers.rows(); ++i) {
    for (Eigen::Index j = 0; j < centers.cols(); ++j) centers(i, j) = unif(rng);
  }
  return centers;
}

NoisyLabels inject_label_noise(const Dataset& ds, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("label noise rate must be in [0, 1)");
  const std::size_t n = ds.size();
  const auto n_flip = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<int> labels = ds.labels();
  std::vector<bool> flipped(n, false);
  std::uniform_int_distribution<int> other(1, ds.num_classes() - 1);
  for (std::size_t k = 0; k < n_flip; ++k) {
    const std::size_t i = order[k];
    labels[i] = (labels[i] + other(rng)) % ds.num_classes();
    flipped[i] = true;
  }
  return NoisyLabels{ds.with_labels(std::move(labels)), std::move(flipped)};
}

}  // namespace trustagg
