#include "godsbox/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string_view>

#include "godsbox/error.hpp"
#include "godsbox/rng.hpp"

namespace godsbox::data {

DataMatrix::DataMatrix(MatrixXd x, std::optional<std::vector<int>> labels,
                       std::vector<std::string> feature_names)
    : x_(std::move(x)), labels_(std::move(labels)), feature_names_(std::move(feature_names)) {
  if (x_.rows() < 1 || x_.cols() < 1) {
    throw ValidationError("data matrix must have at least one row and one column");
  }
  if (!x_.allFinite()) {
    for (Index i = 0; i < x_.rows(); ++i) {
      for (Index j = 0; j < x_.cols(); ++j) {
        if (!std::isfinite(x_(i, j))) {
          throw ValidationError("non-finite value at row " + std::to_string(i) + ", column " +
                                std::to_string(j));
        }
      }
    }
  }
  if (labels_) {
    if (static_cast<Index>(labels_->size()) != x_.rows()) {
      throw ValidationError("label count " + std::to_string(labels_->size()) +
                            " does not match row count " + std::to_string(x_.rows()));
    }
    for (std::size_t i = 0; i < labels_->size(); ++i) {
      const int l = (*labels_)[i];
      if (l != kNormal && l != kAnomaly) {
        throw ValidationError("label at row " + std::to_string(i) + " is " + std::to_string(l) +
                              ", expected +1 or -1");
      }
    }
  }
  if (!feature_names_.empty() && static_cast<Index>(feature_names_.size()) != x_.cols()) {
    throw ValidationError("feature name count does not match column count");
  }
}

const std::vector<int>& DataMatrix::labels() const {
  if (!labels_) throw InvalidArgument("data matrix has no labels");
  return *labels_;
}

DataMatrix DataMatrix::select(const std::vector<Index>& rows) const {
  MatrixXd x(static_cast<Index>(rows.size()), x_.cols());
  std::optional<std::vector<int>> labels;
  if (labels_) labels.emplace();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x_.rows()) throw InvalidArgument("row index out of range");
    x.row(static_cast<Index>(i)) = x_.row(rows[i]);
    if (labels_) labels->push_back((*labels_)[static_cast<std::size_t>(rows[i])]);
  }
  return DataMatrix(std::move(x), std::move(labels), feature_names_);
}

DataMatrix DataMatrix::normals_only() const {
  if (!labels_) return *this;
  std::vector<Index> keep;
  for (std::size_t i = 0; i < labels_->size(); ++i) {
    if ((*labels_)[i] == kNormal) keep.push_back(static_cast<Index>(i));
  }
  if (keep.empty()) throw ValidationError("no normal rows in labeled data");
  return select(keep);
}

DataMatrix DataMatrix::with_x(MatrixXd x) const {
  return DataMatrix(std::move(x), labels_, feature_names_);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

int parse_label(std::string_view s, std::size_t row, std::size_t col) {
  const std::string l = lower(s);
  if (l == "normal") return kNormal;
  if (l == "anomaly") return kAnomaly;
  const auto v = parse_number(s);
  if (!v) throw ParseError("unrecognized label '" + std::string(s) + "'", row, col);
  if (*v == 1.0) return kNormal;
  if (*v == -1.0) return kAnomaly;
  throw ValidationError("label '" + std::string(s) + "' at row " + std::to_string(row) +
                        " is not +1/-1");
}

}  // namespace

DataMatrix read_csv(std::istream& in, const CsvOptions& options) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::optional<std::size_t> label_idx;

  const auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (!trim(line).empty()) return true;
    }
    return false;
  };

  if (options.has_header) {
    if (!next_line()) throw ValidationError("CSV input is empty");
    for (auto f : split_fields(line)) header.emplace_back(f);
  }
  if (options.label_column) {
    if (!options.has_header) {
      throw InvalidArgument("label column '" + *options.label_column + "' needs a header row");
    }
    const auto it = std::find(header.begin(), header.end(), *options.label_column);
    if (it == header.end()) {
      throw InvalidArgument("label column '" + *options.label_column + "' not found in header");
    }
    label_idx = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t width = options.has_header ? header.size() : 0;
  while (next_line()) {
    const auto fields = split_fields(line);
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no, fields.size());
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (label_idx && c == *label_idx) {
        labels.push_back(parse_label(fields[c], line_no, c + 1));
        continue;
      }
      const auto v = parse_number(fields[c]);
      if (!v) {
        throw ParseError("non-numeric cell '" + std::string(fields[c]) + "'", line_no, c + 1);
      }
      if (!std::isfinite(*v)) {
        throw ValidationError("non-finite value '" + std::string(fields[c]) + "' at row " +
                              std::to_string(line_no) + ", column " + std::to_string(c + 1));
      }
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("CSV input has no data rows");

  const Index n = static_cast<Index>(rows.size());
  const Index d = static_cast<Index>(rows.front().size());
  MatrixXd x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!label_idx || c != *label_idx) names.push_back(header[c]);
  }
  std::optional<std::vector<int>> lab;
  if (label_idx) lab = std::move(labels);
  return DataMatrix(std::move(x), std::move(lab), std::move(names));
}

DataMatrix load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open input file '" + path.string() + "'");
  return read_csv(in, options);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const DataMatrix& dm) {
  for (Index j = 0; j < dm.dim(); ++j) {
    if (j) out << ',';
    out << (dm.feature_names().empty() ? "f" + std::to_string(j)
                                       : dm.feature_names()[static_cast<std::size_t>(j)]);
  }
  if (dm.has_labels()) out << ",y";
  out << '\n';
  for (Index i = 0; i < dm.samples(); ++i) {
    for (Index j = 0; j < dm.dim(); ++j) {
      if (j) out << ',';
      out << format_double(dm.x()(i, j));
    }
    if (dm.has_labels()) out << (dm.labels()[static_cast<std::size_t>(i)] == kNormal ? ",+1" : ",-1");
    out << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const DataMatrix& dm) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open output file '" + path.string() + "'");
  write_csv(out, dm);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------

VectorXd normalize_row(const VectorXd& row) {
  const double norm = row.norm();
  if (!(norm > 0.0)) throw ValidationError("cannot normalize a zero row");
  return row / norm;
}

DataMatrix normalize_rows(const DataMatrix& dm) {
  MatrixXd x = dm.x();
  for (Index i = 0; i < x.rows(); ++i) {
    const double norm = x.row(i).norm();
    if (!(norm > 0.0)) {
      throw ValidationError("cannot normalize zero row at index " + std::to_string(i));
    }
    x.row(i) /= norm;
  }
  return dm.with_x(std::move(x));
}

namespace {

void shuffle(std::vector<Index>& idx, SplitMix64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

std::size_t train_count(std::size_t n, double frac) {
  return static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
}

}  // namespace

std::pair<DataMatrix, DataMatrix> split(const DataMatrix& dm, double train_frac,
                                        std::uint64_t seed, bool stratified) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw InvalidArgument("train fraction must lie in (0, 1)");
  }
  SplitMix64 rng(seed);
  std::vector<Index> train;
  std::vector<Index> test;
  const auto take = [&](std::vector<Index> idx) {
    shuffle(idx, rng);
    const std::size_t m = train_count(idx.size(), train_frac);
    train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
    test.insert(test.end(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end());
  };

  if (stratified) {
    const auto& labels = dm.labels();
    for (const int cls : {kNormal, kAnomaly}) {
      std::vector<Index> idx;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == cls) idx.push_back(static_cast<Index>(i));
      }
      if (idx.empty()) continue;
      if (idx.size() < 2) {
        throw ValidationError("class " + std::to_string(cls) +
                              " has fewer than 2 samples; cannot stratify");
      }
      take(std::move(idx));
    }
  } else {
    std::vector<Index> idx(static_cast<std::size_t>(dm.samples()));
    std::iota(idx.begin(), idx.end(), Index{0});
    take(std::move(idx));
  }
  if (train.empty() || test.empty()) {
    throw ValidationError("split leaves an empty side (n = " + std::to_string(dm.samples()) + ")");
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {dm.select(train), dm.select(test)};
}

DataMatrix gen_gaussian(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("gen_gaussian needs n >= 1");
  SplitMix64 rng(seed);
  MatrixXd x(static_cast<Index>(n), 2);
  for (Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
  }
  return DataMatrix(std::move(x), std::nullopt, {"x1", "x2"});
}

DataMatrix gen_arbitrary(std::size_t n, std::uint64_t seed, double noise) {
  if (n < 1) throw InvalidArgument("gen_arbitrary needs n >= 1");
  SplitMix64 rng(seed);
  MatrixXd x(static_cast<Index>(n), 2);
  for (Index i = 0; i < x.rows(); ++i) {
    const double t = 2.0 * (1.0 - rng.uniform());  // (0, 2]
    const double sign = rng.normal() >= 0.0 ? 1.0 : -1.0;
    const double u = rng.uniform();
    x(i, 0) = t;
    x(i, 1) = std::sqrt(t) * (t + noise * sign * u);
  }
  return DataMatrix(std::move(x), std::nullopt, {"x1", "x2"});
}

}  // namespace godsbox::data
