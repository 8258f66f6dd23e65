#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace godsbox::data {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int kNormal = +1;
inline constexpr int kAnomaly = -1;

/// n samples x d features, optionally labeled (+1 normal, -1 anomaly).
/// Construction validates: n >= 1, d >= 1, all entries finite, labels in {+1, -1}.
class DataMatrix {
 public:
  explicit DataMatrix(MatrixXd x, std::optional<std::vector<int>> labels = std::nullopt,
                      std::vector<std::string> feature_names = {});

  const MatrixXd& x() const { return x_; }
  Index samples() const { return x_.rows(); }
  Index dim() const { return x_.cols(); }

  bool has_labels() const { return labels_.has_value(); }
  /// Throws InvalidArgument when unlabeled.
  const std::vector<int>& labels() const;
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  DataMatrix select(const std::vector<Index>& rows) const;
  /// Rows labeled normal; unlabeled data is returned unchanged.
  DataMatrix normals_only() const;
  DataMatrix with_x(MatrixXd x) const;

 private:
  MatrixXd x_;
  std::optional<std::vector<int>> labels_;
  std::vector<std::string> feature_names_;
};

struct CsvOptions {
  std::optional<std::string> label_column;
  bool has_header = true;
};

DataMatrix read_csv(std::istream& in, const CsvOptions& options);
/// Throws IoError naming the path when the file cannot be opened.
DataMatrix load_csv(const std::filesystem::path& path, const CsvOptions& options);

/// Header row (feature names, then "y" when labeled), 17 significant digits.
void write_csv(std::ostream& out, const DataMatrix& dm);
void save_csv(const std::filesystem::path& path, const DataMatrix& dm);

/// printf("%.17g"): round-trips every finite double.
std::string format_double(double v);

/// Scales every row to unit L2 norm; a zero row is a ValidationError.
DataMatrix normalize_rows(const DataMatrix& dm);
VectorXd normalize_row(const VectorXd& row);

/// Seeded shuffle split. With `stratified`, each class contributes
/// round(train_frac * n_class) rows to train.
std::pair<DataMatrix, DataMatrix> split(const DataMatrix& dm, double train_frac,
                                        std::uint64_t seed, bool stratified);

/// n standard-normal points in R^2.
DataMatrix gen_gaussian(std::size_t n, std::uint64_t seed);

/// n points (x, sqrt(x) * (x + noise * s * u)) with x ~ U(0, 2], s a random
/// sign and u ~ U[0, 1). noise = 0 gives the curve y = x^{3/2}.
DataMatrix gen_arbitrary(std::size_t n, std::uint64_t seed, double noise = 1.0);

}  // namespace godsbox::data
