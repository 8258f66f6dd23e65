#include "godsbox/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "godsbox/data.hpp"
#include "godsbox/error.hpp"

namespace godsbox::inference {

Decision decide(double score, double threshold) {
  return {score > threshold ? data::kAnomaly : data::kNormal, score, threshold};
}

std::vector<Decision> Thresholding::decisions(const std::vector<double>& scores) const {
  std::vector<Decision> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(decide(s, threshold));
  return out;
}

namespace {

void require_finite(const std::vector<double>& scores) {
  for (double s : scores) {
    if (!std::isfinite(s)) throw InvalidArgument("scores must be finite");
  }
}

std::vector<int> label_all(const std::vector<double>& scores, double threshold) {
  std::vector<int> labels;
  labels.reserve(scores.size());
  for (double s : scores) labels.push_back(decide(s, threshold).label);
  return labels;
}

}  // namespace

Thresholding classify_kmeans2(const std::vector<double>& scores) {
  if (scores.size() < 2) throw InvalidArgument("2-means thresholding needs at least 2 scores");
  require_finite(scores);
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  double lo = *lo_it;
  double hi = *hi_it;
  if (lo == hi) {
    throw DegenerateInput("all scores are equal; use quantile thresholding instead");
  }

  // The min always stays with the low centroid and the max with the high one,
  // so neither cluster can empty out.
  std::vector<bool> upper(scores.size(), false);
  for (bool changed = true; changed;) {
    const double mid = 0.5 * (lo + hi);
    changed = false;
    double sum_lo = 0.0, sum_hi = 0.0;
    std::size_t n_lo = 0, n_hi = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool u = scores[i] > mid;
      changed = changed || u != upper[i];
      upper[i] = u;
      if (u) {
        sum_hi += scores[i];
        ++n_hi;
      } else {
        sum_lo += scores[i];
        ++n_lo;
      }
    }
    lo = sum_lo / static_cast<double>(n_lo);
    hi = sum_hi / static_cast<double>(n_hi);
  }

  Thresholding out;
  out.threshold = 0.5 * (lo + hi);
  out.labels = label_all(scores, out.threshold);
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile level must lie in [0, 1]");
  require_finite(values);
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto j = static_cast<std::size_t>(std::floor(h));
  if (j + 1 >= values.size()) return values.back();
  return values[j] + (h - static_cast<double>(j)) * (values[j + 1] - values[j]);
}

Thresholding classify_quantile(const std::vector<double>& train_scores,
                               const std::vector<double>& test_scores, double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw InvalidArgument("quantile q must lie strictly between 0 and 1, got " +
                          std::to_string(q));
  }
  if (train_scores.empty()) throw InvalidArgument("quantile thresholding needs training scores");
  require_finite(test_scores);
  Thresholding out;
  out.threshold = quantile(train_scores, q);
  out.labels = label_all(test_scores, out.threshold);
  return out;
}

}  // namespace godsbox::inference
