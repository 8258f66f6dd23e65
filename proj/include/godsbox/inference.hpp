#pragma once

// Score thresholding. Scores are oriented so that higher means more
// anomalous; a point is an anomaly iff its score is strictly above the
// threshold (ties count as normal).

#include <vector>

namespace godsbox::inference {

struct Decision {
  int label = 0;  // data::kNormal or data::kAnomaly
  double score = 0.0;
  double threshold_used = 0.0;
};

struct Thresholding {
  std::vector<int> labels;
  double threshold = 0.0;

  std::vector<Decision> decisions(const std::vector<double>& scores) const;
};

Decision decide(double score, double threshold);

/// 1-D 2-means: centroids start at min and max, Lloyd iterations until the
/// assignment stops changing; the threshold is the midpoint of the centroids.
/// Throws InvalidArgument for fewer than 2 scores and DegenerateInput when
/// all scores are equal.
Thresholding classify_kmeans2(const std::vector<double>& scores);

/// Linear-interpolation quantile (sample positions 0..n-1, h = q(n-1)).
double quantile(std::vector<double> values, double q);

/// Threshold at the q-quantile of `train_scores`, applied to `test_scores`.
Thresholding classify_quantile(const std::vector<double>& train_scores,
                               const std::vector<double>& test_scores, double q = 0.95);

}  // namespace godsbox::inference
