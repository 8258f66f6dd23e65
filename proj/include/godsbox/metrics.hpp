#pragma once

// Binary evaluation with normal (+1) as the positive class. F1 is computed on
// normals, F1-bar on anomalies (TNR and NPV as recall and precision).

#include <optional>
#include <string>
#include <vector>

namespace godsbox::metrics {

struct Confusion {
  std::size_t tp = 0;  // normal predicted normal
  std::size_t fp = 0;  // anomaly predicted normal
  std::size_t tn = 0;  // anomaly predicted anomaly
  std::size_t fn = 0;  // normal predicted anomaly

  std::size_t total() const { return tp + fp + tn + fn; }
};

/// Throws InvalidArgument on length mismatch, empty input or labels other than +-1.
Confusion confusion(const std::vector<int>& predicted, const std::vector<int>& truth);

struct EvalReport {
  Confusion counts;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double tnr = 0.0;
  double npv = 0.0;
  double f1_bar = 0.0;
  std::optional<double> auc;
  std::optional<double> false_alarm_rate;
  /// Names of ratios whose denominator was zero (reported as 0).
  std::vector<std::string> zero_denominators;
};

EvalReport report(const std::vector<int>& predicted, const std::vector<int>& truth);

/// ROC area with anomalies as the detection target (higher score = more
/// anomalous), via the Mann-Whitney statistic with ties counted as 1/2.
/// Throws ValidationError unless both classes are present.
double auc(const std::vector<double>& scores, const std::vector<int>& truth);

/// Fraction of true normals predicted anomalous. Throws ValidationError when
/// there are no true normals.
double false_alarm_rate(const std::vector<int>& predicted, const std::vector<int>& truth);

std::string to_json(const EvalReport& r, int indent = 2);
EvalReport report_from_json(const std::string& text);

}  // namespace godsbox::metrics
