#include "godsbox/metrics.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "godsbox/data.hpp"
#include "godsbox/error.hpp"

namespace godsbox::metrics {

using data::kAnomaly;
using data::kNormal;

namespace {

void require_label(int y) {
  if (y != kNormal && y != kAnomaly) {
    throw InvalidArgument("labels must be +1 or -1, got " + std::to_string(y));
  }
}

double ratio(std::size_t num, std::size_t den, const char* name, std::vector<std::string>& flags) {
  if (den == 0) {
    flags.emplace_back(name);
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double a, double b, const char* name, std::vector<std::string>& flags) {
  if (a + b == 0.0) {
    flags.emplace_back(name);
    return 0.0;
  }
  return 2.0 * a * b / (a + b);
}

}  // namespace

Confusion confusion(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw InvalidArgument("predicted and true labels differ in length (" +
                          std::to_string(predicted.size()) + " vs " +
                          std::to_string(truth.size()) + ")");
  }
  if (truth.empty()) throw InvalidArgument("cannot evaluate an empty label set");
  Confusion c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require_label(predicted[i]);
    require_label(truth[i]);
    if (truth[i] == kNormal) {
      (predicted[i] == kNormal ? c.tp : c.fn) += 1;
    } else {
      (predicted[i] == kAnomaly ? c.tn : c.fp) += 1;
    }
  }
  return c;
}

EvalReport report(const std::vector<int>& predicted, const std::vector<int>& truth) {
  EvalReport r;
  r.counts = confusion(predicted, truth);
  const Confusion& c = r.counts;
  auto& flags = r.zero_denominators;
  r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  r.precision = ratio(c.tp, c.tp + c.fp, "precision", flags);
  r.recall = ratio(c.tp, c.tp + c.fn, "recall", flags);
  r.f1 = harmonic(r.precision, r.recall, "f1", flags);
  r.tnr = ratio(c.tn, c.tn + c.fp, "tnr", flags);
  r.npv = ratio(c.tn, c.tn + c.fn, "npv", flags);
  r.f1_bar = harmonic(r.tnr, r.npv, "f1_bar", flags);
  return r;
}

double auc(const std::vector<double>& scores, const std::vector<int>& truth) {
  if (scores.size() != truth.size()) {
    throw InvalidArgument("scores and labels differ in length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of midranks of the anomalies.
  double rank_sum = 0.0;
  std::size_t n_anom = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      require_label(truth[order[t]]);
      if (truth[order[t]] == kAnomaly) {
        rank_sum += midrank;
        ++n_anom;
      }
    }
    i = j;
  }
  const std::size_t n_norm = truth.size() - n_anom;
  if (n_anom == 0 || n_norm == 0) throw ValidationError("AUC needs both classes present");
  const double a = static_cast<double>(n_anom);
  return (rank_sum - a * (a + 1.0) / 2.0) / (a * static_cast<double>(n_norm));
}

double false_alarm_rate(const std::vector<int>& predicted, const std::vector<int>& truth) {
  const Confusion c = confusion(predicted, truth);
  if (c.tp + c.fn == 0) throw ValidationError("false alarm rate needs at least one true normal");
  return static_cast<double>(c.fn) / static_cast<double>(c.tp + c.fn);
}

std::string to_json(const EvalReport& r, int indent) {
  nlohmann::ordered_json j;
  j["tp"] = r.counts.tp;
  j["fp"] = r.counts.fp;
  j["tn"] = r.counts.tn;
  j["fn"] = r.counts.fn;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["tnr"] = r.tnr;
  j["npv"] = r.npv;
  j["f1_bar"] = r.f1_bar;
  j["auc"] = r.auc ? nlohmann::ordered_json(*r.auc) : nlohmann::ordered_json(nullptr);
  j["false_alarm_rate"] = r.false_alarm_rate ? nlohmann::ordered_json(*r.false_alarm_rate)
                                             : nlohmann::ordered_json(nullptr);
  j["zero_denominators"] = r.zero_denominators;
  return j.dump(indent);
}

EvalReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    EvalReport r;
    r.counts = {j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(),
                j.at("tn").get<std::size_t>(), j.at("fn").get<std::size_t>()};
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.tnr = j.at("tnr").get<double>();
    r.npv = j.at("npv").get<double>();
    r.f1_bar = j.at("f1_bar").get<double>();
    if (!j.at("auc").is_null()) r.auc = j.at("auc").get<double>();
    if (!j.at("false_alarm_rate").is_null()) {
      r.false_alarm_rate = j.at("false_alarm_rate").get<double>();
    }
    r.zero_denominators = j.at("zero_denominators").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed evaluation report: ") + e.what());
  }
}

}  // namespace godsbox::metrics
