#pragma once

// Command-line front end and the repeated-split evaluation protocol it
// exposes. `run_cli` is the whole program; tools/main.cpp only forwards to it.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "godsbox/data.hpp"
#include "godsbox/metrics.hpp"
#include "godsbox/models.hpp"
#include "godsbox/rcg.hpp"

namespace godsbox::cli {

enum class Algo { bods, gods, kgods };
enum class ThresholdMode { kmeans, quantile };

Algo parse_algo(const std::string& name);
std::string to_string(Algo a);

struct Trained {
  models::AnyModel model;
  rcg::RcgTrace trace;
};

Trained fit_any(Algo algo, const data::DataMatrix& data, const models::HyperParams& hyper,
                const rcg::RcgConfig& cfg, std::uint64_t seed);

struct ProtocolConfig {
  Algo algo = Algo::gods;
  models::HyperParams hyper;
  rcg::RcgConfig rcg;
  std::size_t repeats = 5;
  double train_frac = 0.7;
  std::uint64_t seed = 42;
  ThresholdMode mode = ThresholdMode::kmeans;
  double q = 0.95;
  /// 0 picks the hardware concurrency. Results do not depend on it.
  std::size_t threads = 0;
};

struct ProtocolRun {
  std::uint64_t seed = 0;
  metrics::EvalReport report;
  std::size_t iterations = 0;
};

struct ProtocolResult {
  std::vector<ProtocolRun> runs;  // in seed order
  double mean_f1 = 0.0;
  double mean_f1_bar = 0.0;
  double mean_accuracy = 0.0;
  double mean_auc = 0.0;  // over runs where AUC is defined
};

/// For each repeat r: stratified split with seed + r, fit on the normal rows
/// of the training part, score the test part, threshold, evaluate.
ProtocolResult run_protocol(const data::DataMatrix& labeled, const ProtocolConfig& cfg);

std::string to_json(const ProtocolResult& r, const ProtocolConfig& cfg, int indent = 2);

/// Parses argv and runs one subcommand. Returns the process exit code:
/// 0 success, 1 numerical or internal failure, 2 usage or input error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace godsbox::cli
