#include "godsbox/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "godsbox/error.hpp"
#include "godsbox/inference.hpp"
#include "godsbox/model_io.hpp"

namespace godsbox::cli {

using data::DataMatrix;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using models::HyperParams;

Algo parse_algo(const std::string& name) {
  if (name == "bods") return Algo::bods;
  if (name == "gods") return Algo::gods;
  if (name == "kgods") return Algo::kgods;
  throw InvalidArgument("unknown algorithm '" + name + "' (expected bods, gods or kgods)");
}

std::string to_string(Algo a) {
  switch (a) {
    case Algo::bods: return "bods";
    case Algo::gods: return "gods";
    case Algo::kgods: return "kgods";
  }
  return "?";
}

Trained fit_any(Algo algo, const DataMatrix& data, const HyperParams& hyper,
                const rcg::RcgConfig& cfg, std::uint64_t seed) {
  switch (algo) {
    case Algo::bods: {
      auto f = models::fit_bods(data, hyper, cfg, seed);
      return {std::move(f.model), std::move(f.trace)};
    }
    case Algo::gods: {
      auto f = models::fit_gods(data, hyper, cfg, seed);
      return {std::move(f.model), std::move(f.trace)};
    }
    case Algo::kgods: {
      auto f = models::fit_kgods(data, hyper, cfg, seed);
      return {std::move(f.model), std::move(f.trace)};
    }
  }
  throw InvalidArgument("unknown algorithm");
}

namespace {

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inference::Thresholding threshold(ThresholdMode mode, double q, const std::vector<double>& train,
                                  const std::vector<double>& test) {
  if (mode == ThresholdMode::kmeans) return inference::classify_kmeans2(test);
  return inference::classify_quantile(train, test, q);
}

metrics::EvalReport evaluate(const std::vector<double>& scores, const std::vector<int>& labels,
                             const std::vector<int>& predicted) {
  metrics::EvalReport r = metrics::report(predicted, labels);
  const bool has_normal = std::count(labels.begin(), labels.end(), data::kNormal) > 0;
  const bool has_anomaly = std::count(labels.begin(), labels.end(), data::kAnomaly) > 0;
  if (has_normal && has_anomaly) r.auc = metrics::auc(scores, labels);
  if (has_normal) r.false_alarm_rate = metrics::false_alarm_rate(predicted, labels);
  return r;
}

}  // namespace

ProtocolResult run_protocol(const DataMatrix& labeled, const ProtocolConfig& cfg) {
  if (!labeled.has_labels()) throw InvalidArgument("the evaluation protocol needs labeled data");
  if (cfg.repeats == 0) throw InvalidArgument("repeats must be at least 1");
  cfg.rcg.validate();

  ProtocolResult result;
  result.runs.resize(cfg.repeats);
  std::vector<std::exception_ptr> failures(cfg.repeats);

  const auto run_one = [&](std::size_t r) {
    const std::uint64_t seed = cfg.seed + r;
    const auto [train, test] = data::split(labeled, cfg.train_frac, seed, true);
    const DataMatrix normals = train.normals_only();
    const Trained t = fit_any(cfg.algo, normals, cfg.hyper, cfg.rcg, seed);
    const auto test_scores = to_std(models::score_all(t.model, test));
    std::vector<double> train_scores;
    if (cfg.mode == ThresholdMode::quantile) {
      train_scores = to_std(models::score_all(t.model, normals));
    }
    const auto th = threshold(cfg.mode, cfg.q, train_scores, test_scores);
    result.runs[r] = {seed, evaluate(test_scores, test.labels(), th.labels), t.trace.iterations()};
  };

  std::size_t threads = cfg.threads == 0 ? std::thread::hardware_concurrency() : cfg.threads;
  threads = std::clamp<std::size_t>(threads, 1, cfg.repeats);
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (std::size_t r; (r = next.fetch_add(1)) < cfg.repeats;) {
      try {
        run_one(r);
      } catch (...) {
        failures[r] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  std::size_t auc_runs = 0;
  for (const auto& run : result.runs) {
    result.mean_f1 += run.report.f1;
    result.mean_f1_bar += run.report.f1_bar;
    result.mean_accuracy += run.report.accuracy;
    if (run.report.auc) {
      result.mean_auc += *run.report.auc;
      ++auc_runs;
    }
  }
  const auto n = static_cast<double>(result.runs.size());
  result.mean_f1 /= n;
  result.mean_f1_bar /= n;
  result.mean_accuracy /= n;
  if (auc_runs > 0) result.mean_auc /= static_cast<double>(auc_runs);
  return result;
}

std::string to_json(const ProtocolResult& r, const ProtocolConfig& cfg, int indent) {
  nlohmann::ordered_json j;
  j["algo"] = to_string(cfg.algo);
  j["K"] = cfg.hyper.k;
  j["eta"] = cfg.hyper.eta;
  j["repeats"] = cfg.repeats;
  j["train_frac"] = cfg.train_frac;
  j["seed"] = cfg.seed;
  j["mode"] = cfg.mode == ThresholdMode::kmeans ? "kmeans" : "quantile";
  if (cfg.mode == ThresholdMode::quantile) j["q"] = cfg.q;
  j["mean"] = {{"f1", r.mean_f1},
               {"f1_bar", r.mean_f1_bar},
               {"accuracy", r.mean_accuracy},
               {"auc", r.mean_auc}};
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& run : r.runs) {
    nlohmann::ordered_json e;
    e["seed"] = run.seed;
    e["iterations"] = run.iterations;
    e["report"] = nlohmann::ordered_json::parse(metrics::to_json(run.report));
    j["runs"].push_back(std::move(e));
  }
  return j.dump(indent);
}

// ---------------------------------------------------------------------------
// Command line

namespace {

struct Options {
  std::string algo = "gods";
  std::string input;
  std::string train_input;
  std::optional<std::string> label_col;
  std::string model;
  std::string trace;
  std::string output;
  std::string report;
  std::string mode = "kmeans";
  std::string dist = "gaussian";
  std::string slack = "closed-form";
  std::string config;
  double q = 0.95;
  double noise = 1.0;
  double train_frac = 0.7;
  std::size_t n = 100;
  Index d = 5;
  std::size_t probes = 20;
  std::size_t repeats = 5;
  std::size_t threads = 0;
  std::size_t restart_period = 0;
  bool protocol = false;
  std::uint64_t seed = 42;
  HyperParams hyper;
  rcg::RcgConfig rcg;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("GODSBOX_SEED")) {
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(env, &pos);
      if (pos == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw InvalidArgument(std::string("GODSBOX_SEED is not an unsigned integer: '") + env + "'");
  }
  return 42;
}

void add_model_flags(CLI::App* app, Options& o) {
  app->add_option("--k", o.hyper.k, "hyperplanes per subspace")->capture_default_str();
  app->add_option("--eta", o.hyper.eta, "margin")->capture_default_str();
  app->add_option("--nu", o.hyper.nu, "weight of the lower-margin hinge")->capture_default_str();
  app->add_option("--c", o.hyper.c, "slack penalty")->capture_default_str();
  app->add_option("--normalize-rows", o.hyper.normalize_rows, "unit-normalize rows (true|false)")
      ->capture_default_str();
  app->add_option("--slack", o.slack, "closed-form|zero")
      ->check(CLI::IsMember({"closed-form", "zero"}))
      ->capture_default_str();
  app->add_option("--max-iter", o.rcg.max_iter)->capture_default_str();
  app->add_option("--grad-tol", o.rcg.grad_tol)->capture_default_str();
  app->add_option("--rel-obj-tol", o.rcg.rel_obj_tol)->capture_default_str();
  app->add_option("--armijo-c1", o.rcg.armijo_c1)->capture_default_str();
  app->add_option("--backtrack-factor", o.rcg.backtrack_factor)->capture_default_str();
  app->add_option("--init-step", o.rcg.init_step)->capture_default_str();
  app->add_option("--max-backtracks", o.rcg.max_backtracks)->capture_default_str();
  app->add_option("--restart-period", o.restart_period, "0 = d*K")->capture_default_str();
}

void add_common_flags(CLI::App* app, Options& o) {
  app->add_option("--seed", o.seed, "RNG seed (default: $GODSBOX_SEED or 42)");
  app->add_option("--config", o.config, "JSON file of flag values; explicit flags win");
}

void finalize(Options& o) {
  o.hyper.slack = o.slack == "zero" ? models::SlackMode::zero : models::SlackMode::closed_form;
  if (o.restart_period > 0) o.rcg.restart_period = o.restart_period;
  o.hyper.validate();
  o.rcg.validate();
}

/// Expands `--config file.json` into "--key value" pairs placed directly after
/// the subcommand, so that any explicit flag later on the line overrides them.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path || args.size() < 2) return args;

  std::ifstream in(*path);
  if (!in) throw IoError("cannot open config file " + *path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed config file " + *path + ": " + e.what());
  }
  if (!j.is_object()) throw ValidationError("config file " + *path + " must hold a JSON object");

  std::vector<std::string> injected;
  for (const auto& [key, value] : j.items()) {
    if (key == "config") continue;
    injected.push_back("--" + key);
    if (value.is_string()) {
      injected.push_back(value.get<std::string>());
    } else if (value.is_boolean() || value.is_number()) {
      injected.push_back(value.dump());
    } else {
      throw ValidationError("config value for '" + key + "' must be a scalar");
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + 2);
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + 2, args.end());
  return out;
}

DataMatrix load_input(const std::string& path, const std::optional<std::string>& label_col) {
  if (!std::filesystem::exists(path)) throw IoError("input file not found: " + path);
  return data::load_csv(path, {label_col, true});
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("failed writing " + path);
}

void write_trace(const std::string& path, const rcg::RcgTrace& trace) {
  std::ostringstream s;
  s << "iter,objective,grad_norm,step\n";
  for (const auto& r : trace.records) {
    s << r.iter << ',' << data::format_double(r.objective) << ','
      << data::format_double(r.grad_norm) << ',' << data::format_double(r.step) << '\n';
  }
  write_text(path, s.str());
}

void require_dims(const models::AnyModel& model, const DataMatrix& dm) {
  const Index d = models::feature_dim(model);
  if (dm.dim() != d) {
    throw InvalidArgument("dimension mismatch: model has d = " + std::to_string(d) +
                          ", input has d = " + std::to_string(dm.dim()));
  }
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  DataMatrix dm = load_input(o.input, o.label_col);
  if (dm.has_labels()) {
    const auto before = dm.samples();
    dm = dm.normals_only();
    if (dm.samples() != before) {
      err << "dropped " << (before - dm.samples()) << " anomaly rows from training\n";
    }
  }
  const Trained t = fit_any(parse_algo(o.algo), dm, o.hyper, o.rcg, o.seed);
  model_io::save(o.model, t.model);
  if (!o.trace.empty()) write_trace(o.trace, t.trace);
  out << "trained " << o.algo << " on n = " << dm.samples() << ", d = " << dm.dim() << ": "
      << t.trace.iterations() << " iterations, objective "
      << data::format_double(t.trace.initial_objective()) << " -> "
      << data::format_double(t.trace.final_objective()) << " ("
      << rcg::to_string(t.trace.reason) << ")\n";
  return 0;
}

int cmd_score(const Options& o, std::ostream& out) {
  const auto model = model_io::load(o.model);
  const DataMatrix dm = load_input(o.input, o.label_col);
  require_dims(model, dm);
  const VectorXd scores = models::score_all(model, dm);

  std::ostringstream s;
  s << "row_index,score" << (dm.has_labels() ? ",label" : "") << '\n';
  for (Index i = 0; i < scores.size(); ++i) {
    s << i << ',' << data::format_double(scores(i));
    if (dm.has_labels()) s << ',' << dm.labels()[static_cast<std::size_t>(i)];
    s << '\n';
  }
  if (o.output.empty()) {
    out << s.str();
  } else {
    write_text(o.output, s.str());
  }
  return 0;
}

ThresholdMode parse_mode(const std::string& m) {
  return m == "quantile" ? ThresholdMode::quantile : ThresholdMode::kmeans;
}

void print_summary(std::ostream& out, double f1, double f1_bar, double accuracy) {
  out << "F1 " << f1 << '\n' << "F1-bar " << f1_bar << '\n' << "accuracy " << accuracy << '\n';
}

int cmd_eval(const Options& o, std::ostream& out) {
  const std::string label_col = o.label_col.value_or("y");
  const DataMatrix dm = load_input(o.input, label_col);

  if (o.protocol) {
    ProtocolConfig pc;
    pc.algo = parse_algo(o.algo);
    pc.hyper = o.hyper;
    pc.rcg = o.rcg;
    pc.repeats = o.repeats;
    pc.train_frac = o.train_frac;
    pc.seed = o.seed;
    pc.mode = parse_mode(o.mode);
    pc.q = o.q;
    pc.threads = o.threads;
    const ProtocolResult r = run_protocol(dm, pc);
    for (const auto& run : r.runs) {
      out << "seed " << run.seed << ": F1 " << run.report.f1 << ", F1-bar " << run.report.f1_bar
          << ", accuracy " << run.report.accuracy << '\n';
    }
    print_summary(out, r.mean_f1, r.mean_f1_bar, r.mean_accuracy);
    if (!o.report.empty()) write_text(o.report, to_json(r, pc) + '\n');
    return 0;
  }

  if (o.model.empty()) throw InvalidArgument("eval needs --model (or --protocol)");
  const auto model = model_io::load(o.model);
  require_dims(model, dm);
  const auto scores = to_std(models::score_all(model, dm));
  std::vector<double> train_scores;
  const ThresholdMode mode = parse_mode(o.mode);
  if (mode == ThresholdMode::quantile) {
    if (o.train_input.empty()) {
      throw InvalidArgument("--mode quantile needs --train-input to set the threshold");
    }
    DataMatrix train = load_input(o.train_input, o.label_col);
    if (train.has_labels()) train = train.normals_only();
    require_dims(model, train);
    train_scores = to_std(models::score_all(model, train));
  }
  const auto th = threshold(mode, o.q, train_scores, scores);
  const metrics::EvalReport r = evaluate(scores, dm.labels(), th.labels);
  print_summary(out, r.f1, r.f1_bar, r.accuracy);
  out << "threshold " << th.threshold << '\n';
  if (!o.report.empty()) write_text(o.report, metrics::to_json(r) + '\n');
  return 0;
}

int cmd_synth(const Options& o, std::ostream& out) {
  const DataMatrix dm = o.dist == "gaussian" ? data::gen_gaussian(o.n, o.seed)
                                             : data::gen_arbitrary(o.n, o.seed, o.noise);
  if (o.output.empty()) {
    data::write_csv(out, dm);
  } else {
    data::save_csv(o.output, dm);
  }
  return 0;
}

MatrixXd gaussian_matrix(Index rows, Index cols, SplitMix64& rng) {
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  SplitMix64 rng(o.seed);
  DataMatrix dm = o.input.empty()
                      ? DataMatrix(gaussian_matrix(static_cast<Index>(o.n), o.d, rng))
                      : load_input(o.input, o.label_col);
  if (o.hyper.normalize_rows) dm = data::normalize_rows(dm);
  const Algo algo = parse_algo(o.algo);
  HyperParams h = o.hyper;
  if (algo == Algo::bods) h.k = 1;
  if (h.k > dm.dim()) throw InvalidArgument("K exceeds the data dimension");

  double err = 0.0;
  if (algo == Algo::kgods) {
    const auto problem = models::make_dual_problem(models::kernel_matrices(dm), h.eta);
    const Index r = problem.basis.cols();
    if (h.k > r) throw InvalidArgument("K exceeds the rank of the data");
    manifold::DualPoint p{
        manifold::GeneralizedStiefelPoint::orthonormalize(gaussian_matrix(h.k, r, rng),
                                                          problem.metric),
        manifold::GeneralizedStiefelPoint::orthonormalize(gaussian_matrix(h.k, r, rng),
                                                          problem.metric)};
    err = rcg::grad_check(manifold::DualManifold{}, problem, p, o.probes, o.seed);
  } else {
    const auto objective = [&](const manifold::ProductPoint& p) {
      return algo == Algo::bods ? models::bods_objective_grad(dm, p, h)
                                : models::gods_objective_grad(dm, p, h);
    };
    const auto kink = [&](const manifold::ProductPoint& p) {
      return algo == Algo::bods ? models::bods_kink_distance(dm, p, h)
                                : models::gods_kink_distance(dm, p, h);
    };
    // Resample until the point sits clearly away from every nondifferentiable
    // configuration; finite differences are meaningless across a kink.
    for (int attempt = 0;; ++attempt) {
      manifold::ProductPoint p(manifold::StiefelPoint::random(dm.dim(), h.k, rng),
                               0.3 * gaussian_matrix(h.k, 1, rng).col(0),
                               manifold::StiefelPoint::random(dm.dim(), h.k, rng),
                               0.3 * gaussian_matrix(h.k, 1, rng).col(0));
      if (kink(p) > 1e-3 || attempt == 999) {
        err = rcg::grad_check(objective, p, o.probes, o.seed);
        break;
      }
    }
  }
  out << "max relative error " << err << '\n';
  return err > 1e-4 ? 1 : 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"godsbox: one-class discriminative subspace anomaly detection.\n"
               "Scores are oriented so that higher means more anomalous."};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "fit a model on a CSV file");
  train->add_option("--algo", o.algo)->check(CLI::IsMember({"bods", "gods", "kgods"}))
      ->capture_default_str();
  train->add_option("--input", o.input)->required();
  train->add_option("--label-col", o.label_col, "label column; anomaly rows are dropped");
  train->add_option("--model", o.model, "output model JSON")->required();
  train->add_option("--trace", o.trace, "output CSV iter,objective,grad_norm,step");
  add_model_flags(train, o);
  add_common_flags(train, o);

  auto* score = app.add_subcommand("score", "score every row of a CSV file");
  score->add_option("--model", o.model)->required();
  score->add_option("--input", o.input)->required();
  score->add_option("--label-col", o.label_col);
  score->add_option("--output", o.output, "scores CSV (default: stdout)");
  add_common_flags(score, o);

  auto* eval = app.add_subcommand("eval", "threshold scores and report metrics");
  eval->add_option("--model", o.model);
  eval->add_option("--input", o.input, "labeled CSV")->required();
  eval->add_option("--label-col", o.label_col, "label column (default y)");
  eval->add_option("--train-input", o.train_input, "training CSV for --mode quantile");
  eval->add_option("--mode", o.mode)->check(CLI::IsMember({"kmeans", "quantile"}))
      ->capture_default_str();
  eval->add_option("--q", o.q, "quantile level")->capture_default_str();
  eval->add_option("--report", o.report, "output EvalReport JSON");
  eval->add_flag("--protocol", o.protocol,
                 "repeated stratified splits: train on normals, evaluate on the held-out part");
  eval->add_option("--algo", o.algo)->check(CLI::IsMember({"bods", "gods", "kgods"}))
      ->capture_default_str();
  eval->add_option("--repeats", o.repeats)->capture_default_str();
  eval->add_option("--train-frac", o.train_frac)->capture_default_str();
  eval->add_option("--threads", o.threads, "0 = all cores")->capture_default_str();
  add_model_flags(eval, o);
  add_common_flags(eval, o);

  auto* synth = app.add_subcommand("synth", "generate a synthetic 2-D dataset");
  synth->add_option("--dist", o.dist)->check(CLI::IsMember({"gaussian", "arbitrary"}))
      ->capture_default_str();
  synth->add_option("--n", o.n)->capture_default_str();
  synth->add_option("--noise", o.noise, "spread of the arbitrary curve")->capture_default_str();
  synth->add_option("--output", o.output, "CSV (default: stdout)");
  add_common_flags(synth, o);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of a gradient");
  gradcheck->add_option("--algo", o.algo)->check(CLI::IsMember({"bods", "gods", "kgods"}))
      ->capture_default_str();
  gradcheck->add_option("--n", o.n)->capture_default_str();
  gradcheck->add_option("--d", o.d)->capture_default_str();
  gradcheck->add_option("--probes", o.probes)->capture_default_str();
  gradcheck->add_option("--input", o.input, "use this CSV instead of random data");
  gradcheck->add_option("--label-col", o.label_col);
  add_model_flags(gradcheck, o);
  add_common_flags(gradcheck, o);

  try {
    o.seed = default_seed();
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(args);
    std::vector<const char*> cargs;
    for (const auto& a : args) cargs.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? 0 : 2;
    }
    finalize(o);

    if (*train) return cmd_train(o, out, err);
    if (*score) return cmd_score(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*synth) return cmd_synth(o, out);
    if (*gradcheck) return cmd_gradcheck(o, out);
    return 2;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace godsbox::cli
