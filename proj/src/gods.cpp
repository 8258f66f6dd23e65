#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "godsbox/error.hpp"
#include "godsbox/models.hpp"
#include "models_internal.hpp"

namespace godsbox::models {

using manifold::StiefelPoint;

void HyperParams::validate() const {
  if (k < 1) throw InvalidArgument("K must be at least 1");
  if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
  if (!(nu > 0.0)) throw InvalidArgument("nu must be positive");
  if (!(c >= 0.0)) throw InvalidArgument("C must be nonnegative");
}

MatrixXd responses(const MatrixXd& x, const MatrixXd& w, const VectorXd& b) {
  MatrixXd p = x * w;
  p.rowwise() += b.transpose();
  return p;
}

double bias_coupling(const VectorXd& b1, const VectorXd& b2) {
  return (b1 - b2).squaredNorm() - b1.sum() - b2.sum();
}

namespace detail {

HingeTerm squared_hinge(double deficit, double weight, const HyperParams& hyper) {
  if (!(deficit > 0.0)) return {};
  if (hyper.slack == SlackMode::closed_form) {
    // min_{xi >= 0} weight * (t - xi)^2 + C xi has xi* = max(0, t - C / 2 weight).
    const double knee = hyper.c / (2.0 * weight);
    if (deficit > knee) return {hyper.c * deficit - hyper.c * knee / 2.0, hyper.c};
  }
  return {weight * deficit * deficit, 2.0 * weight * deficit};
}

HingeTerm linear_hinge(double deficit, const HyperParams& hyper) {
  if (!(deficit > 0.0)) return {};
  // min_{xi >= 0} (t - xi)_+ + C xi: full slack when C < 1.
  const double slope = hyper.slack == SlackMode::closed_form ? std::min(1.0, hyper.c) : 1.0;
  return {slope * deficit, slope};
}

Index argmin_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Index best = 0;
  for (Index k = 1; k < row.size(); ++k) {
    if (row(k) < row(best)) best = k;
  }
  return best;
}

Index argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Index best = 0;
  for (Index k = 1; k < row.size(); ++k) {
    if (row(k) > row(best)) best = k;
  }
  return best;
}

double subspace_score(const MatrixXd& w1, const VectorXd& b1, const MatrixXd& w2,
                      const VectorXd& b2, const HyperParams& hyper, const VectorXd& x) {
  const VectorXd p1 = w1.transpose() * x + b1;
  const VectorXd p2 = w2.transpose() * x + b2;
  const double low = std::max(0.0, hyper.eta - p1.minCoeff());
  const double high = std::max(0.0, hyper.eta + p2.maxCoeff());
  return 0.5 * (p1.squaredNorm() + p2.squaredNorm()) + hyper.nu * low * low + 0.5 * high * high;
}

VectorXd prepare_point(const VectorXd& x, Index d, bool normalize) {
  if (x.size() != d) {
    throw InvalidArgument("point has dimension " + std::to_string(x.size()) +
                          ", model expects " + std::to_string(d));
  }
  return normalize ? data::normalize_row(x) : x;
}

DataMatrix prepare_training(const DataMatrix& data, const HyperParams& hyper) {
  hyper.validate();
  if (hyper.k > data.dim()) {
    throw InvalidArgument("K = " + std::to_string(hyper.k) + " exceeds feature dimension " +
                          std::to_string(data.dim()));
  }
  return hyper.normalize_rows ? data::normalize_rows(data) : data;
}

}  // namespace detail

Evaluation gods_objective_grad(const DataMatrix& data, const ProductPoint& point,
                               const HyperParams& hyper) {
  const MatrixXd& x = data.x();
  const Index n = x.rows();
  const Index k = point.rank();
  if (point.dim() != data.dim()) {
    throw InvalidArgument("model dimension " + std::to_string(point.dim()) +
                          " does not match data dimension " + std::to_string(data.dim()));
  }
  if (k > point.dim()) throw InvalidArgument("K exceeds d");

  const MatrixXd p1 = responses(x, point.w1().mat(), point.b1());
  const MatrixXd p2 = responses(x, point.w2().mat(), point.b2());
  const VectorXd& b1 = point.b1();
  const VectorXd& b2 = point.b2();

  Evaluation out;
  out.value = 0.5 * (p1.squaredNorm() + p2.squaredNorm()) + bias_coupling(b1, b2);

  // Hinge contributions are scattered into per-sample coefficient matrices so
  // that the W gradients reduce to one product each.
  MatrixXd coeff1 = p1;
  MatrixXd coeff2 = p2;
  const double weight1 = hyper.nu / static_cast<double>(n);
  const double weight2 = 1.0 / (2.0 * static_cast<double>(n));
  for (Index i = 0; i < n; ++i) {
    const Index lo = detail::argmin_lowest(p1.row(i));
    const auto h1 = detail::squared_hinge(hyper.eta - p1(i, lo), weight1, hyper);
    out.value += h1.value;
    coeff1(i, lo) -= h1.slope;

    const Index hi = detail::argmax_lowest(p2.row(i));
    const auto h2 = detail::squared_hinge(hyper.eta + p2(i, hi), weight2, hyper);
    out.value += h2.value;
    coeff2(i, hi) += h2.slope;
  }

  const VectorXd diff = b1 - b2;
  out.gradient.w1 = x.transpose() * coeff1;
  out.gradient.w2 = x.transpose() * coeff2;
  out.gradient.b1 = coeff1.colwise().sum().transpose() + 2.0 * diff - VectorXd::Ones(k);
  out.gradient.b2 = coeff2.colwise().sum().transpose() - 2.0 * diff - VectorXd::Ones(k);
  return out;
}

double gods_kink_distance(const DataMatrix& data, const ProductPoint& point,
                          const HyperParams& hyper) {
  const MatrixXd p1 = responses(data.x(), point.w1().mat(), point.b1());
  const MatrixXd p2 = responses(data.x(), point.w2().mat(), point.b2());
  const double n = static_cast<double>(data.samples());
  const double knee1 = hyper.c / (2.0 * hyper.nu / n);
  const double knee2 = hyper.c / (2.0 / (2.0 * n));
  double dist = std::numeric_limits<double>::infinity();

  const auto gap = [](Eigen::RowVectorXd row) {
    std::sort(row.data(), row.data() + row.size());
    double g = std::numeric_limits<double>::infinity();
    for (Index k = 1; k < row.size(); ++k) g = std::min(g, row(k) - row(k - 1));
    return g;
  };
  for (Index i = 0; i < p1.rows(); ++i) {
    const double t1 = hyper.eta - p1.row(i).minCoeff();
    const double t2 = hyper.eta + p2.row(i).maxCoeff();
    dist = std::min({dist, std::abs(t1), std::abs(t2), gap(p1.row(i)), gap(p2.row(i))});
    if (hyper.slack == SlackMode::closed_form) {
      dist = std::min({dist, std::abs(t1 - knee1), std::abs(t2 - knee2)});
    }
  }
  return dist;
}

// ---------------------------------------------------------------------------
// Initialization

namespace {

/// First K left singular vectors of `cols` (d x m), sign-normalized so the
/// largest-magnitude entry of each column is positive. Directions beyond the
/// numerical rank are filled with random orthonormal complements.
MatrixXd leading_directions(const MatrixXd& cols, Index k, SplitMix64& rng) {
  const Index d = cols.rows();
  Eigen::JacobiSVD<MatrixXd> svd(cols, Eigen::ComputeThinU);
  const VectorXd& s = svd.singularValues();
  Index rank = 0;
  while (rank < s.size() && rank < k && s(rank) > 1e-10 * std::max(s(0), 1e-300)) ++rank;

  MatrixXd u = svd.matrixU().leftCols(rank);
  for (Index j = 0; j < rank; ++j) {
    Index arg = 0;
    u.col(j).cwiseAbs().maxCoeff(&arg);
    if (u(arg, j) < 0.0) u.col(j) *= -1.0;
  }
  if (rank == k) return u;

  MatrixXd padded(d, k);
  padded.leftCols(rank) = u;
  for (Index j = rank; j < k; ++j) {
    for (Index i = 0; i < d; ++i) padded(i, j) = rng.normal();
  }
  return manifold::thin_qr(padded).q;
}

/// Smallest b with min_i (p_i + b) >= target, evaluated exactly as
/// `responses` evaluates it.
double lower_feasible_bias(const VectorXd& proj, double target) {
  double b = target - proj.minCoeff();
  while ((proj.array() + b).minCoeff() < target) b = std::nextafter(b, HUGE_VAL);
  return b;
}

double upper_feasible_bias(const VectorXd& proj, double target) {
  double b = target - proj.maxCoeff();
  while ((proj.array() + b).maxCoeff() > target) b = std::nextafter(b, -HUGE_VAL);
  return b;
}

}  // namespace

ProductPoint init_params(const DataMatrix& data, const HyperParams& hyper, std::uint64_t seed) {
  hyper.validate();
  const MatrixXd& x = data.x();
  const Index n = x.rows();
  const Index d = x.cols();
  const Index k = hyper.k;
  if (k > d) throw InvalidArgument("K exceeds feature dimension");
  SplitMix64 rng(seed);

  MatrixXd w1;
  MatrixXd w2;
  if (n < 3 * k) {
    w1 = StiefelPoint::random(d, k, rng).mat();
    w2 = StiefelPoint::random(d, k, rng).mat();
  } else {
    const VectorXd norms = x.rowwise().norm();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return norms(a) < norms(b); });
    const Index m = std::min(3 * k, n / 2);
    MatrixXd near(d, m);
    MatrixXd far(d, m);
    for (Index j = 0; j < m; ++j) {
      near.col(j) = x.row(order[static_cast<std::size_t>(j)]).transpose();
      far.col(j) = x.row(order[static_cast<std::size_t>(n - 1 - j)]).transpose();
    }
    w1 = leading_directions(far, k, rng);
    w2 = leading_directions(near, k, rng);
  }

  const MatrixXd proj1 = x * w1;
  const MatrixXd proj2 = x * w2;
  VectorXd b1(k);
  VectorXd b2(k);
  for (Index j = 0; j < k; ++j) {
    b1(j) = lower_feasible_bias(proj1.col(j), hyper.eta);
    b2(j) = upper_feasible_bias(proj2.col(j), -hyper.eta);
  }
  return ProductPoint(StiefelPoint(std::move(w1)), std::move(b1), StiefelPoint(std::move(w2)),
                      std::move(b2));
}

Fit<GodsModel> fit_gods(const DataMatrix& data, const HyperParams& hyper,
                        const rcg::RcgConfig& cfg, std::uint64_t seed) {
  const DataMatrix train = detail::prepare_training(data, hyper);
  ProductPoint init = init_params(train, hyper, seed);
  auto objective = [&](const ProductPoint& p) { return gods_objective_grad(train, p, hyper); };
  auto [params, trace] = rcg::minimize(objective, std::move(init), cfg);
  return {GodsModel{std::move(params), hyper, static_cast<std::size_t>(train.samples()), seed},
          std::move(trace)};
}

// ---------------------------------------------------------------------------
// Scoring

double point_score(const GodsModel& model, const VectorXd& x) {
  const VectorXd p = detail::prepare_point(x, model.dim(), model.hyper.normalize_rows);
  const auto& w = model.params;
  return detail::subspace_score(w.w1().mat(), w.b1(), w.w2().mat(), w.b2(), model.hyper, p);
}

double point_score(const AnyModel& model, const VectorXd& x) {
  return std::visit([&](const auto& m) { return point_score(m, x); }, model);
}

VectorXd score_all(const AnyModel& model, const DataMatrix& data) {
  if (data.dim() != feature_dim(model)) {
    throw InvalidArgument("data has dimension " + std::to_string(data.dim()) +
                          ", model expects " + std::to_string(feature_dim(model)));
  }
  VectorXd out(data.samples());
  for (Index i = 0; i < data.samples(); ++i) {
    out(i) = point_score(model, VectorXd(data.x().row(i).transpose()));
  }
  return out;
}

Index feature_dim(const AnyModel& model) {
  return std::visit([](const auto& m) { return m.dim(); }, model);
}

const HyperParams& hyper_of(const AnyModel& model) {
  return std::visit([](const auto& m) -> const HyperParams& { return m.hyper; }, model);
}

}  // namespace godsbox::models
