#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include "godsbox/error.hpp"
#include "godsbox/models.hpp"
#include "models_internal.hpp"

namespace godsbox::models {

namespace {

void require_sphere_point(const DataMatrix& data, const ProductPoint& point) {
  if (point.rank() != 1) {
    throw InvalidArgument("BODS uses a single hyperplane per side, got K = " +
                          std::to_string(point.rank()));
  }
  if (point.dim() != data.dim()) {
    throw InvalidArgument("model dimension " + std::to_string(point.dim()) +
                          " does not match data dimension " + std::to_string(data.dim()));
  }
}

}  // namespace

Evaluation bods_objective_grad(const DataMatrix& data, const ProductPoint& point,
                               const HyperParams& hyper) {
  require_sphere_point(data, point);
  const MatrixXd& x = data.x();
  const auto w1 = point.w1().mat().col(0);
  const auto w2 = point.w2().mat().col(0);
  const double b1 = point.b1()(0);
  const double b2 = point.b2()(0);
  const VectorXd p1 = (x * w1).array() + b1;
  const VectorXd p2 = (x * w2).array() + b2;

  Evaluation out;
  out.value = (b1 - b2) * (b1 - b2) - b1 - b2 - 2.0 * w1.dot(w2);

  VectorXd coeff1 = VectorXd::Zero(x.rows());
  VectorXd coeff2 = VectorXd::Zero(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const auto h1 = detail::linear_hinge(hyper.eta - p1(i), hyper);
    const auto h2 = detail::linear_hinge(hyper.eta + p2(i), hyper);
    out.value += h1.value + h2.value;
    coeff1(i) = -h1.slope;
    coeff2(i) = h2.slope;
  }

  out.gradient.w1 = x.transpose() * coeff1 - 2.0 * w2;
  out.gradient.w2 = x.transpose() * coeff2 - 2.0 * w1;
  out.gradient.b1 = VectorXd::Constant(1, 2.0 * (b1 - b2) - 1.0 + coeff1.sum());
  out.gradient.b2 = VectorXd::Constant(1, -2.0 * (b1 - b2) - 1.0 + coeff2.sum());
  return out;
}

double bods_kink_distance(const DataMatrix& data, const ProductPoint& point,
                          const HyperParams& hyper) {
  require_sphere_point(data, point);
  const VectorXd p1 = (data.x() * point.w1().mat().col(0)).array() + point.b1()(0);
  const VectorXd p2 = (data.x() * point.w2().mat().col(0)).array() + point.b2()(0);
  const double d1 = (p1.array() - hyper.eta).abs().minCoeff();
  const double d2 = (p2.array() + hyper.eta).abs().minCoeff();
  return std::min(d1, d2);
}

Fit<BodsModel> fit_bods(const DataMatrix& data, const HyperParams& hyper,
                        const rcg::RcgConfig& cfg, std::uint64_t seed) {
  HyperParams h = hyper;
  h.k = 1;
  const DataMatrix train = detail::prepare_training(data, h);
  ProductPoint init = init_params(train, h, seed);
  auto objective = [&](const ProductPoint& p) { return bods_objective_grad(train, p, h); };

  // The linear hinge has kinks where every direction can be uphill; if the
  // iterates land on one, the last accepted iterate is the answer.
  ProductPoint params = init;
  rcg::RcgTrace trace;
  try {
    std::tie(params, trace) = rcg::minimize(
        objective, std::move(init), cfg,
        [&](const ProductPoint& p, const rcg::IterationRecord& r) {
          params = p;
          trace.records.push_back(r);
        });
  } catch (const LineSearchFailure&) {
    trace.reason = rcg::Termination::objective_stalled;
  }

  BodsModel model;
  model.w1 = params.w1().mat().col(0);
  model.b1 = params.b1()(0);
  model.w2 = params.w2().mat().col(0);
  model.b2 = params.b2()(0);
  model.hyper = h;
  model.trained_n = static_cast<std::size_t>(train.samples());
  model.seed = seed;
  return {std::move(model), std::move(trace)};
}

double point_score(const BodsModel& model, const VectorXd& x) {
  const VectorXd p = detail::prepare_point(x, model.dim(), model.hyper.normalize_rows);
  const double low = std::max(0.0, model.hyper.eta - (model.w1.dot(p) + model.b1));
  const double high = std::max(0.0, model.hyper.eta + (model.w2.dot(p) + model.b2));
  return low + high;
}

}  // namespace godsbox::models
