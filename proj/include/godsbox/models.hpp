#pragma once

// One-class discriminative subspace models.
//
//  * BODS: a pair of unit-norm hyperplanes (w1, b1), (w2, b2) with a linear
//    hinge, trained on the sphere St(d, 1).
//  * GODS: a pair of K-hyperplane frames W1, W2 on St(d, K) with per-frame
//    biases and a squared hinge on min_k(W1^T x + b1) and max_k(W2^T x + b2).
//  * K-GODS: the dual of GODS on a pair of generalized Stiefel manifolds.
//
// Normal points satisfy min_k(W1^T x + b1) >= eta and max_k(W2^T x + b2) <= -eta,
// i.e. they are "sandwiched" between the two frames. Scores are oriented so
// that higher means more anomalous.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <variant>

#include "godsbox/data.hpp"
#include "godsbox/manifold.hpp"
#include "godsbox/rcg.hpp"

namespace godsbox::models {

using data::DataMatrix;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using manifold::ProductPoint;
using manifold::ProductVector;

/// How slack variables are handled. `closed_form` minimizes them out exactly
/// for the current (W, b); `zero` pins them at 0 (plain hinge).
enum class SlackMode { closed_form, zero };

struct HyperParams {
  Index k = 2;
  double eta = 0.1;
  double nu = 1.0;
  double c = 1e3;
  bool normalize_rows = true;
  SlackMode slack = SlackMode::closed_form;

  void validate() const;
};

using Evaluation = rcg::Evaluation<ProductVector>;

/// W^T x_i + b for every row of x (n x K).
MatrixXd responses(const MatrixXd& x, const MatrixXd& w, const VectorXd& b);

/// alpha(b1, b2) = ||b1 - b2||^2 - sum(b1) - sum(b2).
double bias_coupling(const VectorXd& b1, const VectorXd& b2);

// ---------------------------------------------------------------------------
// BODS

struct BodsModel {
  VectorXd w1;
  double b1 = 0.0;
  VectorXd w2;
  double b2 = 0.0;
  HyperParams hyper;
  std::size_t trained_n = 0;
  std::uint64_t seed = 0;

  Index dim() const { return w1.size(); }
};

/// P1 with the slacks eliminated. The point must have K = 1.
Evaluation bods_objective_grad(const DataMatrix& data, const ProductPoint& point,
                               const HyperParams& hyper);

/// Smallest distance of any hinge argument from its kink.
double bods_kink_distance(const DataMatrix& data, const ProductPoint& point,
                          const HyperParams& hyper);

// ---------------------------------------------------------------------------
// GODS

struct GodsModel {
  ProductPoint params;
  HyperParams hyper;
  std::size_t trained_n = 0;
  std::uint64_t seed = 0;

  Index dim() const { return params.dim(); }
};

/// P3 with the slacks eliminated; Euclidean gradients for all four blocks.
Evaluation gods_objective_grad(const DataMatrix& data, const ProductPoint& point,
                               const HyperParams& hyper);

/// Smallest distance from a nondifferentiable configuration: a hinge at zero,
/// a tie in the selected min/max margin, or a slack threshold.
double gods_kink_distance(const DataMatrix& data, const ProductPoint& point,
                          const HyperParams& hyper);

/// SVD-based initialization from the points farthest from (W1) and nearest to
/// (W2) the origin, with biases that make every training point satisfy both
/// margin families.
ProductPoint init_params(const DataMatrix& data, const HyperParams& hyper, std::uint64_t seed);

template <class Model>
struct Fit {
  Model model;
  rcg::RcgTrace trace;
};

Fit<GodsModel> fit_gods(const DataMatrix& data, const HyperParams& hyper,
                        const rcg::RcgConfig& cfg, std::uint64_t seed);
Fit<BodsModel> fit_bods(const DataMatrix& data, const HyperParams& hyper,
                        const rcg::RcgConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// K-GODS

struct KernelMatrices {
  MatrixXd kernel;    // X^T (X X^T)^{-1} X, n x n
  MatrixXd metric;    // X^T (X X^T)^{-2} X, n x n
  MatrixXd gram_inv;  // (X X^T)^{-1}, d x d
  double ridge = 0.0; // delta added to X X^T when it was ill-conditioned
};

/// X is the data with samples as rows; the formulas above use samples as columns.
KernelMatrices kernel_matrices(const DataMatrix& data);

struct DualEvaluation {
  double value = 0.0;
  MatrixXd grad_y;
  MatrixXd grad_z;
};

/// 1/2 tr(Y K Y^T + Z K Z^T) - eta 1^T (Y - Z) 1 and its Euclidean gradients.
DualEvaluation kgods_objective_grad(const MatrixXd& y, const MatrixXd& z, const MatrixXd& kernel,
                                    double eta);

/// The dual restricted to the orthonormal eigenbasis U (n x r) of range(P):
/// Y = C U^T with C on the generalized Stiefel manifold of U^T P U. P is
/// singular whenever n > d and the linear term is unbounded along its null
/// space, so the optimization runs in these coordinates.
struct DualProblem {
  MatrixXd basis;   // U
  MatrixXd kernel;  // U^T K U
  VectorXd ones;    // U^T 1
  std::shared_ptr<const manifold::SpdMetric> metric;
  double eta = 0.0;

  rcg::Evaluation<manifold::DualVector> operator()(const manifold::DualPoint& p) const;
  /// Full n-column dual variable C U^T.
  MatrixXd lift(const MatrixXd& reduced) const { return reduced * basis.transpose(); }
};

DualProblem make_dual_problem(const KernelMatrices& km, double eta);

struct KGodsModel {
  MatrixXd dual_y;  // K x n; empty when loaded from disk
  MatrixXd dual_z;
  MatrixXd w1;      // (X X^T)^{-1} X Z^T
  MatrixXd w2;      // -(X X^T)^{-1} X Y^T
  double ridge = 0.0;
  HyperParams hyper;
  std::size_t trained_n = 0;
  std::uint64_t seed = 0;

  Index dim() const { return w1.rows(); }
};

/// Per-iterate hook: full-space constraint residual max(||YPY^T-I||, ||ZPZ^T-I||).
using KGodsObserver = std::function<void(double residual, const rcg::IterationRecord&)>;

Fit<KGodsModel> fit_kgods(const DataMatrix& data, const HyperParams& hyper,
                          const rcg::RcgConfig& cfg, std::uint64_t seed,
                          const KGodsObserver& observer = {});

// ---------------------------------------------------------------------------
// Scoring

using AnyModel = std::variant<BodsModel, GodsModel, KGodsModel>;

/// Per-point objective contribution; higher is more anomalous. `x` is raw:
/// row normalization is applied when the model was trained with it.
double point_score(const GodsModel& model, const VectorXd& x);
double point_score(const BodsModel& model, const VectorXd& x);
double point_score(const KGodsModel& model, const VectorXd& x);
double point_score(const AnyModel& model, const VectorXd& x);

VectorXd score_all(const AnyModel& model, const DataMatrix& data);

Index feature_dim(const AnyModel& model);
const HyperParams& hyper_of(const AnyModel& model);

}  // namespace godsbox::models
