#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include <Eigen/Eigenvalues>

#include "godsbox/error.hpp"
#include "godsbox/models.hpp"
#include "models_internal.hpp"

namespace godsbox::models {

using manifold::DualManifold;
using manifold::DualPoint;
using manifold::DualVector;
using manifold::GeneralizedStiefelPoint;
using manifold::SpdMetric;

KernelMatrices kernel_matrices(const DataMatrix& data) {
  const MatrixXd& x = data.x();
  if (x.cwiseAbs().maxCoeff() == 0.0) {
    throw NumericalDegeneracy("kernel matrices are undefined for an all-zero data matrix");
  }
  const Index d = x.cols();
  MatrixXd gram = x.transpose() * x;

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
  const VectorXd& ev = eig.eigenvalues();
  KernelMatrices out;
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    out.ridge = 1e-8 * gram.trace() / static_cast<double>(d);
  }
  const VectorXd inv = (ev.array() + out.ridge).inverse();
  const MatrixXd& v = eig.eigenvectors();
  out.gram_inv = v * inv.asDiagonal() * v.transpose();

  const MatrixXd xv = x * v;
  out.kernel = xv * inv.asDiagonal() * xv.transpose();
  out.metric = xv * inv.array().square().matrix().asDiagonal() * xv.transpose();
  out.kernel = 0.5 * (out.kernel + out.kernel.transpose()).eval();
  out.metric = 0.5 * (out.metric + out.metric.transpose()).eval();
  out.gram_inv = 0.5 * (out.gram_inv + out.gram_inv.transpose()).eval();
  return out;
}

DualEvaluation kgods_objective_grad(const MatrixXd& y, const MatrixXd& z, const MatrixXd& kernel,
                                    double eta) {
  const Index n = kernel.rows();
  if (kernel.cols() != n || y.cols() != n || z.cols() != n || y.rows() != z.rows()) {
    throw InvalidArgument("dual variables must both be K x n with a matching n x n kernel");
  }
  const MatrixXd yk = y * kernel;
  const MatrixXd zk = z * kernel;
  DualEvaluation out;
  out.value = 0.5 * (yk.cwiseProduct(y).sum() + zk.cwiseProduct(z).sum()) - eta * (y.sum() - z.sum());
  out.grad_y = yk.array() - eta;
  out.grad_z = zk.array() + eta;
  return out;
}

DualProblem make_dual_problem(const KernelMatrices& km, double eta) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(km.metric);
  const VectorXd& ev = eig.eigenvalues();
  const double cutoff = 1e-10 * ev.maxCoeff();
  Index first = 0;
  while (first < ev.size() && ev(first) <= cutoff) ++first;
  if (first == ev.size()) throw NumericalDegeneracy("dual metric has no positive eigenvalues");

  DualProblem out;
  out.eta = eta;
  const Index n = km.metric.rows();
  MatrixXd reduced_metric;
  if (first == 0) {
    out.basis = MatrixXd::Identity(n, n);
    reduced_metric = km.metric;
  } else {
    out.basis = eig.eigenvectors().rightCols(n - first);
    reduced_metric = ev.tail(n - first).asDiagonal();
  }
  out.kernel = out.basis.transpose() * km.kernel * out.basis;
  out.kernel = 0.5 * (out.kernel + out.kernel.transpose()).eval();
  out.ones = out.basis.transpose() * VectorXd::Ones(n);
  out.metric = std::make_shared<const SpdMetric>(std::move(reduced_metric));
  return out;
}

rcg::Evaluation<DualVector> DualProblem::operator()(const DualPoint& p) const {
  const MatrixXd& cy = p.y.mat();
  const MatrixXd& cz = p.z.mat();
  const MatrixXd yk = cy * kernel;
  const MatrixXd zk = cz * kernel;
  rcg::Evaluation<DualVector> e;
  e.value = 0.5 * (yk.cwiseProduct(cy).sum() + zk.cwiseProduct(cz).sum()) -
            eta * ((cy - cz) * ones).sum();
  const MatrixXd lin = eta * VectorXd::Ones(cy.rows()) * ones.transpose();
  e.gradient.y = yk - lin;
  e.gradient.z = zk + lin;
  return e;
}

Fit<KGodsModel> fit_kgods(const DataMatrix& data, const HyperParams& hyper,
                          const rcg::RcgConfig& cfg, std::uint64_t seed,
                          const KGodsObserver& observer) {
  const DataMatrix train = detail::prepare_training(data, hyper);
  const MatrixXd& x = train.x();
  const Index k = hyper.k;
  if (k > x.rows()) {
    throw InvalidArgument("K = " + std::to_string(k) + " exceeds the sample count " +
                          std::to_string(x.rows()));
  }
  const KernelMatrices km = kernel_matrices(train);
  const DualProblem rd = make_dual_problem(km, hyper.eta);
  if (k > rd.basis.cols()) {
    throw NumericalDegeneracy("K = " + std::to_string(k) + " exceeds the rank " +
                              std::to_string(rd.basis.cols()) + " of the data");
  }

  // Primal initialization mapped through W1 = G^{-1} X^T Z^T, W2 = -G^{-1} X^T Y^T.
  const ProductPoint primal = init_params(train, hyper, seed);
  const MatrixXd z0 = (x * primal.w1().mat()).transpose() * rd.basis;
  const MatrixXd y0 = -(x * primal.w2().mat()).transpose() * rd.basis;
  DualPoint init{GeneralizedStiefelPoint::orthonormalize(y0, rd.metric),
                 GeneralizedStiefelPoint::orthonormalize(z0, rd.metric)};

  const DualManifold manifold;
  rcg::Observer<DualManifold> hook;
  if (observer) {
    hook = [&](const DualPoint& p, const rcg::IterationRecord& r) {
      observer(manifold.constraint_residual(p), r);
    };
  }
  auto [dual, trace] = rcg::minimize(manifold, rd, std::move(init), cfg, hook);

  KGodsModel model;
  model.dual_y = rd.lift(dual.y.mat());
  model.dual_z = rd.lift(dual.z.mat());
  model.w1 = km.gram_inv * x.transpose() * model.dual_z.transpose();
  model.w2 = -km.gram_inv * x.transpose() * model.dual_y.transpose();
  model.ridge = km.ridge;
  model.hyper = hyper;
  model.trained_n = static_cast<std::size_t>(x.rows());
  model.seed = seed;
  return {std::move(model), std::move(trace)};
}

double point_score(const KGodsModel& model, const VectorXd& x) {
  const VectorXd p = detail::prepare_point(x, model.dim(), model.hyper.normalize_rows);
  const VectorXd zero = VectorXd::Zero(model.w1.cols());
  return detail::subspace_score(model.w1, zero, model.w2, zero, model.hyper, p);
}

}  // namespace godsbox::models
