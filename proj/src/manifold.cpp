#include "godsbox/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "godsbox/error.hpp"

namespace godsbox::manifold {

namespace {

constexpr double kRankTol = 1e-12;
constexpr double kMinMetricEigenvalue = 1e-10;
constexpr double kDriftTol = 1e-8;

std::string shape(const MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const MatrixXd& a, const MatrixXd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(what) + ": expected " + shape(a) + ", got " + shape(b));
  }
}

void require_positive_step(double step) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw InvalidArgument("retraction step must be positive and finite");
  }
}

MatrixXd random_normal(Index rows, Index cols, SplitMix64& rng) {
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

}  // namespace

ThinQr thin_qr(const MatrixXd& a) {
  const Index m = a.rows();
  const Index k = a.cols();
  if (k == 0 || m < k) {
    throw InvalidArgument("thin_qr needs rows >= cols >= 1, got " + shape(a));
  }
  Eigen::HouseholderQR<MatrixXd> qr(a);
  ThinQr out;
  out.r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  out.q = qr.householderQ() * MatrixXd::Identity(m, k);

  const double scale = a.norm();
  for (Index i = 0; i < k; ++i) {
    if (!(std::abs(out.r(i, i)) > kRankTol * scale)) {
      throw NumericalDegeneracy("matrix of shape " + shape(a) + " is rank deficient (column " +
                                std::to_string(i) + ")");
    }
    if (out.r(i, i) < 0.0) {
      out.r.row(i) *= -1.0;
      out.q.col(i) *= -1.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

StiefelPoint::StiefelPoint(MatrixXd mat) : mat_(std::move(mat)) {
  if (mat_.cols() < 1 || mat_.cols() > mat_.rows()) {
    throw InvalidArgument("Stiefel point needs 1 <= K <= d, got " + shape(mat_));
  }
  const double residual = orthonormality_residual();
  if (!(residual < kOrthonormalityTol)) {
    throw InvalidArgument("columns are not orthonormal (residual " + std::to_string(residual) +
                          ")");
  }
}

StiefelPoint StiefelPoint::orthonormalize(const MatrixXd& a) {
  return StiefelPoint(thin_qr(a).q, Unchecked{});
}

StiefelPoint StiefelPoint::random(Index d, Index k, SplitMix64& rng) {
  return orthonormalize(random_normal(d, k, rng));
}

double StiefelPoint::orthonormality_residual() const {
  return (mat_.transpose() * mat_ - MatrixXd::Identity(mat_.cols(), mat_.cols())).norm();
}

TangentVector project_tangent(const StiefelPoint& w, const MatrixXd& g) {
  require_same_shape(w.mat(), g, "project_tangent");
  const MatrixXd& m = w.mat();
  return {g - m * (m.transpose() * g)};
}

StiefelPoint qr_retract(const StiefelPoint& w, const TangentVector& v, double step) {
  require_positive_step(step);
  require_same_shape(w.mat(), v.mat, "qr_retract");
  if (v.mat.isZero(0.0)) return w;
  return StiefelPoint::orthonormalize(w.mat() + step * v.mat);
}

TangentVector transport(const StiefelPoint& w_new, const TangentVector& v_old) {
  return project_tangent(w_new, v_old.mat);
}

double inner(const TangentVector& a, const TangentVector& b) {
  require_same_shape(a.mat, b.mat, "inner");
  return a.mat.cwiseProduct(b.mat).sum();
}

// ---------------------------------------------------------------------------

ProductPoint::ProductPoint(StiefelPoint w1, VectorXd b1, StiefelPoint w2, VectorXd b2)
    : w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(std::move(b2)) {
  if (w1_.ambient_dim() != w2_.ambient_dim() || w1_.rank() != w2_.rank()) {
    throw InvalidArgument("W1 and W2 must share d and K: " + shape(w1_.mat()) + " vs " +
                          shape(w2_.mat()));
  }
  if (b1_.size() != w1_.rank() || b2_.size() != w1_.rank()) {
    throw InvalidArgument("bias vectors must have length K = " + std::to_string(w1_.rank()));
  }
}

ProductVector ProductVector::zeros(Index d, Index k) {
  return {MatrixXd::Zero(d, k), VectorXd::Zero(k), MatrixXd::Zero(d, k), VectorXd::Zero(k)};
}

ProductVector& ProductVector::operator+=(const ProductVector& o) {
  w1 += o.w1;
  b1 += o.b1;
  w2 += o.w2;
  b2 += o.b2;
  return *this;
}

ProductVector& ProductVector::operator*=(double s) {
  w1 *= s;
  b1 *= s;
  w2 *= s;
  b2 *= s;
  return *this;
}

namespace {

void require_blocks(const ProductPoint& p, const ProductVector& v) {
  const auto check = [](bool ok, const char* block) {
    if (!ok) throw InvalidArgument(std::string("product vector block ") + block +
                                   " is missing or mis-shaped");
  };
  check(v.w1.rows() == p.dim() && v.w1.cols() == p.rank(), "W1");
  check(v.b1.size() == p.rank(), "b1");
  check(v.w2.rows() == p.dim() && v.w2.cols() == p.rank(), "W2");
  check(v.b2.size() == p.rank(), "b2");
}

}  // namespace

ProductVector project_tangent(const ProductPoint& p, const ProductVector& egrad) {
  require_blocks(p, egrad);
  return {project_tangent(p.w1(), egrad.w1).mat, egrad.b1,
          project_tangent(p.w2(), egrad.w2).mat, egrad.b2};
}

ProductPoint retract(const ProductPoint& p, const ProductVector& v, double step) {
  require_positive_step(step);
  require_blocks(p, v);
  return ProductPoint(qr_retract(p.w1(), {v.w1}, step), p.b1() + step * v.b1,
                      qr_retract(p.w2(), {v.w2}, step), p.b2() + step * v.b2);
}

ProductVector transport(const ProductPoint& to, const ProductVector& v) {
  require_blocks(to, v);
  return {project_tangent(to.w1(), v.w1).mat, v.b1, project_tangent(to.w2(), v.w2).mat, v.b2};
}

double inner(const ProductVector& a, const ProductVector& b) {
  return a.w1.cwiseProduct(b.w1).sum() + a.b1.dot(b.b1) + a.w2.cwiseProduct(b.w2).sum() +
         a.b2.dot(b.b2);
}

ProductVector ProductManifold::random_tangent(const Point& p, SplitMix64& rng) const {
  ProductVector g{random_normal(p.dim(), p.rank(), rng), random_normal(p.rank(), 1, rng),
                  random_normal(p.dim(), p.rank(), rng), random_normal(p.rank(), 1, rng)};
  return project_tangent(p, g);
}

double ProductManifold::constraint_residual(const Point& p) const {
  return std::max(p.w1().orthonormality_residual(), p.w2().orthonormality_residual());
}

ProductPoint ProductManifold::restore(const Point& p) const {
  if (constraint_residual(p) <= kDriftTol) return p;
  return ProductPoint(StiefelPoint::orthonormalize(p.w1().mat()), p.b1(),
                      StiefelPoint::orthonormalize(p.w2().mat()), p.b2());
}

// ---------------------------------------------------------------------------

SpdMetric::SpdMetric(MatrixXd p) : p_(std::move(p)) {
  if (p_.rows() != p_.cols() || p_.rows() == 0) {
    throw InvalidArgument("metric must be a nonempty square matrix, got " + shape(p_));
  }
  const double asym = (p_ - p_.transpose()).norm();
  if (asym > 1e-10 * std::max(1.0, p_.norm())) {
    throw NumericalDegeneracy("metric is not symmetric (asymmetry " + std::to_string(asym) + ")");
  }
  p_ = 0.5 * (p_ + p_.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(p_, Eigen::EigenvaluesOnly);
  min_eig_ = eig.eigenvalues()(0);
  if (!(min_eig_ > kMinMetricEigenvalue)) {
    throw NumericalDegeneracy("metric is not positive definite (smallest eigenvalue " +
                              std::to_string(min_eig_) + ")");
  }
  Eigen::LLT<MatrixXd> llt(p_);
  if (llt.info() != Eigen::Success) {
    throw NumericalDegeneracy("Cholesky factorization of the metric failed");
  }
  l_ = llt.matrixL();
}

GeneralizedStiefelPoint::GeneralizedStiefelPoint(MatrixXd mat,
                                                 std::shared_ptr<const SpdMetric> metric)
    : mat_(std::move(mat)), metric_(std::move(metric)) {
  if (!metric_) throw InvalidArgument("generalized Stiefel point needs a metric");
  if (mat_.cols() != metric_->size() || mat_.rows() < 1 || mat_.rows() > mat_.cols()) {
    throw InvalidArgument("generalized Stiefel point of shape " + shape(mat_) +
                          " incompatible with metric of size " + std::to_string(metric_->size()));
  }
  const double residual = constraint_residual();
  if (!(residual < kGeneralizedTol)) {
    throw InvalidArgument("Y P Y^T != I (residual " + std::to_string(residual) + ")");
  }
}

GeneralizedStiefelPoint GeneralizedStiefelPoint::orthonormalize(
    const MatrixXd& a, std::shared_ptr<const SpdMetric> metric) {
  if (!metric || a.cols() != metric->size()) {
    throw InvalidArgument("orthonormalize: matrix/metric size mismatch");
  }
  const MatrixXd& l = metric->chol_lower();
  // Whiten, orthonormalize, un-whiten: X = L^{-T} qf(L^T A^T).
  const MatrixXd whitened = l.transpose() * a.transpose();
  const MatrixXd q = thin_qr(whitened).q;
  MatrixXd x = l.transpose().triangularView<Eigen::Upper>().solve(q);
  return GeneralizedStiefelPoint(x.transpose(), std::move(metric), Unchecked{});
}

double GeneralizedStiefelPoint::constraint_residual() const {
  return (mat_ * metric_->matrix() * mat_.transpose() -
          MatrixXd::Identity(mat_.rows(), mat_.rows()))
      .norm();
}

TangentVector gen_project_tangent(const GeneralizedStiefelPoint& y, const MatrixXd& g) {
  require_same_shape(y.mat(), g, "gen_project_tangent");
  const MatrixXd b = y.mat() * y.metric().matrix();  // Y P
  const MatrixXd a = b * b.transpose();              // Y P^2 Y^T
  const MatrixXd coeff = a.llt().solve(b * g.transpose());  // A^{-1} (Y P) G^T
  return {g - coeff.transpose() * b};
}

GeneralizedStiefelPoint gen_retract(const GeneralizedStiefelPoint& y, const TangentVector& v,
                                    double step) {
  require_positive_step(step);
  require_same_shape(y.mat(), v.mat, "gen_retract");
  if (v.mat.isZero(0.0)) return y;
  return GeneralizedStiefelPoint::orthonormalize(y.mat() + step * v.mat, y.metric_ptr());
}

TangentVector gen_transport(const GeneralizedStiefelPoint& y_new, const TangentVector& v_old) {
  return gen_project_tangent(y_new, v_old.mat);
}

DualVector& DualVector::operator+=(const DualVector& o) {
  y += o.y;
  z += o.z;
  return *this;
}

DualVector& DualVector::operator*=(double s) {
  y *= s;
  z *= s;
  return *this;
}

DualVector DualManifold::project(const Point& p, const Tangent& egrad) const {
  return {gen_project_tangent(p.y, egrad.y).mat, gen_project_tangent(p.z, egrad.z).mat};
}

DualPoint DualManifold::retract(const Point& p, const Tangent& v, double step) const {
  return {gen_retract(p.y, {v.y}, step), gen_retract(p.z, {v.z}, step)};
}

DualVector DualManifold::transport(const Point& to, const Tangent& v) const {
  return project(to, v);
}

double DualManifold::inner(const Point&, const Tangent& a, const Tangent& b) const {
  require_same_shape(a.y, b.y, "inner");
  require_same_shape(a.z, b.z, "inner");
  return a.y.cwiseProduct(b.y).sum() + a.z.cwiseProduct(b.z).sum();
}

DualVector DualManifold::random_tangent(const Point& p, SplitMix64& rng) const {
  return project(p, {random_normal(p.y.rank(), p.y.size(), rng),
                     random_normal(p.z.rank(), p.z.size(), rng)});
}

double DualManifold::constraint_residual(const Point& p) const {
  return std::max(p.y.constraint_residual(), p.z.constraint_residual());
}

DualPoint DualManifold::restore(const Point& p) const {
  if (constraint_residual(p) <= kDriftTol) return p;
  return {GeneralizedStiefelPoint::orthonormalize(p.y.mat(), p.y.metric_ptr()),
          GeneralizedStiefelPoint::orthonormalize(p.z.mat(), p.z.metric_ptr())};
}

}  // namespace godsbox::manifold
