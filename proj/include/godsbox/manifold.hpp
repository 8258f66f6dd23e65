#pragma once

// Stiefel, generalized-Stiefel and product-manifold primitives.
//
// Conventions used throughout:
//  * Stiefel points are d x K with orthonormal columns.
//  * Tangent directions at W are represented in the projected form
//    (I - W W^T) G, so W^T V = 0 for every tangent produced here.
//  * The metric is the embedded Euclidean (trace) inner product.
//  * Retraction is the Q factor of a thin QR with nonnegative diag(R).
//  * Vector transport re-projects onto the destination tangent space.

#include <Eigen/Dense>

#include <memory>

#include "godsbox/rng.hpp"

namespace godsbox::manifold {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kOrthonormalityTol = 1e-10;
inline constexpr double kGeneralizedTol = 1e-8;

/// Thin QR factorization A = Q R with diag(R) >= 0.
struct ThinQr {
  MatrixXd q;
  MatrixXd r;
};

/// Throws NumericalDegeneracy when A has numerical rank below its column count.
ThinQr thin_qr(const MatrixXd& a);

class StiefelPoint {
 public:
  /// Validates W^T W = I_K (Frobenius residual below kOrthonormalityTol) and 1 <= K <= d.
  explicit StiefelPoint(MatrixXd mat);

  /// Q factor of the sign-normalized thin QR of `a`.
  static StiefelPoint orthonormalize(const MatrixXd& a);
  /// Orthonormalized standard-normal matrix.
  static StiefelPoint random(Index d, Index k, SplitMix64& rng);

  const MatrixXd& mat() const { return mat_; }
  Index ambient_dim() const { return mat_.rows(); }
  Index rank() const { return mat_.cols(); }
  double orthonormality_residual() const;

 private:
  struct Unchecked {};
  StiefelPoint(MatrixXd mat, Unchecked) : mat_(std::move(mat)) {}

  MatrixXd mat_;
};

struct TangentVector {
  MatrixXd mat;
};

/// (I - W W^T) G.
TangentVector project_tangent(const StiefelPoint& w, const MatrixXd& g);
/// qf(W + step * V). A zero tangent returns `w` unchanged.
StiefelPoint qr_retract(const StiefelPoint& w, const TangentVector& v, double step);
/// Projection transport onto the tangent space at `w_new`.
TangentVector transport(const StiefelPoint& w_new, const TangentVector& v_old);
double inner(const TangentVector& a, const TangentVector& b);

// ---------------------------------------------------------------------------
// Product manifold St(d,K) x R^K x St(d,K) x R^K.

class ProductPoint {
 public:
  ProductPoint(StiefelPoint w1, VectorXd b1, StiefelPoint w2, VectorXd b2);

  const StiefelPoint& w1() const { return w1_; }
  const VectorXd& b1() const { return b1_; }
  const StiefelPoint& w2() const { return w2_; }
  const VectorXd& b2() const { return b2_; }

  Index dim() const { return w1_.ambient_dim(); }
  Index rank() const { return w1_.rank(); }

 private:
  StiefelPoint w1_;
  VectorXd b1_;
  StiefelPoint w2_;
  VectorXd b2_;
};

/// Block vector on the product: used both for Euclidean gradients and for
/// tangent vectors.
struct ProductVector {
  MatrixXd w1;
  VectorXd b1;
  MatrixXd w2;
  VectorXd b2;

  static ProductVector zeros(Index d, Index k);

  ProductVector& operator+=(const ProductVector& o);
  ProductVector& operator*=(double s);
  friend ProductVector operator+(ProductVector a, const ProductVector& b) { return a += b; }
  friend ProductVector operator*(double s, ProductVector a) { return a *= s; }
  friend ProductVector operator-(const ProductVector& a) { return -1.0 * a; }
};

/// Stiefel blocks are projected, bias blocks pass through. Throws
/// InvalidArgument on a missing (empty) or mis-shaped block.
ProductVector project_tangent(const ProductPoint& p, const ProductVector& egrad);
ProductPoint retract(const ProductPoint& p, const ProductVector& v, double step);
ProductVector transport(const ProductPoint& to, const ProductVector& v);
double inner(const ProductVector& a, const ProductVector& b);

// ---------------------------------------------------------------------------
// Generalized Stiefel manifold {Y in R^{K x n} : Y P Y^T = I_K}.

/// Symmetric positive-definite metric, factored once.
class SpdMetric {
 public:
  /// Throws NumericalDegeneracy unless P is symmetric with smallest eigenvalue > 1e-10.
  explicit SpdMetric(MatrixXd p);

  const MatrixXd& matrix() const { return p_; }
  /// Lower Cholesky factor L with P = L L^T.
  const MatrixXd& chol_lower() const { return l_; }
  Index size() const { return p_.rows(); }
  double min_eigenvalue() const { return min_eig_; }

 private:
  MatrixXd p_;
  MatrixXd l_;
  double min_eig_ = 0.0;
};

class GeneralizedStiefelPoint {
 public:
  /// Validates the constraint residual against kGeneralizedTol.
  GeneralizedStiefelPoint(MatrixXd mat, std::shared_ptr<const SpdMetric> metric);

  /// P-orthonormalizes the rows of `a` (Cholesky-whitened QR).
  static GeneralizedStiefelPoint orthonormalize(const MatrixXd& a,
                                                std::shared_ptr<const SpdMetric> metric);

  const MatrixXd& mat() const { return mat_; }
  const SpdMetric& metric() const { return *metric_; }
  const std::shared_ptr<const SpdMetric>& metric_ptr() const { return metric_; }
  Index rank() const { return mat_.rows(); }
  Index size() const { return mat_.cols(); }
  /// ||Y P Y^T - I||_F.
  double constraint_residual() const;

 private:
  struct Unchecked {};
  GeneralizedStiefelPoint(MatrixXd mat, std::shared_ptr<const SpdMetric> metric, Unchecked)
      : mat_(std::move(mat)), metric_(std::move(metric)) {}

  MatrixXd mat_;
  std::shared_ptr<const SpdMetric> metric_;
};

/// Euclidean-orthogonal projection onto {V : V P Y^T = 0}; reduces to the
/// Stiefel projection (transposed) when P = I.
TangentVector gen_project_tangent(const GeneralizedStiefelPoint& y, const MatrixXd& g);
GeneralizedStiefelPoint gen_retract(const GeneralizedStiefelPoint& y, const TangentVector& v,
                                    double step);
TangentVector gen_transport(const GeneralizedStiefelPoint& y_new, const TangentVector& v_old);

/// Pair (Y, Z) sharing one metric: the dual variables of the kernelized model.
struct DualPoint {
  GeneralizedStiefelPoint y;
  GeneralizedStiefelPoint z;
};

struct DualVector {
  MatrixXd y;
  MatrixXd z;

  DualVector& operator+=(const DualVector& o);
  DualVector& operator*=(double s);
  friend DualVector operator+(DualVector a, const DualVector& b) { return a += b; }
  friend DualVector operator*(double s, DualVector a) { return a *= s; }
  friend DualVector operator-(const DualVector& a) { return -1.0 * a; }
};

// ---------------------------------------------------------------------------
// Adapters consumed by the optimizer (see rcg.hpp for the concept).

struct ProductManifold {
  using Point = ProductPoint;
  using Tangent = ProductVector;

  Tangent project(const Point& p, const Tangent& egrad) const { return project_tangent(p, egrad); }
  Point retract(const Point& p, const Tangent& v, double step) const {
    return manifold::retract(p, v, step);
  }
  Tangent transport(const Point& to, const Tangent& v) const { return manifold::transport(to, v); }
  double inner(const Point&, const Tangent& a, const Tangent& b) const {
    return manifold::inner(a, b);
  }
  Tangent random_tangent(const Point& p, SplitMix64& rng) const;
  Index restart_hint(const Point& p) const { return p.dim() * p.rank(); }
  double constraint_residual(const Point& p) const;
  Point restore(const Point& p) const;
};

struct DualManifold {
  using Point = DualPoint;
  using Tangent = DualVector;

  Tangent project(const Point& p, const Tangent& egrad) const;
  Point retract(const Point& p, const Tangent& v, double step) const;
  Tangent transport(const Point& to, const Tangent& v) const;
  double inner(const Point&, const Tangent& a, const Tangent& b) const;
  Tangent random_tangent(const Point& p, SplitMix64& rng) const;
  Index restart_hint(const Point& p) const { return p.y.rank() * p.y.size(); }
  double constraint_residual(const Point& p) const;
  Point restore(const Point& p) const;
};

}  // namespace godsbox::manifold
