#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "godsbox/error.hpp"
#include "godsbox/models.hpp"
#include "support.hpp"

using namespace godsbox;
using namespace godsbox::models;
using manifold::StiefelPoint;
using testing::gaussian;
using testing::random_frame;

namespace {

ProductPoint make_point(const MatrixXd& w1, const VectorXd& b1, const MatrixXd& w2,
                        const VectorXd& b2) {
  return ProductPoint(StiefelPoint(w1), b1, StiefelPoint(w2), b2);
}

ProductPoint random_point(Index d, Index k, SplitMix64& rng, double bias_scale = 0.3) {
  return make_point(random_frame(d, k, rng), bias_scale * gaussian(k, 1, rng).col(0),
                    random_frame(d, k, rng), bias_scale * gaussian(k, 1, rng).col(0));
}

/// Brute-force objective straight from the definition, one term at a time.
double gods_oracle(const MatrixXd& x, const ProductPoint& p, const HyperParams& h) {
  const double n = static_cast<double>(x.rows());
  const VectorXd& b1 = p.b1();
  const VectorXd& b2 = p.b2();
  double value = (b1 - b2).squaredNorm() - b1.sum() - b2.sum();
  for (Index i = 0; i < x.rows(); ++i) {
    const VectorXd r1 = p.w1().mat().transpose() * x.row(i).transpose() + b1;
    const VectorXd r2 = p.w2().mat().transpose() * x.row(i).transpose() + b2;
    value += 0.5 * (r1.squaredNorm() + r2.squaredNorm());
    const double t1 = std::max(0.0, h.eta - r1.minCoeff());
    const double t2 = std::max(0.0, h.eta + r2.maxCoeff());
    // Slack minimized numerically over a fine grid plus the unconstrained stationary point.
    const auto best = [&](double t, double w) {
      if (h.slack == SlackMode::zero || t == 0.0) return w * t * t;
      double m = w * t * t;
      const double xi = std::max(0.0, t - h.c / (2.0 * w));
      m = std::min(m, w * (t - xi) * (t - xi) + h.c * xi);
      for (int s = 0; s <= 1000; ++s) {
        const double z = t * s / 1000.0;
        m = std::min(m, w * (t - z) * (t - z) + h.c * z);
      }
      return m;
    };
    value += best(t1, h.nu / n) + best(t2, 1.0 / (2.0 * n));
  }
  return value;
}

/// Kink-free random point for the given objective.
template <class Kink>
ProductPoint kink_free_point(Index d, Index k, SplitMix64& rng, Kink kink) {
  for (;;) {
    ProductPoint p = random_point(d, k, rng);
    if (kink(p) > 1e-3) return p;
  }
}

HyperParams hyper(Index k, double eta = 0.1) {
  HyperParams h;
  h.k = k;
  h.eta = eta;
  return h;
}

}  // namespace

TEST_CASE("HyperParams validation") {
  HyperParams h;
  CHECK_NOTHROW(h.validate());
  h.k = 0;
  CHECK_THROWS_AS(h.validate(), InvalidArgument);
  h = {};
  h.eta = 0.0;
  CHECK_THROWS_AS(h.validate(), InvalidArgument);
  h = {};
  h.nu = -1.0;
  CHECK_THROWS_AS(h.validate(), InvalidArgument);
  h = {};
  h.c = -1.0;
  CHECK_THROWS_AS(h.validate(), InvalidArgument);
}

// ---------------------------------------------------------------------------
// BODS

TEST_CASE("BODS objective hand values") {
  SplitMix64 rng(1);
  SUBCASE("single point at the origin") {
    const DataMatrix dm(MatrixXd::Zero(1, 3));
    const ProductPoint p = make_point(random_frame(3, 1, rng), VectorXd::Zero(1),
                                      random_frame(3, 1, rng), VectorXd::Zero(1));
    const double w12 = p.w1().mat().col(0).dot(p.w2().mat().col(0));
    CHECK(bods_objective_grad(dm, p, hyper(1)).value ==
          doctest::Approx(-2.0 * w12 + 0.2).epsilon(1e-14));
  }
  SUBCASE("identical hyperplanes with fully relaxed margins") {
    // With C = 0 the closed-form slack absorbs every margin violation, so only
    // the coupling terms remain: alpha(b, b) - 2 = -2b - 2.
    const DataMatrix dm(gaussian(10, 3, rng));
    const MatrixXd w = random_frame(3, 1, rng);
    const VectorXd b = VectorXd::Constant(1, 0.37);
    HyperParams h = hyper(1);
    h.c = 0.0;
    CHECK(bods_objective_grad(dm, make_point(w, b, w, b), h).value ==
          doctest::Approx(-2.0 - 2.0 * 0.37).epsilon(1e-14));
  }
  SUBCASE("wrong K is rejected") {
    const DataMatrix dm(gaussian(5, 3, rng));
    CHECK_THROWS_AS(bods_objective_grad(dm, random_point(3, 2, rng), hyper(2)), InvalidArgument);
  }
}

TEST_CASE("BODS gradient matches finite differences") {
  SplitMix64 rng(2);
  const DataMatrix dm(gaussian(20, 2, rng));
  for (SlackMode mode : {SlackMode::closed_form, SlackMode::zero}) {
    HyperParams h = hyper(1);
    h.slack = mode;
    h.c = mode == SlackMode::closed_form ? 0.5 : h.c;
    const auto f = [&](const ProductPoint& p) { return bods_objective_grad(dm, p, h); };
    for (int trial = 0; trial < 5; ++trial) {
      const ProductPoint p =
          kink_free_point(2, 1, rng, [&](const ProductPoint& q) { return bods_kink_distance(dm, q, h); });
      CHECK(rcg::grad_check(f, p, 10, static_cast<std::uint64_t>(trial)) < 1e-5);
    }
  }
}

TEST_CASE("BODS fit bounds a Gaussian cloud from both sides") {
  const DataMatrix dm = data::gen_gaussian(100, 7);
  HyperParams h = hyper(1);
  h.normalize_rows = false;
  const auto fit = fit_bods(dm, h, {}, 3);
  const auto& m = fit.model;
  CHECK(std::abs(m.w1.norm() - 1.0) < 1e-10);
  CHECK(std::abs(m.w2.norm() - 1.0) < 1e-10);
  CHECK(fit.trace.final_objective() <= fit.trace.initial_objective());
  int lower = 0, upper = 0;
  for (Index i = 0; i < dm.samples(); ++i) {
    const VectorXd x = dm.x().row(i).transpose();
    lower += m.w1.dot(x) + m.b1 >= h.eta - 1e-6;
    upper += m.w2.dot(x) + m.b2 <= -h.eta + 1e-6;
  }
  CHECK(lower >= 90);
  CHECK(upper >= 90);
}

TEST_CASE("BODS on a repeated point drives both hinges to zero") {
  MatrixXd x(6, 3);
  x.rowwise() = Eigen::RowVector3d(0.3, -0.2, 0.9);
  HyperParams h = hyper(1);
  h.normalize_rows = false;
  const auto fit = fit_bods(DataMatrix(x), h, {}, 1);
  CHECK(point_score(fit.model, x.row(0).transpose()) == 0.0);
}

TEST_CASE("BODS trains on two points") {
  MatrixXd x(2, 2);
  x << 1.0, 0.2, 0.8, -0.1;
  CHECK_NOTHROW(fit_bods(DataMatrix(x), hyper(1), {}, 1));
}

// ---------------------------------------------------------------------------
// GODS objective

TEST_CASE("GODS objective hand values") {
  SUBCASE("origin") {
    const DataMatrix dm(MatrixXd::Zero(1, 2));
    const ProductPoint p = make_point(MatrixXd::Identity(2, 1), VectorXd::Zero(1),
                                      MatrixXd::Identity(2, 1), VectorXd::Zero(1));
    CHECK(gods_objective_grad(dm, p, hyper(1)).value == doctest::Approx(0.015).epsilon(1e-14));
  }
  SUBCASE("projection term") {
    MatrixXd x(1, 2);
    x << 0.6, 0.8;
    MatrixXd e1 = MatrixXd::Zero(2, 1), e2 = MatrixXd::Zero(2, 1);
    e1(0, 0) = 1.0;
    e2(1, 0) = 1.0;
    const ProductPoint p = make_point(e1, VectorXd::Zero(1), e2, VectorXd::Zero(1));
    // 1/2 (0.36 + 0.64) + 0 (lower margin met) + 1/2 (0.1 + 0.8)^2.
    CHECK(gods_objective_grad(DataMatrix(x), p, hyper(1)).value ==
          doctest::Approx(0.5 + 0.405).epsilon(1e-14));
  }
  SUBCASE("shape errors") {
    SplitMix64 rng(3);
    const DataMatrix dm(gaussian(4, 3, rng));
    CHECK_THROWS_AS(gods_objective_grad(dm, random_point(4, 2, rng), hyper(2)), InvalidArgument);
  }
}

TEST_CASE("GODS objective equals the brute-force oracle") {
  SplitMix64 rng(4);
  const MatrixXd x = gaussian(25, 5, rng);
  for (SlackMode mode : {SlackMode::closed_form, SlackMode::zero}) {
    for (double c : {1e3, 0.01}) {
      HyperParams h = hyper(2, 0.3);
      h.slack = mode;
      h.c = c;
      h.nu = 2.0;
      const ProductPoint p = random_point(5, 2, rng, 1.0);
      CHECK(gods_objective_grad(DataMatrix(x), p, h).value ==
            doctest::Approx(gods_oracle(x, p, h)).epsilon(1e-12));
    }
  }
}

TEST_CASE("GODS gradient matches finite differences") {
  SplitMix64 rng(5);
  const DataMatrix dm(gaussian(30, 5, rng));
  for (double c : {1e3, 0.05}) {
    HyperParams h = hyper(2);
    h.c = c;
    const auto f = [&](const ProductPoint& p) { return gods_objective_grad(dm, p, h); };
    for (int trial = 0; trial < 5; ++trial) {
      const ProductPoint p = kink_free_point(
          5, 2, rng, [&](const ProductPoint& q) { return gods_kink_distance(dm, q, h); });
      CHECK(rcg::grad_check(f, p, 10, static_cast<std::uint64_t>(trial)) < 1e-5);
    }
  }
}

TEST_CASE("GODS objective is rotation invariant") {
  SplitMix64 rng(6);
  const MatrixXd x = gaussian(30, 5, rng);
  const MatrixXd r = random_frame(5, 5, rng);
  const ProductPoint p = random_point(5, 3, rng);
  const ProductPoint q = make_point(r * p.w1().mat(), p.b1(), r * p.w2().mat(), p.b2());
  const HyperParams h = hyper(3);
  const double a = gods_objective_grad(DataMatrix(x), p, h).value;
  const double b = gods_objective_grad(DataMatrix(x * r.transpose()), q, h).value;
  CHECK(std::abs(a - b) < 1e-10);

  GodsModel m1{p, h, 30, 0};
  GodsModel m2{q, h, 30, 0};
  m1.hyper.normalize_rows = m2.hyper.normalize_rows = false;
  for (Index i = 0; i < 5; ++i) {
    const VectorXd xi = x.row(i).transpose();
    CHECK(std::abs(point_score(m1, xi) - point_score(m2, VectorXd(r * xi))) < 1e-10);
  }
}

// ---------------------------------------------------------------------------
// Initialization

TEST_CASE("init_params recovers orthogonal directions") {
  const Index d = 4, k = 2;
  MatrixXd x(12, d);
  x.setZero();
  for (Index i = 0; i < 12; ++i) x(i, i % 2) = 1.0;
  const ProductPoint p = init_params(DataMatrix(x), hyper(k), 1);
  MatrixXd span = MatrixXd::Zero(d, d);
  span(0, 0) = span(1, 1) = 1.0;
  CHECK((testing::projector(p.w1().mat()) - span).norm() < 1e-10);
  CHECK((testing::projector(p.w2().mat()) - span).norm() < 1e-10);
}

TEST_CASE("init_params biases make every training point feasible") {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Index d = 3 + trial % 4, k = 1 + trial % 3;
    const Index n = trial < 5 ? 40 : 2;  // small n exercises the random fallback
    const DataMatrix dm(gaussian(n, d, rng) * 3.7);
    const HyperParams h = hyper(k, 0.05 + 0.1 * trial);
    const ProductPoint p = init_params(dm, h, static_cast<std::uint64_t>(trial));
    const MatrixXd r1 = responses(dm.x(), p.w1().mat(), p.b1());
    const MatrixXd r2 = responses(dm.x(), p.w2().mat(), p.b2());
    CHECK(r1.rowwise().minCoeff().minCoeff() >= h.eta);
    CHECK(r2.rowwise().maxCoeff().maxCoeff() <= -h.eta);
    // Hinges are exactly zero: the objective reduces to projection plus coupling.
    const double proj = 0.5 * (r1.squaredNorm() + r2.squaredNorm());
    CHECK(gods_objective_grad(dm, p, h).value == proj + bias_coupling(p.b1(), p.b2()));
  }
}

TEST_CASE("init_params matches an eigen-decomposition SVD oracle") {
  SplitMix64 rng(8);
  const Index d = 4, k = 2, n = 60;
  const MatrixXd x = gaussian(n, d, rng);
  const ProductPoint p = init_params(DataMatrix(x), hyper(k), 1);

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return x.row(a).norm() < x.row(b).norm(); });
  const Index m = 6;
  const auto top_left = [&](bool far) {
    MatrixXd cols(d, m);
    for (Index j = 0; j < m; ++j) cols.col(j) = x.row(order[far ? n - 1 - j : j]).transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cols * cols.transpose());
    return MatrixXd(eig.eigenvectors().rightCols(k).rowwise().reverse());
  };
  const MatrixXd far = top_left(true);
  const MatrixXd near = top_left(false);
  for (Index j = 0; j < k; ++j) {
    CHECK(std::abs(std::abs(far.col(j).dot(p.w1().mat().col(j))) - 1.0) < 1e-10);
    CHECK(std::abs(std::abs(near.col(j).dot(p.w2().mat().col(j))) - 1.0) < 1e-10);
  }
}

TEST_CASE("init_params pads a rank-deficient selection") {
  SplitMix64 rng(9);
  MatrixXd x(20, 4);
  const VectorXd dir = gaussian(4, 1, rng).col(0).normalized();
  for (Index i = 0; i < 20; ++i) x.row(i) = (0.5 + 0.1 * static_cast<double>(i)) * dir.transpose();
  const ProductPoint p = init_params(DataMatrix(x), hyper(3), 1);
  CHECK(p.w1().orthonormality_residual() < 1e-10);
  CHECK(std::abs(std::abs(p.w1().mat().col(0).dot(dir)) - 1.0) < 1e-10);
}

// ---------------------------------------------------------------------------
// Fitting

TEST_CASE("fit_gods on a Gaussian cloud") {
  const DataMatrix dm = data::gen_gaussian(100, 1);
  rcg::RcgConfig cfg;
  cfg.rel_obj_tol = 0.0;
  const auto fit = fit_gods(dm, hyper(2), cfg, 42);
  CHECK(fit.trace.final_objective() < fit.trace.initial_objective());
  CHECK(fit.trace.records.back().grad_norm < 1e-4);
  CHECK(fit.trace.iterations() <= 500);
  for (std::size_t i = 1; i < fit.trace.records.size(); ++i) {
    CHECK(fit.trace.records[i].objective <= fit.trace.records[i - 1].objective);
  }
}

TEST_CASE("fit_gods on a ring ranks a far outlier above every training point") {
  SplitMix64 rng(10);
  MatrixXd x(100, 3);
  for (Index i = 0; i < 100; ++i) {
    const double a = 2.0 * M_PI * rng.uniform();
    x.row(i) << 1.0 + 0.05 * rng.normal(), std::cos(a), std::sin(a);
  }
  HyperParams h = hyper(2);
  h.normalize_rows = false;
  const auto fit = fit_gods(DataMatrix(x), h, {}, 3);
  CHECK(fit.trace.final_objective() < fit.trace.initial_objective());
  double train_max = 0.0;
  for (Index i = 0; i < 100; ++i) {
    train_max = std::max(train_max, point_score(fit.model, x.row(i).transpose()));
  }
  for (const Eigen::Vector3d far : {Eigen::Vector3d(-6.0, 5.0, -4.0), Eigen::Vector3d(8.0, 0.0, 0.0),
                                    Eigen::Vector3d(0.0, 0.0, 9.0)}) {
    CHECK(point_score(fit.model, far) > train_max);
  }
}

TEST_CASE("fit_gods on duplicated data still decreases and stays finite") {
  const DataMatrix one = data::gen_gaussian(40, 2);
  MatrixXd twice(80, 2);
  twice << one.x(), one.x();
  for (const DataMatrix& dm : {one, DataMatrix(twice)}) {
    const auto fit = fit_gods(dm, hyper(2), {}, 5);
    CHECK(fit.trace.final_objective() <= fit.trace.initial_objective());
    CHECK(fit.model.params.b1().allFinite());
    CHECK(fit.model.params.b2().allFinite());
    CHECK(std::abs(fit.model.params.b1().maxCoeff()) < 1e3);
  }
}

TEST_CASE("fit_gods argument errors") {
  const DataMatrix dm = data::gen_gaussian(10, 1);
  CHECK_THROWS_AS(fit_gods(dm, hyper(3), {}, 1), InvalidArgument);
  MatrixXd x = MatrixXd::Ones(5, 2);
  x.row(2).setZero();
  CHECK_THROWS_AS(fit_gods(DataMatrix(x), hyper(1), {}, 1), ValidationError);
}

// ---------------------------------------------------------------------------
// Scoring

TEST_CASE("GODS point scores") {
  SUBCASE("origin matches the objective example") {
    GodsModel m{make_point(MatrixXd::Identity(2, 1), VectorXd::Zero(1), MatrixXd::Identity(2, 1),
                           VectorXd::Zero(1)),
                hyper(1), 1, 0};
    m.hyper.normalize_rows = false;
    CHECK(point_score(m, VectorXd::Zero(2)) == doctest::Approx(0.015).epsilon(1e-14));
  }
  SUBCASE("inside the sandwich only the projection term remains") {
    const ProductPoint p = make_point(MatrixXd::Identity(2, 1), VectorXd::Constant(1, 1.0),
                                      MatrixXd::Identity(2, 1), VectorXd::Constant(1, -1.0));
    GodsModel m{p, hyper(1), 1, 0};
    m.hyper.normalize_rows = false;
    const VectorXd x = Eigen::Vector2d(0.1, 0.5);
    CHECK(point_score(m, x) == doctest::Approx(0.5 * (1.1 * 1.1 + 0.9 * 0.9)).epsilon(1e-14));
  }
  SUBCASE("score grows strictly with the margin deficit") {
    MatrixXd w1 = MatrixXd::Zero(4, 2), w2 = MatrixXd::Zero(4, 2);
    w1(0, 0) = w1(1, 1) = 1.0;
    w2(2, 0) = w2(3, 1) = 1.0;
    GodsModel m{make_point(w1, VectorXd::Zero(2), w2, VectorXd::Zero(2)), hyper(2), 1, 0};
    m.hyper.normalize_rows = false;
    double prev = -1.0;
    for (int s = 0; s <= 50; ++s) {
      const double score = point_score(m, Eigen::Vector4d(-0.1 * s, 0.0, 0.0, 0.0));
      CHECK(score > prev);
      prev = score;
    }
  }
  SUBCASE("dimension mismatch") {
    GodsModel m{make_point(MatrixXd::Identity(2, 1), VectorXd::Zero(1), MatrixXd::Identity(2, 1),
                           VectorXd::Zero(1)),
                hyper(1), 1, 0};
    CHECK_THROWS_AS(point_score(m, VectorXd::Zero(3)), InvalidArgument);
    CHECK_THROWS_AS(score_all(AnyModel(m), DataMatrix(MatrixXd::Ones(2, 3))), InvalidArgument);
  }
}

// ---------------------------------------------------------------------------
// K-GODS

TEST_CASE("kernel matrices") {
  SUBCASE("identity data") {
    const KernelMatrices km = kernel_matrices(DataMatrix(MatrixXd::Identity(4, 4)));
    CHECK((km.kernel - MatrixXd::Identity(4, 4)).norm() < 1e-14);
    CHECK((km.metric - MatrixXd::Identity(4, 4)).norm() < 1e-14);
    CHECK(km.ridge == 0.0);
  }
  SUBCASE("orthonormal columns") {
    SplitMix64 rng(11);
    const MatrixXd q = random_frame(8, 3, rng);
    const KernelMatrices km = kernel_matrices(DataMatrix(q));
    CHECK((km.kernel - q * q.transpose()).norm() < 1e-12);
  }
  SUBCASE("dense-inverse oracle") {
    SplitMix64 rng(12);
    const MatrixXd x = gaussian(10, 6, rng);
    const MatrixXd gi = (x.transpose() * x).inverse();
    const KernelMatrices km = kernel_matrices(DataMatrix(x));
    CHECK((km.kernel - x * gi * x.transpose()).norm() < 1e-10);
    CHECK((km.metric - x * gi * gi * x.transpose()).norm() < 1e-10);
    CHECK((km.kernel * km.kernel - km.kernel).norm() < 1e-8);
    CHECK((km.kernel - km.kernel.transpose()).norm() < 1e-10);
    CHECK((km.metric - km.metric.transpose()).norm() < 1e-10);
  }
  SUBCASE("rank-deficient data is ridge-regularized") {
    SplitMix64 rng(13);
    MatrixXd x = gaussian(10, 4, rng);
    x.col(3) = x.col(0) + x.col(1);
    const KernelMatrices km = kernel_matrices(DataMatrix(x));
    CHECK(km.ridge > 0.0);
    CHECK(km.kernel.allFinite());
  }
  CHECK_THROWS_AS(kernel_matrices(DataMatrix(MatrixXd::Zero(3, 2))), NumericalDegeneracy);
}

TEST_CASE("K-GODS dual objective") {
  SplitMix64 rng(14);
  const MatrixXd x = gaussian(8, 5, rng);
  const MatrixXd kern = kernel_matrices(DataMatrix(x)).kernel;
  const MatrixXd y = gaussian(2, 8, rng);
  const MatrixXd z = gaussian(2, 8, rng);
  SUBCASE("Y = Z cancels the linear terms") {
    CHECK(kgods_objective_grad(y, y, kern, 0.7).value ==
          doctest::Approx((y * kern * y.transpose()).trace()).epsilon(1e-12));
  }
  SUBCASE("eta = 0 is nonnegative") {
    CHECK(kgods_objective_grad(y, z, kern, 0.0).value >= 0.0);
  }
  SUBCASE("Euclidean finite differences") {
    const auto e = kgods_objective_grad(y, z, kern, 0.3);
    double worst = 0.0;
    for (int probe = 0; probe < 10; ++probe) {
      const MatrixXd vy = gaussian(2, 8, rng);
      const MatrixXd vz = gaussian(2, 8, rng);
      const double t = 1e-5;
      const double fd = (kgods_objective_grad(y + t * vy, z + t * vz, kern, 0.3).value -
                         kgods_objective_grad(y - t * vy, z - t * vz, kern, 0.3).value) /
                        (2.0 * t);
      const double an = e.grad_y.cwiseProduct(vy).sum() + e.grad_z.cwiseProduct(vz).sum();
      worst = std::max(worst, std::abs(an - fd) / std::max(std::abs(fd), 1e-8));
    }
    CHECK(worst < 1e-6);
  }
  CHECK_THROWS_AS(kgods_objective_grad(y, gaussian(3, 8, rng), kern, 0.1), InvalidArgument);
}

TEST_CASE("K-GODS Riemannian gradient on the reduced dual") {
  SplitMix64 rng(15);
  const DataMatrix dm(gaussian(30, 5, rng));
  const DualProblem prob = make_dual_problem(kernel_matrices(dm), 0.2);
  CHECK(prob.basis.cols() == 5);
  for (int trial = 0; trial < 5; ++trial) {
    manifold::DualPoint p{
        manifold::GeneralizedStiefelPoint::orthonormalize(gaussian(2, 5, rng), prob.metric),
        manifold::GeneralizedStiefelPoint::orthonormalize(gaussian(2, 5, rng), prob.metric)};
    CHECK(rcg::grad_check(manifold::DualManifold{}, prob, p, 10, 1) < 1e-6);
    // Reduced value equals the full-coordinate dual at the lifted point.
    const KernelMatrices km = kernel_matrices(dm);
    CHECK(prob(p).value == doctest::Approx(kgods_objective_grad(prob.lift(p.y.mat()),
                                                                prob.lift(p.z.mat()), km.kernel, 0.2)
                                               .value)
                               .epsilon(1e-10));
  }
}

TEST_CASE("fit_kgods") {
  SUBCASE("constraint residuals and monotone trace") {
    SplitMix64 rng(16);
    const DataMatrix dm(gaussian(40, 6, rng));
    HyperParams h = hyper(2, 0.0001);
    rcg::RcgConfig cfg;
    cfg.max_iter = 200;
    double worst = 0.0;
    std::vector<double> values;
    const auto fit = fit_kgods(dm, h, cfg, 1, [&](double r, const rcg::IterationRecord& rec) {
      worst = std::max(worst, r);
      values.push_back(rec.objective);
    });
    CHECK(worst < 1e-8);
    CHECK(std::is_sorted(values.rbegin(), values.rend()));
    const KernelMatrices km = kernel_matrices(data::normalize_rows(dm));
    const MatrixXd& y = fit.model.dual_y;
    CHECK((y * km.metric * y.transpose() - MatrixXd::Identity(2, 2)).norm() < 1e-6);
    CHECK(fit.model.w1.allFinite());
    CHECK(std::isfinite(point_score(fit.model, dm.x().row(0).transpose())));
  }
  SUBCASE("identity data follows the identity-metric trajectory") {
    const DataMatrix dm(MatrixXd::Identity(5, 5));
    HyperParams h = hyper(2, 0.3);
    std::vector<double> reduced;
    fit_kgods(dm, h, {}, 1,
              [&](double, const rcg::IterationRecord& r) { reduced.push_back(r.objective); });

    // Same start, full coordinates, metric I.
    const ProductPoint primal = init_params(dm, h, 1);
    const auto metric = std::make_shared<const manifold::SpdMetric>(MatrixXd::Identity(5, 5));
    const MatrixXd kern = MatrixXd::Identity(5, 5);
    manifold::DualPoint init{
        manifold::GeneralizedStiefelPoint::orthonormalize(-primal.w2().mat().transpose(), metric),
        manifold::GeneralizedStiefelPoint::orthonormalize(primal.w1().mat().transpose(), metric)};
    const auto full = [&](const manifold::DualPoint& p) {
      const auto e = kgods_objective_grad(p.y.mat(), p.z.mat(), kern, h.eta);
      return rcg::Evaluation<manifold::DualVector>{e.value, {e.grad_y, e.grad_z}};
    };
    const auto [end, trace] = rcg::minimize(manifold::DualManifold{}, full, init, rcg::RcgConfig{});
    REQUIRE(trace.records.size() == reduced.size());
    for (std::size_t i = 0; i < reduced.size(); ++i) {
      CHECK(reduced[i] == doctest::Approx(trace.records[i].objective).epsilon(1e-9));
    }
  }
}
