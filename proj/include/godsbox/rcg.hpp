#pragma once

// Riemannian conjugate gradient with Armijo backtracking and Polak-Ribiere+
// direction updates, generic over any manifold adapter satisfying
// `Manifold` below (see manifold.hpp for the two shipped adapters).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "godsbox/error.hpp"
#include "godsbox/manifold.hpp"
#include "godsbox/rng.hpp"

namespace godsbox::rcg {

struct RcgConfig {
  std::size_t max_iter = 500;
  double grad_tol = 1e-6;
  double rel_obj_tol = 1e-9;
  double armijo_c1 = 1e-4;
  double backtrack_factor = 0.5;
  double init_step = 1.0;
  std::size_t max_backtracks = 50;
  /// Unset means the manifold's hint (d*K for the product manifold).
  std::optional<std::size_t> restart_period;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

enum class Termination { gradient_tolerance, objective_stalled, max_iterations };

std::string to_string(Termination t);

struct IterationRecord {
  std::size_t iter = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;  // accepted step; 0 for the initial record
  bool restart = false;
};

struct RcgTrace {
  std::vector<IterationRecord> records;
  Termination reason = Termination::max_iterations;

  double initial_objective() const { return records.front().objective; }
  double final_objective() const { return records.back().objective; }
  std::size_t iterations() const { return records.empty() ? 0 : records.size() - 1; }
};

template <class Tangent>
struct Evaluation {
  double value = 0.0;
  Tangent gradient;  // Euclidean gradient, same block layout as a tangent
};

template <class M>
concept Manifold = requires(const M& m, const typename M::Point& p, const typename M::Tangent& v,
                            SplitMix64& rng) {
  { m.project(p, v) } -> std::same_as<typename M::Tangent>;
  { m.retract(p, v, 1.0) } -> std::same_as<typename M::Point>;
  { m.transport(p, v) } -> std::same_as<typename M::Tangent>;
  { m.inner(p, v, v) } -> std::convertible_to<double>;
  { m.random_tangent(p, rng) } -> std::same_as<typename M::Tangent>;
  { m.restart_hint(p) } -> std::convertible_to<std::size_t>;
  { m.restore(p) } -> std::same_as<typename M::Point>;
  { -v } -> std::same_as<typename M::Tangent>;
  { v + v } -> std::same_as<typename M::Tangent>;
  { 2.0 * v } -> std::same_as<typename M::Tangent>;
};

template <class F, class M>
concept ObjectiveOn = Manifold<M> && requires(F& f, const typename M::Point& p) {
  { f(p) } -> std::same_as<Evaluation<typename M::Tangent>>;
};

template <class M>
using Observer = std::function<void(const typename M::Point&, const IterationRecord&)>;

namespace detail {

template <class M, class F>
Evaluation<typename M::Tangent> evaluate(F& objective, const typename M::Point& p,
                                         std::size_t iterate) {
  auto e = objective(p);
  if (!std::isfinite(e.value)) {
    throw NonFiniteObjective("objective returned " + std::to_string(e.value), iterate);
  }
  return e;
}

}  // namespace detail

/// Minimizes `objective` from `init`. The returned trace holds one record per
/// accepted iterate, starting with the initial point.
template <Manifold M, ObjectiveOn<M> F>
std::pair<typename M::Point, RcgTrace> minimize(const M& manifold, F&& objective,
                                                typename M::Point init, const RcgConfig& cfg,
                                                const Observer<M>& observer = {}) {
  using Point = typename M::Point;
  using Tangent = typename M::Tangent;
  cfg.validate();

  const std::size_t restart_period =
      cfg.restart_period.value_or(std::max<std::size_t>(1, manifold.restart_hint(init)));
  constexpr std::size_t kStallWindow = 5;
  constexpr double kNoiseFloor = 1e3 * std::numeric_limits<double>::epsilon();

  Point x = std::move(init);
  auto eval = detail::evaluate<M>(objective, x, 0);
  double f = eval.value;
  Tangent grad = manifold.project(x, eval.gradient);
  double grad_sq = manifold.inner(x, grad, grad);

  RcgTrace trace;
  trace.records.push_back({0, f, std::sqrt(grad_sq), 0.0, true});
  if (observer) observer(x, trace.records.back());

  Tangent dir = -grad;
  bool steepest = true;
  double prev_step = cfg.init_step;
  std::size_t stalled = 0;

  for (std::size_t k = 0;; ++k) {
    if (std::sqrt(grad_sq) <= cfg.grad_tol) {
      trace.reason = Termination::gradient_tolerance;
      break;
    }
    if (k >= cfg.max_iter) {
      trace.reason = Termination::max_iterations;
      break;
    }

    double slope = manifold.inner(x, grad, dir);
    if (!(slope < 0.0)) {
      dir = -grad;
      slope = -grad_sq;
      steepest = true;
    }

    const double first_step =
        k == 0 ? cfg.init_step : std::clamp(2.0 * prev_step, 1e-12, cfg.init_step);

    std::optional<std::pair<Point, Evaluation<Tangent>>> accepted;
    double step = first_step;
    const auto line_search = [&]() {
      step = first_step;
      for (std::size_t b = 0; b <= cfg.max_backtracks; ++b) {
        Point trial = manifold.retract(x, dir, step);
        auto e = detail::evaluate<M>(objective, trial, k + 1);
        if (e.value <= f + cfg.armijo_c1 * step * slope) {
          accepted.emplace(std::move(trial), std::move(e));
          return;
        }
        step *= cfg.backtrack_factor;
      }
    };
    line_search();
    if (!accepted && !steepest) {
      dir = -grad;
      slope = -grad_sq;
      steepest = true;
      line_search();
    }
    if (!accepted) {
      // The predicted decrease is already below the rounding noise of f: no
      // step can be verified, so this is a stall rather than a failure.
      if (first_step * std::abs(slope) <= kNoiseFloor * std::max(std::abs(f), 1.0)) {
        trace.reason = Termination::objective_stalled;
        break;
      }
      throw LineSearchFailure("Armijo line search failed after " +
                              std::to_string(cfg.max_backtracks) +
                              " backtracks along steepest descent at iterate " +
                              std::to_string(k));
    }

    Point x_new = manifold.restore(accepted->first);
    const double f_new = accepted->second.value;
    Tangent grad_new = manifold.project(x_new, accepted->second.gradient);
    const double grad_new_sq = manifold.inner(x_new, grad_new, grad_new);

    // Polak-Ribiere+ with transported previous gradient and direction.
    const Tangent grad_moved = manifold.transport(x_new, grad);
    const Tangent dir_moved = manifold.transport(x_new, dir);
    double beta = (grad_new_sq - manifold.inner(x_new, grad_new, grad_moved)) / grad_sq;
    beta = std::max(0.0, beta);
    if ((k + 1) % restart_period == 0 || !std::isfinite(beta)) beta = 0.0;

    steepest = beta == 0.0;
    dir = steepest ? -grad_new : -grad_new + beta * dir_moved;

    const double decrease = f - f_new;
    stalled = decrease <= cfg.rel_obj_tol * std::max(std::abs(f), 1e-300) ? stalled + 1 : 0;

    x = std::move(x_new);
    f = f_new;
    grad = std::move(grad_new);
    grad_sq = grad_new_sq;
    prev_step = step;

    trace.records.push_back({k + 1, f, std::sqrt(grad_sq), step, steepest});
    if (observer) observer(x, trace.records.back());

    if (stalled >= kStallWindow && std::sqrt(grad_sq) > cfg.grad_tol) {
      trace.reason = Termination::objective_stalled;
      break;
    }
  }
  return {std::move(x), std::move(trace)};
}

/// Compares <grad F, V> with the central difference
/// (F(R(p, tV)) - F(R(p, -tV))) / 2t for `probes` random tangents V and
/// returns the largest relative error |analytic - fd| / max(|fd|, 1e-8).
template <Manifold M, ObjectiveOn<M> F>
double grad_check(const M& manifold, F&& objective, const typename M::Point& point,
                  std::size_t probes, std::uint64_t seed, double t = 1e-5) {
  SplitMix64 rng(seed);
  const auto base = objective(point);
  const auto rgrad = manifold.project(point, base.gradient);
  double worst = 0.0;
  for (std::size_t i = 0; i < probes; ++i) {
    const auto v = manifold.random_tangent(point, rng);
    const double analytic = manifold.inner(point, rgrad, v);
    const double plus = objective(manifold.retract(point, v, t)).value;
    const double minus = objective(manifold.retract(point, -v, t)).value;
    const double fd = (plus - minus) / (2.0 * t);
    worst = std::max(worst, std::abs(analytic - fd) / std::max(std::abs(fd), 1e-8));
  }
  return worst;
}

/// Product-manifold convenience overloads.
template <ObjectiveOn<manifold::ProductManifold> F>
std::pair<manifold::ProductPoint, RcgTrace> minimize(
    F&& objective, manifold::ProductPoint init, const RcgConfig& cfg,
    const Observer<manifold::ProductManifold>& observer = {}) {
  return minimize(manifold::ProductManifold{}, std::forward<F>(objective), std::move(init), cfg,
                  observer);
}

template <ObjectiveOn<manifold::ProductManifold> F>
double grad_check(F&& objective, const manifold::ProductPoint& point, std::size_t probes,
                  std::uint64_t seed) {
  return grad_check(manifold::ProductManifold{}, std::forward<F>(objective), point, probes, seed);
}

}  // namespace godsbox::rcg
