#pragma once

// Strong-Wolfe line search on the pullback phi(t) = E(retract(x, t d)).
// Bracketing with interpolation-driven expansion, then zoom; the slope at a
// trial point is metric(grad, d) because the geodesic velocity keeps the
// direction's block representation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>

#include "flagopt/errors.hpp"
#include "flagopt/manifold.hpp"
#include "flagopt/objective.hpp"

namespace flagopt::opt {

struct LineSearchParams {
  double sufficient_decrease = 1e-4;
  double curvature = 0.9;
  int max_evaluations = 40;
  // Cap on the geodesic length |t d| of any trial; keeps trial points inside
  // the regime where the transport series converges comfortably.
  double max_step_length = 20.0;
};

struct LineSearchResult {
  bool ok = false;
  double t = 0.0;
  FlagPoint point;
  double energy = 0.0;
  TangentBlocks gradient;
  int evaluations = 0;
};

namespace detail {

struct Trial {
  double t, phi, dphi;
  FlagPoint point;
  TangentBlocks grad;
};

/// Minimizer of the quadratic through (a, fa, dfa) and (b, fb); NaN if flat.
inline double quadratic_step(double a, double fa, double dfa, double b, double fb) {
  const double denom = 2.0 * (fb - fa - dfa * (b - a));
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return a - dfa * (b - a) * (b - a) / denom;
}

}  // namespace detail

/// Strong Wolfe conditions with constants (c1, c2):
///   phi(t) <= phi(0) + c1 t phi'(0)   and   |phi'(t)| <= c2 |phi'(0)|.
/// Throws ContractViolation if d is not a descent direction. Returns
/// ok = false when the evaluation budget runs out without a Wolfe point.
inline LineSearchResult line_search(const Objective& obj, const FlagPoint& x,
                                    const TangentBlocks& d, double t0, double phi0,
                                    double dphi0, const LineSearchParams& params = {}) {
  if (!(dphi0 < 0.0))
    throw ContractViolation("line search requires a descent direction");
  if (!(t0 > 0.0)) throw ContractViolation("line search requires a positive initial step");
  const double c1 = params.sufficient_decrease, c2 = params.curvature;

  LineSearchResult out;
  const auto evaluate = [&](double t) {
    FlagPoint pt = retract(x, t * d);
    const double e = obj.energy(pt);
    TangentBlocks g = obj.gradient(pt);
    ++out.evaluations;
    return detail::Trial{t, e, metric(g, d), std::move(pt), std::move(g)};
  };
  const auto accept = [&](detail::Trial&& tr) {
    out.ok = true;
    out.t = tr.t;
    out.point = std::move(tr.point);
    out.energy = tr.phi;
    out.gradient = std::move(tr.grad);
    return out;
  };
  const auto wolfe = [&](const detail::Trial& tr) {
    return tr.phi <= phi0 + c1 * tr.t * dphi0 && std::abs(tr.dphi) <= c2 * std::abs(dphi0);
  };

  // Zoom keeps a bracket [lo, hi] with lo the best Wolfe-decrease end.
  const auto zoom = [&](detail::Trial lo, detail::Trial hi) -> LineSearchResult {
    while (out.evaluations < params.max_evaluations) {
      double t = detail::quadratic_step(lo.t, lo.phi, lo.dphi, hi.t, hi.phi);
      const double lo_t = std::min(lo.t, hi.t), hi_t = std::max(lo.t, hi.t);
      const double width = hi_t - lo_t;
      if (!std::isfinite(t) || t < lo_t + 0.1 * width || t > hi_t - 0.1 * width)
        t = 0.5 * (lo.t + hi.t);
      if (width <= 1e-16 * std::max(1.0, hi_t)) break;
      detail::Trial tr = evaluate(t);
      if (wolfe(tr)) return accept(std::move(tr));
      if (tr.phi > phi0 + c1 * tr.t * dphi0 || tr.phi >= lo.phi) {
        hi = std::move(tr);
      } else {
        if (tr.dphi * (hi.t - lo.t) >= 0.0) hi = std::move(lo);
        lo = std::move(tr);
      }
    }
    return out;  // ok = false
  };

  const double d_norm = metric_norm(d);
  const double t_cap =
      d_norm > 0.0 ? params.max_step_length / d_norm : std::numeric_limits<double>::max();

  detail::Trial prev{0.0, phi0, dphi0, x, TangentBlocks(x.shape)};
  double t = std::min(t0, t_cap);
  bool first = true;
  while (out.evaluations < params.max_evaluations) {
    detail::Trial tr = evaluate(t);
    if (tr.phi > phi0 + c1 * tr.t * dphi0 || (!first && tr.phi >= prev.phi))
      return zoom(std::move(prev), std::move(tr));
    if (wolfe(tr)) return accept(std::move(tr));
    if (tr.dphi >= 0.0) return zoom(std::move(tr), std::move(prev));
    if (tr.t >= t_cap) return out;  // cannot expand further
    // Still descending: expand, preferring the one-dimensional quadratic model.
    double next = detail::quadratic_step(0.0, phi0, dphi0, tr.t, tr.phi);
    if (!std::isfinite(next) || next <= tr.t) next = 2.0 * tr.t;
    next = std::min({next, 100.0 * tr.t, t_cap});
    prev = std::move(tr);
    t = next;
    first = false;
  }
  return out;  // budget exhausted
}

/// Convenience overload evaluating phi(0) and phi'(0) from the objective.
inline LineSearchResult line_search(const Objective& obj, const FlagPoint& x,
                                    const TangentBlocks& d, double t0,
                                    const LineSearchParams& params = {}) {
  const double phi0 = obj.energy(x);
  const TangentBlocks g0 = obj.gradient(x);
  return line_search(obj, x, d, t0, phi0, metric(g0, d), params);
}

}  // namespace flagopt::opt
