#pragma once

// Riemannian steepest descent, nonlinear conjugate gradient (FR/PR/HS with
// transported history) and limited-memory BFGS (two-loop recursion, history
// parallel-transported at every step, dynamic and fixed restart strategies)
// over any Objective on the flag manifold.

#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flagopt/errors.hpp"
#include "flagopt/line_search.hpp"
#include "flagopt/manifold.hpp"

namespace flagopt::opt {

enum class Method { RSD, RCG, RLBFGS };
enum class BetaVariant {
  FletcherReeves,
  PolakRibiere,
  HestenesStiefel,
  Zero  // diagnostic: degenerates RCG to steepest descent
};
enum class RestartStrategy { Dynamic, Fixed };

struct MethodConfig {
  Method method = Method::RSD;
  BetaVariant beta_variant = BetaVariant::PolakRibiere;  // RCG only
  int memory = 8;                                        // RLBFGS only
  RestartStrategy restart = RestartStrategy::Dynamic;    // RLBFGS only
  double fixed_restart_threshold = 0.5;
  bool use_preconditioner = false;
  double tolerance = 1e-5;
  int max_iterations = 1000;
  LineSearchParams line_search;
  // Verification-harness knobs; never exposed by the CLI.
  bool naive_transport = false;  // RLBFGS ablation: keep history blocks untransported
  std::function<void(int, const FlagPoint&)> observer;

  void validate() const {
    if (!(tolerance > 0.0)) throw ContractViolation("tolerance must be positive");
    if (max_iterations < 1) throw ContractViolation("max_iterations must be positive");
    if (memory < 0) throw ContractViolation("memory must be non-negative");
    if (!(line_search.sufficient_decrease > 0.0 &&
          line_search.sufficient_decrease < line_search.curvature &&
          line_search.curvature < 1.0))
      throw ContractViolation("need 0 < sufficient_decrease < curvature < 1");
  }
};

struct IterationRecord {
  int index = 0;
  double energy = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  bool restart = false;
  double beta = 0.0;
};

struct OptimResult {
  FlagPoint point;
  bool converged = false;
  int iterations = 0;
  std::vector<IterationRecord> trace;  // row 0 is the initial point
  std::string message;
};

inline bool check_convergence(const TangentBlocks& g, double tol) {
  return metric_norm(g) <= tol;
}

namespace detail {

struct SolveState {
  FlagPoint x;
  double energy = 0.0;
  TangentBlocks grad;
  double t_accepted = 0.0;     // last accepted step length
  double dphi_accepted = 0.0;  // slope of the last accepted search
};

inline double initial_step(const SolveState& s, double dphi, bool have_history) {
  double t = 1.0 / (1.0 + metric_norm(s.grad));
  if (have_history) {
    const double scaled = s.t_accepted * (s.dphi_accepted / dphi);
    if (std::isfinite(scaled) && scaled > 0.0) t = scaled;
  }
  return t;
}

/// One accepted movement: line search along d; on failure one retry along
/// -grad with a halved initial step, a second failure in a row gives up.
inline std::optional<LineSearchResult> advance(const Objective& obj, SolveState& s,
                                               const TangentBlocks& d, double dphi,
                                               const MethodConfig& cfg, bool& fell_back) {
  fell_back = false;
  const double t0 = initial_step(s, dphi, s.t_accepted > 0.0);
  LineSearchResult ls = line_search(obj, s.x, d, t0, s.energy, dphi, cfg.line_search);
  if (!ls.ok) {
    fell_back = true;
    const double dphi_sd = -metric(s.grad, s.grad);
    if (!(dphi_sd < 0.0)) return std::nullopt;
    ls = line_search(obj, s.x, -s.grad, 0.5 * t0, s.energy, dphi_sd, cfg.line_search);
    if (!ls.ok) return std::nullopt;
    s.t_accepted = ls.t;
    s.dphi_accepted = dphi_sd;
    return ls;
  }
  s.t_accepted = ls.t;
  s.dphi_accepted = dphi;
  return ls;
}

inline void record(OptimResult& res, const SolveState& s, int index, double step,
                   bool restart, double beta, const MethodConfig& cfg) {
  res.trace.push_back({index, s.energy, metric_norm(s.grad), step, restart, beta});
  if (cfg.observer) cfg.observer(index, s.x);
}

inline SolveState start(const Objective& obj, const FlagPoint& x0) {
  SolveState s{x0, obj.energy(x0), obj.gradient(x0)};
  return s;
}

}  // namespace detail

/// Steepest descent: d = -grad (or -P grad), strong-Wolfe steps.
inline OptimResult solve_rsd(const Objective& obj, const FlagPoint& x0,
                             const MethodConfig& cfg) {
  cfg.validate();
  detail::SolveState s = detail::start(obj, x0);
  OptimResult res{s.x, false, 0, {}, ""};
  detail::record(res, s, 0, 0.0, false, 0.0, cfg);
  const bool precond = cfg.use_preconditioner && obj.has_preconditioner();

  for (int k = 1; k <= cfg.max_iterations; ++k) {
    if (check_convergence(s.grad, cfg.tolerance)) {
      res.converged = true;
      break;
    }
    TangentBlocks d = precond ? -obj.preconditioner(s.x).apply(s.grad) : -s.grad;
    double dphi = metric(s.grad, d);
    bool restart = false;
    if (!(dphi < 0.0)) {  // indefinite preconditioner fallback
      d = -s.grad;
      dphi = metric(s.grad, d);
      restart = true;
    }
    bool fell_back = false;
    auto ls = detail::advance(obj, s, d, dphi, cfg, fell_back);
    if (!ls) {
      res.message = "line search failed twice in a row";
      break;
    }
    s.x = std::move(ls->point);
    s.energy = ls->energy;
    s.grad = std::move(ls->gradient);
    res.iterations = k;
    detail::record(res, s, k, ls->t, restart || fell_back, 0.0, cfg);
  }
  if (!res.converged) res.converged = check_convergence(s.grad, cfg.tolerance);
  res.point = s.x;
  return res;
}

/// Nonlinear conjugate gradient: d = -z + beta * (transported previous d),
/// z = P grad when preconditioned. The previous direction rides the collinear
/// shortcut; the previous gradient is transported with the full series.
inline OptimResult solve_rcg(const Objective& obj, const FlagPoint& x0,
                             const MethodConfig& cfg) {
  cfg.validate();
  detail::SolveState s = detail::start(obj, x0);
  OptimResult res{s.x, false, 0, {}, ""};
  detail::record(res, s, 0, 0.0, false, 0.0, cfg);
  const bool precond = cfg.use_preconditioner && obj.has_preconditioner();

  bool have_history = false;
  TangentBlocks d_prev, g_prev_transported;  // both in the current tangent space
  double gz_prev = 0.0;                      // metric(g, z) at the previous iterate
  double gd_prev = 0.0;                      // metric(g, d) at the previous iterate

  for (int k = 1; k <= cfg.max_iterations; ++k) {
    if (check_convergence(s.grad, cfg.tolerance)) {
      res.converged = true;
      break;
    }
    const TangentBlocks z = precond ? obj.preconditioner(s.x).apply(s.grad) : s.grad;
    const double gz = metric(s.grad, z);

    double beta = 0.0;
    bool restart = false;
    if (have_history && cfg.beta_variant != BetaVariant::Zero) {
      switch (cfg.beta_variant) {
        case BetaVariant::FletcherReeves:
          beta = gz / gz_prev;
          break;
        case BetaVariant::PolakRibiere:
          beta = metric(z, s.grad - g_prev_transported) / gz_prev;
          break;
        case BetaVariant::HestenesStiefel: {
          const double denom = metric(s.grad, d_prev) - gd_prev;
          beta = denom != 0.0 ? metric(z, s.grad - g_prev_transported) / denom : 0.0;
          break;
        }
        default:
          break;
      }
      if (!std::isfinite(beta) || beta < 0.0) {  // PR+ style safeguard
        beta = 0.0;
        restart = true;
      }
    }

    TangentBlocks d = -z;
    if (beta != 0.0) d += beta * d_prev;
    double dphi = metric(s.grad, d);
    if (!(dphi < 0.0)) {  // not a descent direction: reset to steepest descent
      beta = 0.0;
      restart = true;
      d = -z;
      dphi = metric(s.grad, d);
      if (!(dphi < 0.0)) {  // preconditioner degenerate as well
        d = -s.grad;
        dphi = metric(s.grad, d);
      }
    }

    bool fell_back = false;
    auto ls = detail::advance(obj, s, d, dphi, cfg, fell_back);
    if (!ls) {
      res.message = "line search failed twice in a row";
      break;
    }

    // Move history to the new tangent space before overwriting the state.
    if (cfg.beta_variant != BetaVariant::Zero) {
      const TangentBlocks walked = fell_back ? -s.grad : d;
      g_prev_transported = transport(s.x, ls->t * walked, s.grad).vector;
      d_prev = walked;  // collinear transport leaves the blocks unchanged
      gz_prev = gz;
      gd_prev = metric(s.grad, d_prev);
      have_history = true;
    }

    s.x = std::move(ls->point);
    s.energy = ls->energy;
    s.grad = std::move(ls->gradient);
    res.iterations = k;
    detail::record(res, s, k, ls->t, restart || fell_back, beta, cfg);
  }
  if (!res.converged) res.converged = check_convergence(s.grad, cfg.tolerance);
  res.point = s.x;
  return res;
}

/// Limited-memory BFGS with the two-loop recursion. Stored pairs are
/// parallel-transported to the current tangent space after every step;
/// B0 = gamma Id, or gamma_hat P with the Sylvester preconditioner.
inline OptimResult solve_rlbfgs(const Objective& obj, const FlagPoint& x0,
                                const MethodConfig& cfg) {
  cfg.validate();
  detail::SolveState s = detail::start(obj, x0);
  OptimResult res{s.x, false, 0, {}, ""};
  detail::record(res, s, 0, 0.0, false, 0.0, cfg);
  const bool precond = cfg.use_preconditioner && obj.has_preconditioner();

  struct Pair {
    TangentBlocks s_vec, y_vec;
    double rho;
  };
  std::deque<Pair> pairs;
  double gamma = 1.0, gamma_hat = 1.0;

  Preconditioner P;
  Vector frozen_denoms;
  if (precond) {
    P = obj.preconditioner(s.x);
    frozen_denoms = P.denominators;
  }

  const auto two_loop = [&](const TangentBlocks& g) {
    TangentBlocks q = g;
    std::vector<double> alpha(pairs.size());
    for (int j = static_cast<int>(pairs.size()) - 1; j >= 0; --j) {
      alpha[j] = pairs[j].rho * metric(pairs[j].s_vec, q);
      q -= alpha[j] * pairs[j].y_vec;
    }
    TangentBlocks r = precond ? gamma_hat * P.apply(q) : gamma * q;
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      const double b = pairs[j].rho * metric(pairs[j].y_vec, r);
      r += (alpha[j] - b) * pairs[j].s_vec;
    }
    return r;
  };

  for (int k = 1; k <= cfg.max_iterations; ++k) {
    if (check_convergence(s.grad, cfg.tolerance)) {
      res.converged = true;
      break;
    }
    if (precond && cfg.restart == RestartStrategy::Dynamic) {
      P = obj.preconditioner(s.x);  // rebuilt every iteration
    }

    bool restart = false;
    TangentBlocks d = -two_loop(s.grad);
    double dphi = metric(s.grad, d);
    if (!(dphi < 0.0)) {  // quasi-Newton direction unusable: reset history
      pairs.clear();
      gamma = gamma_hat = 1.0;
      restart = true;
      d = precond ? -P.apply(s.grad) : -s.grad;
      dphi = metric(s.grad, d);
      if (!(dphi < 0.0)) {
        d = -s.grad;
        dphi = metric(s.grad, d);
      }
    }

    bool fell_back = false;
    auto ls = detail::advance(obj, s, d, dphi, cfg, fell_back);
    if (!ls) {
      res.message = "line search failed twice in a row";
      break;
    }
    const TangentBlocks walked = fell_back ? -s.grad : d;

    // Transport the stored pairs and the old gradient along the step taken.
    TangentBlocks step_vec = ls->t * walked;
    TangentBlocks g_old = s.grad;
    if (!cfg.naive_transport) {
      for (Pair& p : pairs) {
        p.s_vec = transport(s.x, step_vec, p.s_vec).vector;
        p.y_vec = transport(s.x, step_vec, p.y_vec).vector;
      }
      g_old = transport(s.x, step_vec, g_old).vector;
    }

    s.x = std::move(ls->point);
    s.energy = ls->energy;
    s.grad = std::move(ls->gradient);

    TangentBlocks s_new = step_vec;  // collinear transport is exact
    TangentBlocks y_new = s.grad - g_old;
    const double sy = metric(s_new, y_new);
    const double guard =
        1e-12 * std::sqrt(metric(s_new, s_new)) * std::sqrt(metric(y_new, y_new));
    if (cfg.memory > 0 && sy > guard) {
      gamma = sy / metric(y_new, y_new);
      if (precond) {
        const double ypy = metric(y_new, P.apply(y_new));
        gamma_hat = ypy > 0.0 ? sy / ypy : 1.0;
      }
      pairs.push_back({std::move(s_new), std::move(y_new), 1.0 / sy});
      if (static_cast<int>(pairs.size()) > cfg.memory) pairs.pop_front();
    }

    if (precond && cfg.restart == RestartStrategy::Fixed) {
      const Vector current = obj.preconditioner(s.x).denominators;
      const double ref = frozen_denoms.norm();
      const double dev = ref > 0.0 ? (current - frozen_denoms).norm() / ref
                                   : (current - frozen_denoms).norm();
      if (dev > cfg.fixed_restart_threshold) {
        pairs.clear();
        gamma = gamma_hat = 1.0;
        P = obj.preconditioner(s.x);
        frozen_denoms = P.denominators;
        restart = true;
      }
    }

    res.iterations = k;
    detail::record(res, s, k, ls->t, restart || fell_back, 0.0, cfg);
  }
  if (!res.converged) res.converged = check_convergence(s.grad, cfg.tolerance);
  res.point = s.x;
  return res;
}

/// Dispatch by config.method.
inline OptimResult solve(const Objective& obj, const FlagPoint& x0, const MethodConfig& cfg) {
  switch (cfg.method) {
    case Method::RSD: return solve_rsd(obj, x0, cfg);
    case Method::RCG: return solve_rcg(obj, x0, cfg);
    default: return solve_rlbfgs(obj, x0, cfg);
  }
}

}  // namespace flagopt::opt
