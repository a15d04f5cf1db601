#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gvi2d/block_tridiag.hpp"
#include "gvi2d/common.hpp"
#include "gvi2d/esgvi.hpp"
#include "gvi2d/graph.hpp"
#include "gvi2d/noise.hpp"

namespace gvi2d {

// ---------------------------------------------------------- configuration --

struct MapConfig {
  int max_iterations = 200;
  double tol_step_inf = 1e-8;     // convergence on ‖δ‖∞
  double lm_init = 1e-4;          // initial Levenberg-Marquardt damping
  double lm_grow = 10.0;          // damping factor on a rejected step
  double lm_shrink = 0.1;         // damping factor on an accepted step
  double objective_slack = 1e-12;  // accepted steps may not increase F beyond this

  void check() const {
    if (max_iterations < 1) throw ConfigError("map: max_iterations must be positive");
    if (!(tol_step_inf > 0.0)) throw ConfigError("map: step tolerance must be positive");
    if (!(lm_init > 0.0) || !(lm_grow > 1.0) || !(lm_shrink <= 1.0) || !(lm_shrink > 0.0))
      throw ConfigError("map: damping schedule must satisfy init > 0, grow > 1, shrink in (0, 1]");
  }
};

struct MapIterationReport {
  int iteration = 0;
  double objective = 0.0;  // F after this pass (unchanged if rejected)
  double step_inf = 0.0;
  double lambda = 0.0;  // damping used for the proposed step
  bool accepted = false;
  int clamps = 0;  // eigenvalue clamps from numeric-fallback linearizations
};

template <GroupState G>
struct MapEstimate {
  Trajectory<G> mean;
  BlockTridiag<G::kDof> info;     // true-curvature (Laplace) information at the solution
  Marginals<G::kDof> covariance;  // Laplace-approximation marginal blocks
  double objective = 0.0;
  std::vector<MapIterationReport> trace;
  bool converged = false;
  Side side = Side::Right;
};

// ------------------------------------------------------------ IRLS weight --

/// Iteratively-reweighted least-squares weight w(r) = (1/r)·dφ/dr. At r = 0
/// the analytic limit is φ''(0), taken from the right for energies with a
/// kink there (matching d_energy/dd_energy conventions): the skew-Laplace
/// weight diverges like a±/|r| near zero — the reason the L1-flavored model
/// is paired with the variational solver rather than IRLS — and the
/// asymmetric Cauchy limit is branch-dependent, 2/c±².
inline double robust_weight(const NoiseModel& m, double r) {
  if (r == 0.0) return dd_energy(m, 0.0);
  return d_energy(m, r) / r;
}

// ------------------------------------------------- numeric linearization ---

/// Central-difference blocks for factors that expose only φ: gradient at
/// h = 1e-6, Hessian at h = 1e-4 (second differences lose half the digits,
/// so the Hessian needs the larger step). The Hessian estimate is the true
/// curvature up to differencing error — possibly indefinite; the
/// Gauss-Newton path clamps it below.
template <GroupState G>
LocalBlocks<G> numeric_blocks(const Factor<G>& f, const G& x, Side side) {
  constexpr int n = G::kDof;
  using Tangent = typename G::Tangent;
  const double hg = 1e-6, hh = 1e-4;

  LocalBlocks<G> b;
  b.value = f.energy(x);
  b.grad.resize(n);
  b.hess.resize(n, n);
  const auto phi = [&](const Tangent& d) { return f.energy(x.oplus(d, side)); };
  for (int i = 0; i < n; ++i) {
    Tangent e = Tangent::Zero();
    e(i) = hg;
    b.grad(i) = (phi(e) - phi(Tangent(-e))) / (2.0 * hg);
  }
  for (int i = 0; i < n; ++i) {
    Tangent ei = Tangent::Zero();
    ei(i) = hh;
    b.hess(i, i) = (phi(ei) - 2.0 * b.value + phi(Tangent(-ei))) / (hh * hh);
    for (int j = i + 1; j < n; ++j) {
      Tangent ej = Tangent::Zero();
      ej(j) = hh;
      const double v = (phi(Tangent(ei + ej)) - phi(Tangent(ei - ej)) - phi(Tangent(ej - ei)) +
                        phi(Tangent(-ei - ej))) /
                       (4.0 * hh * hh);
      b.hess(i, j) = v;
      b.hess(j, i) = v;
    }
  }
  return b;
}

template <GroupState G>
LocalBlocks<G> numeric_blocks(const Factor<G>& f, const G& xa, const G& xb, Side side) {
  constexpr int n = G::kDof;
  using Tangent = typename G::Tangent;
  const double hg = 1e-6, hh = 1e-4;

  LocalBlocks<G> b;
  b.value = f.energy(xa, xb);
  b.grad.resize(2 * n);
  b.hess.resize(2 * n, 2 * n);
  const auto phi = [&](const Eigen::Matrix<double, 2 * n, 1>& d) {
    return f.energy(xa.oplus(Tangent(d.template head<n>()), side),
                    xb.oplus(Tangent(d.template tail<n>()), side));
  };
  using Vec = Eigen::Matrix<double, 2 * n, 1>;
  for (int i = 0; i < 2 * n; ++i) {
    Vec e = Vec::Zero();
    e(i) = hg;
    b.grad(i) = (phi(e) - phi(Vec(-e))) / (2.0 * hg);
  }
  for (int i = 0; i < 2 * n; ++i) {
    Vec ei = Vec::Zero();
    ei(i) = hh;
    b.hess(i, i) = (phi(ei) - 2.0 * b.value + phi(Vec(-ei))) / (hh * hh);
    for (int j = i + 1; j < 2 * n; ++j) {
      Vec ej = Vec::Zero();
      ej(j) = hh;
      const double v =
          (phi(Vec(ei + ej)) - phi(Vec(ei - ej)) - phi(Vec(ej - ei)) + phi(Vec(-ei - ej))) /
          (4.0 * hh * hh);
      b.hess(i, j) = v;
      b.hess(j, i) = v;
    }
  }
  return b;
}

/// PSD-clamped numeric blocks, the Gauss-Newton-grade fallback for the
/// iteration matrix. Returns the clamp count through `clamps`.
template <GroupState G>
LocalBlocks<G> numeric_linearize(const Factor<G>& f, const G& x, Side side, int& clamps) {
  LocalBlocks<G> b = numeric_blocks(f, x, side);
  clamps += clamp_psd(b.hess, 1e-9);
  return b;
}

template <GroupState G>
LocalBlocks<G> numeric_linearize(const Factor<G>& f, const G& xa, const G& xb, Side side,
                                 int& clamps) {
  LocalBlocks<G> b = numeric_blocks(f, xa, xb, side);
  clamps += clamp_psd(b.hess, 1e-9);
  return b;
}

namespace detail {

/// Gauss-Newton system at the given states: analytic linearization where the
/// factor provides it, central differences otherwise.
template <GroupState G>
AssembledSystem<G> linearize_graph(const FactorGraph<G>& graph, const std::vector<G>& states,
                                   int& clamps) {
  AssembledSystem<G> sys{BlockTridiag<G::kDof>(graph.num_states()),
                         Eigen::VectorXd::Zero(graph.num_states() * G::kDof)};
  for (const auto& f : graph.factors) {
    LocalBlocks<G> b;
    const auto* mf = dynamic_cast<const MapFactor<G>*>(f.get());
    if (f->arity() == 1) {
      const G& x = states[f->state(0)];
      b = mf ? mf->linearize(x) : numeric_linearize(*f, x, graph.side, clamps);
    } else {
      const G& xa = states[f->state(0)];
      const G& xb = states[f->state(1)];
      b = mf ? mf->linearize(xa, xb) : numeric_linearize(*f, xa, xb, graph.side, clamps);
    }
    scatter_add(*f, b, sys.info, sys.grad);
  }
  return sys;
}

/// Information matrix of the Laplace approximation at the solution: true
/// second derivatives of the energies instead of the Gauss-Newton surrogate
/// the iteration uses. Robust losses contribute little — or negative —
/// curvature through outlier-dominated factors, so the result can lose
/// definiteness; the marginal extraction then throws CovarianceNotSPD.
template <GroupState G>
BlockTridiag<G::kDof> laplace_info(const FactorGraph<G>& graph, const std::vector<G>& states) {
  BlockTridiag<G::kDof> info(graph.num_states());
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(graph.num_states() * G::kDof);
  for (const auto& f : graph.factors) {
    LocalBlocks<G> b;
    const auto* mf = dynamic_cast<const MapFactor<G>*>(f.get());
    if (f->arity() == 1) {
      const G& x = states[f->state(0)];
      b = mf ? mf->laplace_blocks(x) : numeric_blocks(*f, x, graph.side);
    } else {
      const G& xa = states[f->state(0)];
      const G& xb = states[f->state(1)];
      b = mf ? mf->laplace_blocks(xa, xb) : numeric_blocks(*f, xa, xb, graph.side);
    }
    scatter_add(*f, b, info, grad);
  }
  return info;
}

}  // namespace detail

// ------------------------------------------------------------------ solve --

/// Levenberg-Marquardt minimization of F(X) = Σ_k φ_k with Marquardt-style
/// damping (λ scales the diagonal of H, keeping the regularization unit-aware
/// across rad/m blocks). Non-convergence within the budget is reported
/// through the flag, not an exception: the best iterate is still returned
/// with its Laplace covariance.
template <GroupState G>
MapEstimate<G> map_solve(const FactorGraph<G>& graph, const Trajectory<G>& init,
                         const MapConfig& cfg = {}) {
  cfg.check();
  constexpr int D = G::kDof;
  const int num_states = graph.num_states();
  if (static_cast<int>(init.states.size()) != num_states)
    throw LengthMismatch("map: initial trajectory length does not match the graph");

  std::vector<G> states = init.states;
  double objective = total_energy(graph, states);
  double lambda = cfg.lm_init;
  constexpr double kLambdaFloor = 1e-12, kLambdaCeiling = 1e10;

  std::vector<MapIterationReport> trace;
  bool converged = false;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    MapIterationReport rep;
    rep.iteration = it;
    rep.lambda = lambda;

    auto sys = detail::linearize_graph(graph, states, rep.clamps);
    BlockTridiag<D> damped = sys.info;
    for (int k = 0; k < num_states; ++k) {
      const Eigen::Matrix<double, D, 1> d = sys.info.diag(k).diagonal();
      damped.add_diag(k, Eigen::Matrix<double, D, D>(lambda * d.asDiagonal()));
    }
    const Eigen::VectorXd delta = BlockCholesky<D>(damped).solve(-sys.grad);
    rep.step_inf = delta.lpNorm<Eigen::Infinity>();

    if (rep.step_inf < cfg.tol_step_inf) {
      rep.objective = objective;
      trace.push_back(rep);
      converged = true;
      break;
    }

    std::vector<G> candidate(states);
    for (int k = 0; k < num_states; ++k)
      candidate[k] =
          states[k].oplus(typename G::Tangent(delta.template segment<D>(k * D)), graph.side);
    const double objective_new = total_energy(graph, candidate);

    // Difference form so the recorded trace rise — the same subtraction —
    // is bounded by the slack exactly, with no rounding headroom.
    if (objective_new - objective <= cfg.objective_slack) {
      states = std::move(candidate);
      objective = objective_new;
      lambda = std::max(kLambdaFloor, lambda * cfg.lm_shrink);
      rep.accepted = true;
    } else {
      lambda *= cfg.lm_grow;
    }
    rep.objective = objective;
    trace.push_back(rep);

    if (lambda > kLambdaCeiling) break;  // stalled: damping saturated
  }

  MapEstimate<G> est{Trajectory<G>{std::move(states), init.times},
                     BlockTridiag<D>(num_states),
                     {},
                     objective,
                     std::move(trace),
                     converged,
                     graph.side};
  est.info = detail::laplace_info(graph, est.mean.states);
  est.covariance = marginal_covariances(est.info);
  return est;
}

/// ESGVI warm start from a MAP solution: the MAP mean with its Laplace
/// information matrix as the initial variational estimate.
template <GroupState G>
VariationalEstimate<G> warm_start(const MapEstimate<G>& map) {
  return make_estimate(map.mean, map.info, map.side);
}

}  // namespace gvi2d
