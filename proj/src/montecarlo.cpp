#include "gvi2d/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <utility>

#include "gvi2d/esgvi.hpp"
#include "gvi2d/graph.hpp"
#include "gvi2d/map_solver.hpp"
#include "gvi2d/rng.hpp"
#include "gvi2d/sim.hpp"

namespace gvi2d {
namespace {

// Residuals a range factor would see at a perfect state: measurement noise
// plus the occasional NLOS offset, drawn once and shared by all three fits.
std::vector<double> predraw_residuals(const ExperimentConfig& cfg) {
  const std::vector<RangeSample> zeros(static_cast<std::size_t>(cfg.noise_fit_samples));
  const RangeStream stream =
      corrupt_ranges(zeros, cfg.sim.range_sigma, cfg.sim.corrupt_fraction,
                     cfg.sim.corrupt_lo_sigmas, cfg.sim.corrupt_hi_sigmas,
                     derive_seed(cfg.sim.seed, "noise-fit"));
  std::vector<double> out;
  out.reserve(stream.samples.size());
  for (const RangeSample& s : stream.samples) out.push_back(s.range);
  return out;
}

double worst_rise(const std::vector<IterationReport>& trace) {
  double w = 0.0;
  for (std::size_t t = 1; t < trace.size(); ++t)
    w = std::max(w, trace[t].loss - trace[t - 1].loss);
  return w;
}

double worst_rise(const std::vector<MapIterationReport>& trace) {
  double w = 0.0;
  for (std::size_t t = 1; t < trace.size(); ++t)
    w = std::max(w, trace[t].objective - trace[t - 1].objective);
  return w;
}

bool graph_banded(const FactorGraph<Pose2>& g) {
  for (const auto& f : g.factors) {
    if (f->arity() == 1) continue;
    if (f->arity() != 2 || f->state(1) != f->state(0) + 1) return false;
  }
  return true;
}

// Exact zeros outside the block-tridiagonal band of the assembled system.
bool offband_zero(const BlockTridiag<3>& info) {
  const Eigen::MatrixXd dense = info.dense();
  const int n = info.num_blocks();
  for (int bi = 0; bi < n; ++bi)
    for (int bj = 0; bj < n; ++bj) {
      if (std::abs(bi - bj) <= 1) continue;
      if (!(dense.block<3, 3>(3 * bi, 3 * bj).array() == 0.0).all()) return false;
    }
  return true;
}

struct TrialOutcome {
  TrialResult map_c, map_gmm, esgvi;
  double worst_esgvi_rise = 0.0;
  double worst_map_rise = 0.0;
  bool sparsity_checked = false;
  bool sparsity_ok = true;
};

TrialOutcome run_trial(const ExperimentConfig& cfg, const FittedModels& models, int trial,
                       bool check_sparsity) {
  TrialOutcome out;
  out.map_c = failed_trial(kEstimatorMapC, trial, "not reached");
  out.map_gmm = failed_trial(kEstimatorMapGmm, trial, "not reached");
  out.esgvi = failed_trial(kEstimatorEsgvi, trial, "not reached");
  try {
    const std::uint64_t seed =
        derive_seed(cfg.sim.seed, "trial", static_cast<std::uint64_t>(trial));
    const SimOutput sim = simulate_trajectory(cfg.sim, seed);
    const int m = cfg.sim.odometry_per_state();

    // Ground truth at the state resolution (every m-th propagation step).
    Trajectory<Pose2> truth;
    truth.states.reserve(static_cast<std::size_t>(cfg.sim.poses) + 1);
    truth.times.reserve(static_cast<std::size_t>(cfg.sim.poses) + 1);
    for (int k = 0; k <= cfg.sim.poses; ++k) {
      truth.states.push_back(sim.truth.states[static_cast<std::size_t>(k) * m]);
      truth.times.push_back(sim.truth.times[static_cast<std::size_t>(k) * m]);
    }

    // The prior is centred on a perturbed start drawn from its own
    // covariance, so the prior factor is itself statistically consistent.
    Rng prior_rng(derive_seed(seed, "prior"));
    Twist2 delta;
    for (int d = 0; d < 3; ++d) delta[d] = prior_rng.normal(0.0, std::sqrt(cfg.prior_cov[d]));
    PriorSpec prior;
    prior.mean = truth.states.front().oplus(delta, cfg.side);
    prior.cov = cfg.prior_cov.asDiagonal();

    GraphBuildConfig gcfg;
    gcfg.downsample = m;
    gcfg.dt_odo = cfg.sim.dt / m;
    gcfg.qc = cfg.sim.qc.asDiagonal();
    gcfg.side = cfg.side;

    const FactorGraph<Pose2> g_c = build_graph(sim.odometry, sim.ranges, prior, cfg.sim.anchors,
                                               cfg.sim.tag_offsets, models.map_c, gcfg);
    const FactorGraph<Pose2> g_g = build_graph(sim.odometry, sim.ranges, prior, cfg.sim.anchors,
                                               cfg.sim.tag_offsets, models.map_gmm, gcfg);
    const FactorGraph<Pose2> g_s = build_graph(sim.odometry, sim.ranges, prior, cfg.sim.anchors,
                                               cfg.sim.tag_offsets, models.esgvi, gcfg);
    const Trajectory<Pose2> init = dead_reckon(g_c, prior.mean);

    std::optional<MapEstimate<Pose2>> warm;
    try {
      MapEstimate<Pose2> e = map_solve(g_c, init, cfg.map);
      out.worst_map_rise = std::max(out.worst_map_rise, worst_rise(e.trace));
      if (e.converged) {
        out.map_c = make_trial_result(kEstimatorMapC, trial, e.mean.states, truth.states,
                                      e.covariance.diag, cfg.side);
        warm = std::move(e);
      } else {
        out.map_c = failed_trial(kEstimatorMapC, trial, "no convergence within iteration budget");
      }
    } catch (const std::exception& ex) {
      out.map_c = failed_trial(kEstimatorMapC, trial, ex.what());
    }

    try {
      const MapEstimate<Pose2> e = map_solve(g_g, init, cfg.map);
      out.worst_map_rise = std::max(out.worst_map_rise, worst_rise(e.trace));
      if (e.converged)
        out.map_gmm = make_trial_result(kEstimatorMapGmm, trial, e.mean.states, truth.states,
                                        e.covariance.diag, cfg.side);
      else
        out.map_gmm =
            failed_trial(kEstimatorMapGmm, trial, "no convergence within iteration budget");
    } catch (const std::exception& ex) {
      out.map_gmm = failed_trial(kEstimatorMapGmm, trial, ex.what());
    }

    try {
      const VariationalResult<Pose2> r = (cfg.solver.warm_start && warm)
                                             ? solve(g_s, warm_start(*warm), cfg.solver)
                                             : solve(g_s, init, cfg.solver);
      out.worst_esgvi_rise = std::max(out.worst_esgvi_rise, worst_rise(r.report.trace));
      if (r.report.converged)
        out.esgvi = make_trial_result(kEstimatorEsgvi, trial, r.estimate.mean.states,
                                      truth.states, r.estimate.marginals.diag, cfg.side);
      else
        out.esgvi = failed_trial(kEstimatorEsgvi, trial, "no convergence within iteration budget");
      if (check_sparsity) {
        out.sparsity_checked = true;
        out.sparsity_ok = graph_banded(g_c) && graph_banded(g_g) && graph_banded(g_s) &&
                          offband_zero(r.estimate.info);
        if (warm) out.sparsity_ok = out.sparsity_ok && offband_zero(warm->info);
      }
    } catch (const std::exception& ex) {
      out.esgvi = failed_trial(kEstimatorEsgvi, trial, ex.what());
    }
  } catch (const std::exception& ex) {
    out.map_c = failed_trial(kEstimatorMapC, trial, ex.what());
    out.map_gmm = failed_trial(kEstimatorMapGmm, trial, ex.what());
    out.esgvi = failed_trial(kEstimatorEsgvi, trial, ex.what());
  } catch (...) {
    out.map_c = failed_trial(kEstimatorMapC, trial, "unknown error");
    out.map_gmm = failed_trial(kEstimatorMapGmm, trial, "unknown error");
    out.esgvi = failed_trial(kEstimatorEsgvi, trial, "unknown error");
  }
  return out;
}

}  // namespace

FittedModels fit_noise_models(const ExperimentConfig& cfg) {
  cfg.check();
  FittedModels out;
  out.residuals = predraw_residuals(cfg);
  out.map_c = cfg.noise_model_map_c.empty() ? NoiseModel(fit_asym_cauchy(out.residuals))
                                            : read_noise_model(cfg.noise_model_map_c);
  out.map_gmm = cfg.noise_model_map_gmm.empty()
                    ? NoiseModel(fit_gmm_em(out.residuals, cfg.gmm_components,
                                            derive_seed(cfg.sim.seed, "gmm-fit")))
                    : read_noise_model(cfg.noise_model_map_gmm);
  out.esgvi = cfg.noise_model_esgvi.empty() ? NoiseModel(fit_skew_laplace(out.residuals))
                                            : read_noise_model(cfg.noise_model_esgvi);
  out.ll_map_c = log_likelihood(out.map_c, out.residuals);
  out.ll_map_gmm = log_likelihood(out.map_gmm, out.residuals);
  out.ll_esgvi = log_likelihood(out.esgvi, out.residuals);
  return out;
}

MonteCarloReport run_monte_carlo(const ExperimentConfig& cfg, int jobs) {
  cfg.check();
  MonteCarloReport report;
  report.models = fit_noise_models(cfg);

  const int n = cfg.sim.trials;
  const auto is_sampled = [n](int i) { return i == 0 || i == n / 2 || i == n - 1; };

  std::vector<TrialOutcome> slots(static_cast<std::size_t>(n));
  int workers = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, n);

  // Trials claim indices from a shared counter and write into their own
  // slots; per-trial seeds make the result independent of the scheduling.
  std::atomic<int> next{0};
  const auto run = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1))
      slots[static_cast<std::size_t>(i)] = run_trial(cfg, report.models, i, is_sampled(i));
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (std::thread& t : pool) t.join();
  }

  report.trials.reserve(static_cast<std::size_t>(3) * n);
  for (TrialOutcome& s : slots) {
    report.worst_map_rise = std::max(report.worst_map_rise, s.worst_map_rise);
    report.worst_esgvi_rise = std::max(report.worst_esgvi_rise, s.worst_esgvi_rise);
    if (s.sparsity_checked) {
      ++report.sparsity_trials_checked;
      report.sparsity_ok = report.sparsity_ok && s.sparsity_ok;
    }
    report.trials.push_back(std::move(s.map_c));
    report.trials.push_back(std::move(s.map_gmm));
    report.trials.push_back(std::move(s.esgvi));
  }
  for (const TrialResult& t : report.trials)
    if (t.failed) ++report.failures;
  report.monotone_ok = report.worst_esgvi_rise <= cfg.solver.loss_slack &&
                       report.worst_map_rise <= cfg.map.objective_slack;
  report.aggregate = summarize(report.trials);
  return report;
}

}  // namespace gvi2d
