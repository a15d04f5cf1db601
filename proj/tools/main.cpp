// Command-line front end: simulate datasets, fit noise models, run single
// estimates, score them, and drive the full Monte-Carlo comparison.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver
// failure, 1 anything unexpected.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "gvi2d/esgvi.hpp"
#include "gvi2d/graph.hpp"
#include "gvi2d/io.hpp"
#include "gvi2d/map_solver.hpp"
#include "gvi2d/metrics.hpp"
#include "gvi2d/montecarlo.hpp"
#include "gvi2d/noise.hpp"
#include "gvi2d/rng.hpp"
#include "gvi2d/sim.hpp"

namespace fs = std::filesystem;
using namespace gvi2d;

namespace {

ExperimentConfig load_cli_config(const std::string& path,
                                 const std::optional<std::uint64_t>& seed) {
  ExperimentConfig cfg;
  if (!path.empty()) cfg = load_config(path);
  if (seed) cfg.sim.seed = *seed;
  cfg.check();
  return cfg;
}

int cmd_simulate(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const SimOutput sim = simulate_trajectory(cfg.sim, cfg.sim.seed);
  const Dataset ds = dataset_from_sim(cfg.sim, sim);
  write_dataset(out_dir, ds, provenance_of(cfg));
  std::cout << "dataset: " << ds.odometry.size() << " odometry samples, " << ds.ranges.size()
            << " ranges, " << ds.truth.states.size() << " truth states -> " << out_dir.string()
            << "\n";
  return 0;
}

int cmd_fit_noise(const ExperimentConfig& cfg, const fs::path& input, const std::string& method,
                  const fs::path& output) {
  const std::vector<double> residuals = read_residuals(input);
  NoiseModel model;
  if (method == "skew-laplace")
    model = fit_skew_laplace(residuals);
  else if (method == "asym-cauchy")
    model = fit_asym_cauchy(residuals);
  else if (method == "gmm")
    model = fit_gmm_em(residuals, cfg.gmm_components, derive_seed(cfg.sim.seed, "gmm-fit"));
  else
    throw ConfigError("fit-noise: unknown method '" + method +
                      "' (expected skew-laplace, asym-cauchy, or gmm)");
  const double ll = log_likelihood(model, residuals);
  if (!output.empty()) write_noise_model(output, model, ll, provenance_of(cfg));
  std::cout << noise_to_json(model).dump() << "\n"
            << "log_likelihood " << format_double(ll) << " over " << residuals.size()
            << " samples\n";
  return 0;
}

int cmd_estimate(const ExperimentConfig& cfg, const fs::path& dataset_dir,
                 const std::string& method, const fs::path& out_dir) {
  const Dataset ds = read_dataset(dataset_dir);
  const FittedModels models = fit_noise_models(cfg);
  const Provenance prov = provenance_of(cfg);

  // Deterministic prior: centred on the recorded start when truth is
  // available, on the identity otherwise.
  PriorSpec prior;
  if (ds.has_truth()) prior.mean = ds.truth.states.front();
  prior.cov = cfg.prior_cov.asDiagonal();

  GraphBuildConfig gcfg;
  gcfg.downsample = cfg.sim.odometry_per_state();
  gcfg.dt_odo = 0.0;  // inferred from the stream
  gcfg.qc = cfg.sim.qc.asDiagonal();
  gcfg.side = cfg.side;
  const auto graph_for = [&](const NoiseModel& m) {
    return build_graph(ds.odometry, ds.ranges, prior, ds.anchors, ds.tag_offsets, m, gcfg);
  };

  bool converged = false;
  if (method == kEstimatorMapC || method == kEstimatorMapGmm) {
    const FactorGraph<Pose2> g =
        graph_for(method == kEstimatorMapC ? models.map_c : models.map_gmm);
    const Trajectory<Pose2> init = dead_reckon(g, prior.mean);
    const MapEstimate<Pose2> e = map_solve(g, init, cfg.map);
    write_trajectory(out_dir / "trajectory.csv", e.mean, prov);
    write_covariances(out_dir / "covariance.csv", e.mean.times, e.covariance.diag, prov);
    write_trace(out_dir / "trace.csv", e.trace, prov);
    converged = e.converged;
    std::cout << method << ": objective " << format_double(e.objective) << " after "
              << e.trace.size() << " iterations -> " << out_dir.string() << "\n";
  } else if (method == kEstimatorEsgvi) {
    const FactorGraph<Pose2> g = graph_for(models.esgvi);
    const Trajectory<Pose2> init = dead_reckon(g, prior.mean);
    std::optional<MapEstimate<Pose2>> warm;
    if (cfg.solver.warm_start) {
      try {
        MapEstimate<Pose2> w = map_solve(graph_for(models.map_c), init, cfg.map);
        if (w.converged) warm = std::move(w);
      } catch (const std::exception&) {
        // fall back to the cold start
      }
    }
    const VariationalResult<Pose2> r =
        warm ? solve(g, warm_start(*warm), cfg.solver) : solve(g, init, cfg.solver);
    write_trajectory(out_dir / "trajectory.csv", r.estimate.mean, prov);
    write_covariances(out_dir / "covariance.csv", r.estimate.mean.times, r.estimate.marginals.diag,
                      prov);
    write_trace(out_dir / "trace.csv", r.report.trace, prov);
    converged = r.report.converged;
    std::cout << method << ": loss " << format_double(r.report.final_loss) << " after "
              << r.report.trace.size() << " iterations -> " << out_dir.string() << "\n";
  } else {
    throw ConfigError("estimate: unknown method '" + method +
                      "' (expected map-c, map-gmm, or esgvi)");
  }
  if (!converged) {
    std::cerr << "error: " << method << " did not converge within the iteration budget\n";
    return 4;
  }
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const fs::path& estimate_dir,
                 const fs::path& dataset_dir, const std::string& method, const fs::path& output) {
  const Trajectory<Pose2> est = read_trajectory(estimate_dir / "trajectory.csv");
  const auto [cov_times, covs] = read_covariances(estimate_dir / "covariance.csv");
  if (est.times != cov_times)
    throw DataError("evaluate: trajectory and covariance timestamps differ");
  const Dataset ds = read_dataset(dataset_dir);
  if (!ds.has_truth()) throw DataError("evaluate: dataset has no truth.csv");

  // Nearest truth state per estimate time, accepted within half a state
  // period so resampled or downsampled logs still align.
  double period = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < est.times.size(); ++i)
    period = std::min(period, est.times[i] - est.times[i - 1]);
  if (est.times.size() < 2 && ds.truth.times.size() > 1)
    period = ds.truth.times[1] - ds.truth.times[0];

  std::vector<Pose2> truth;
  truth.reserve(est.times.size());
  for (const double t : est.times) {
    const auto it = std::lower_bound(ds.truth.times.begin(), ds.truth.times.end(), t);
    std::size_t j = static_cast<std::size_t>(it - ds.truth.times.begin());
    if (j == ds.truth.times.size() ||
        (j > 0 && t - ds.truth.times[j - 1] <= ds.truth.times[j] - t))
      --j;
    if (std::abs(ds.truth.times[j] - t) > 0.5 * period + 1e-12)
      throw DataError("evaluate: no truth state within half a period of t=" + format_double(t));
    truth.push_back(ds.truth.states[j]);
  }

  const TrialResult row = make_trial_result(method, 0, est.states, truth, covs, cfg.side);
  const auto [lo, hi] = anees_bounds(static_cast<int>(est.states.size()), 3, 0.99);
  std::cout << "rmse_rot_rad " << format_double(row.rmse_rot_rad) << "\n"
            << "rmse_trans_m " << format_double(row.rmse_trans_m) << "\n"
            << "anees " << format_double(row.anees) << " (99% consistent interval ["
            << format_double(lo) << ", " << format_double(hi) << "])\n";
  if (!output.empty()) write_summary_csv(output, {row}, provenance_of(cfg));
  return 0;
}

int cmd_montecarlo(const ExperimentConfig& cfg, int jobs, const fs::path& out_dir) {
  const MonteCarloReport rep = run_monte_carlo(cfg, jobs);
  const Provenance prov = provenance_of(cfg);
  write_summary_csv(out_dir / "summary.csv", rep.trials, prov);
  write_aggregate_tsv(out_dir / "aggregate.tsv", rep.aggregate, prov);
  write_noise_model(out_dir / "model-map-c.json", rep.models.map_c, rep.models.ll_map_c, prov);
  write_noise_model(out_dir / "model-map-gmm.json", rep.models.map_gmm, rep.models.ll_map_gmm,
                    prov);
  write_noise_model(out_dir / "model-esgvi.json", rep.models.esgvi, rep.models.ll_esgvi, prov);
  write_residuals(out_dir / "noise-residuals.csv", rep.models.residuals, prov);

  std::cout << std::left << std::setw(9) << "estimator" << std::right << std::setw(14)
            << "rmse_rot_rad" << std::setw(14) << "rmse_trans_m" << std::setw(10) << "anees"
            << std::setw(8) << "trials" << std::setw(10) << "failures" << "\n";
  for (const EstimatorSummary& s : rep.aggregate) {
    std::cout << std::left << std::setw(9) << s.estimator << std::right << std::fixed
              << std::setprecision(6) << std::setw(14) << s.rmse_rot_rad << std::setw(14)
              << s.rmse_trans_m << std::setprecision(4) << std::setw(10) << s.anees
              << std::setw(8) << s.trials << std::setw(10) << s.failures << "\n";
    std::cout.unsetf(std::ios::fixed);
  }
  std::cout << "monotone " << (rep.monotone_ok ? "ok" : "VIOLATED") << " (worst esgvi rise "
            << format_double(rep.worst_esgvi_rise) << ", worst map rise "
            << format_double(rep.worst_map_rise) << ")\n";
  std::cout << "sparsity " << (rep.sparsity_ok ? "ok" : "VIOLATED") << " ("
            << rep.sparsity_trials_checked << " trials audited)\n";
  if (rep.failures > 0) std::cout << rep.failures << " failed estimator runs flagged\n";
  std::cout << "results -> " << out_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch SE(2) state estimation with non-Gaussian range noise"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::string method;
  std::string input;
  std::string dataset_dir;
  std::string estimate_dir;
  int jobs = 1;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment configuration JSON");
    sub->add_option("--seed", seed, "override the master seed");
  };

  CLI::App* sim = app.add_subcommand("simulate", "generate a dataset from the configured world");
  add_common(sim);
  sim->add_option("--output", output, "dataset directory")->required();

  CLI::App* fit = app.add_subcommand("fit-noise", "fit a noise model to residual samples");
  add_common(fit);
  fit->add_option("residuals", input, "residual file, one sample per line")->required();
  fit->add_option("--method", method, "model family: skew-laplace | asym-cauchy | gmm")
      ->required();
  fit->add_option("--output", output, "model JSON path");

  CLI::App* est = app.add_subcommand("estimate", "run one estimator on a dataset");
  add_common(est);
  est->add_option("dataset", dataset_dir, "dataset directory")->required();
  est->add_option("--method", method, "estimator: map-c | map-gmm | esgvi")->required();
  est->add_option("--output", output, "output directory")->required();

  CLI::App* ev = app.add_subcommand("evaluate", "score an estimate against ground truth");
  add_common(ev);
  ev->add_option("estimate", estimate_dir, "estimate output directory")->required();
  ev->add_option("dataset", dataset_dir, "dataset directory with truth")->required();
  ev->add_option("--method", method, "estimator name for the summary row");
  ev->add_option("--output", output, "summary CSV path");

  CLI::App* mc = app.add_subcommand("montecarlo", "run the full multi-trial comparison");
  add_common(mc);
  mc->add_option("--jobs", jobs, "worker threads (<= 0 asks the hardware)");
  mc->add_option("--output", output, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are configuration errors
  }

  try {
    const ExperimentConfig cfg = load_cli_config(config_path, seed);
    if (sim->parsed()) return cmd_simulate(cfg, output);
    if (fit->parsed()) return cmd_fit_noise(cfg, input, method, output);
    if (est->parsed()) return cmd_estimate(cfg, dataset_dir, method, output);
    if (ev->parsed())
      return cmd_evaluate(cfg, estimate_dir, dataset_dir, method.empty() ? "estimate" : method,
                          output);
    if (mc->parsed()) return cmd_montecarlo(cfg, jobs, output);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const LengthMismatch& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const IndexOutOfRange& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const DegenerateData& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const InfoNotSPD& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 4;
  } catch (const CovarianceNotSPD& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 4;
  } catch (const LineSearchFailed& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 4;
  } catch (const NotInAlgebra& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 4;
  } catch (const DimensionTooLarge& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
