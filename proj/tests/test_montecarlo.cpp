#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "gvi2d/io.hpp"
#include "gvi2d/montecarlo.hpp"
#include "gvi2d/noise.hpp"

using gvi2d::EstimatorSummary;
using gvi2d::ExperimentConfig;
using gvi2d::FittedModels;
using gvi2d::kEstimatorEsgvi;
using gvi2d::kEstimatorMapC;
using gvi2d::kEstimatorMapGmm;
using gvi2d::MonteCarloReport;
using gvi2d::TrialResult;

namespace {

// Two short trials keep the suite quick while still exercising the full
// pipeline: fits, simulation, all three estimators, and the diagnostics.
ExperimentConfig smoke_config() {
  ExperimentConfig cfg;
  cfg.sim.trials = 2;
  cfg.sim.poses = 50;
  cfg.sim.seed = 1;
  return cfg;
}

void check_rows_match(const std::vector<TrialResult>& a, const std::vector<TrialResult>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].estimator == b[i].estimator);
    CHECK(a[i].trial == b[i].trial);
    CHECK(a[i].failed == b[i].failed);
    if (a[i].failed) continue;
    // Bitwise equality: the pipeline is deterministic, not merely close.
    CHECK(a[i].rmse_rot_rad == b[i].rmse_rot_rad);
    CHECK(a[i].rmse_trans_m == b[i].rmse_trans_m);
    CHECK(a[i].anees == b[i].anees);
  }
}

}  // namespace

TEST_CASE("run_monte_carlo emits three ordered healthy rows per trial") {
  const ExperimentConfig cfg = smoke_config();
  const MonteCarloReport rep = gvi2d::run_monte_carlo(cfg, 1);

  REQUIRE(rep.trials.size() == 6);
  for (int i = 0; i < cfg.sim.trials; ++i) {
    const TrialResult& c = rep.trials[static_cast<std::size_t>(3 * i)];
    const TrialResult& g = rep.trials[static_cast<std::size_t>(3 * i + 1)];
    const TrialResult& s = rep.trials[static_cast<std::size_t>(3 * i + 2)];
    CHECK(c.estimator == kEstimatorMapC);
    CHECK(g.estimator == kEstimatorMapGmm);
    CHECK(s.estimator == kEstimatorEsgvi);
    for (const TrialResult* r : {&c, &g, &s}) {
      CHECK(r->trial == i);
      CHECK_FALSE(r->failed);
      CHECK(r->errors.size() == static_cast<std::size_t>(cfg.sim.poses) + 1);
      CHECK(r->covariances.size() == r->errors.size());
      CHECK(std::isfinite(r->rmse_rot_rad));
      CHECK(std::isfinite(r->rmse_trans_m));
      CHECK(std::isfinite(r->anees));
      CHECK(r->rmse_trans_m > 0.0);
    }
  }

  REQUIRE(rep.aggregate.size() == 3);
  CHECK(rep.aggregate[0].estimator == kEstimatorMapC);
  CHECK(rep.aggregate[1].estimator == kEstimatorMapGmm);
  CHECK(rep.aggregate[2].estimator == kEstimatorEsgvi);
  for (const EstimatorSummary& s : rep.aggregate) {
    CHECK(s.trials == cfg.sim.trials);
    CHECK(s.failures == 0);
    CHECK(std::isfinite(s.rmse_rot_rad));
    CHECK(std::isfinite(s.rmse_trans_m));
    // Loose consistency sanity; the tight bracket belongs to the full-size
    // experiment where the chi-square interval is meaningful.
    CHECK(s.anees > 0.3);
    CHECK(s.anees < 3.0);
  }

  CHECK(rep.failures == 0);
  CHECK(rep.monotone_ok);
  CHECK(rep.worst_esgvi_rise <= cfg.solver.loss_slack);
  CHECK(rep.worst_map_rise <= cfg.map.objective_slack);
  CHECK(rep.sparsity_ok);
  CHECK(rep.sparsity_trials_checked == 2);

  CHECK(std::holds_alternative<gvi2d::AsymCauchyParams>(rep.models.map_c));
  CHECK(std::holds_alternative<gvi2d::GmmParams>(rep.models.map_gmm));
  CHECK(std::holds_alternative<gvi2d::SkewLaplaceParams>(rep.models.esgvi));
  CHECK(rep.models.residuals.size() == static_cast<std::size_t>(cfg.noise_fit_samples));
  CHECK(std::isfinite(rep.models.ll_map_c));
  CHECK(std::isfinite(rep.models.ll_map_gmm));
  CHECK(std::isfinite(rep.models.ll_esgvi));
}

TEST_CASE("a fixed master seed reproduces the report for any jobs value") {
  const ExperimentConfig cfg = smoke_config();
  const MonteCarloReport a = gvi2d::run_monte_carlo(cfg, 1);
  const MonteCarloReport b = gvi2d::run_monte_carlo(cfg, 1);
  const MonteCarloReport c = gvi2d::run_monte_carlo(cfg, 4);

  check_rows_match(a.trials, b.trials);
  check_rows_match(a.trials, c.trials);
  REQUIRE(a.aggregate.size() == b.aggregate.size());
  REQUIRE(a.aggregate.size() == c.aggregate.size());
  for (std::size_t i = 0; i < a.aggregate.size(); ++i) {
    for (const MonteCarloReport* r : {&b, &c}) {
      CHECK(a.aggregate[i].estimator == r->aggregate[i].estimator);
      CHECK(a.aggregate[i].rmse_rot_rad == r->aggregate[i].rmse_rot_rad);
      CHECK(a.aggregate[i].rmse_trans_m == r->aggregate[i].rmse_trans_m);
      CHECK(a.aggregate[i].anees == r->aggregate[i].anees);
    }
  }
  CHECK(a.worst_esgvi_rise == b.worst_esgvi_rise);
  CHECK(a.worst_map_rise == b.worst_map_rise);

  // A different master seed must move the numbers.
  ExperimentConfig other = cfg;
  other.sim.seed = 7;
  const MonteCarloReport d = gvi2d::run_monte_carlo(other, 1);
  CHECK(d.trials[0].rmse_trans_m != a.trials[0].rmse_trans_m);
}

TEST_CASE("config paths override the corresponding noise-model fit") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "gvi2d_mc_models";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const gvi2d::GaussianParams gauss{0.0625};
  gvi2d::write_noise_model(dir / "model.json", gauss, -1.0, {"0000000000000000", 1});

  ExperimentConfig cfg = smoke_config();
  cfg.noise_model_esgvi = (dir / "model.json").string();
  const FittedModels models = gvi2d::fit_noise_models(cfg);

  REQUIRE(std::holds_alternative<gvi2d::GaussianParams>(models.esgvi));
  CHECK(std::get<gvi2d::GaussianParams>(models.esgvi).variance == gauss.variance);
  CHECK(std::holds_alternative<gvi2d::AsymCauchyParams>(models.map_c));
  CHECK(std::holds_alternative<gvi2d::GmmParams>(models.map_gmm));
  CHECK(models.ll_esgvi ==
        doctest::Approx(gvi2d::log_likelihood(models.esgvi, models.residuals)));

  CHECK_THROWS_AS(
      [&] {
        ExperimentConfig bad = cfg;
        bad.noise_model_esgvi = (dir / "missing.json").string();
        return gvi2d::fit_noise_models(bad);
      }(),
      gvi2d::DataError);
}

TEST_CASE("a starved solver flags its rows instead of aborting the run") {
  ExperimentConfig cfg = smoke_config();
  cfg.solver.max_iterations = 1;
  cfg.solver.tol_step_inf = 1e-15;
  cfg.solver.tol_rel_loss = 1e-18;
  const MonteCarloReport rep = gvi2d::run_monte_carlo(cfg, 1);

  REQUIRE(rep.trials.size() == 6);
  for (int i = 0; i < cfg.sim.trials; ++i) {
    CHECK_FALSE(rep.trials[static_cast<std::size_t>(3 * i)].failed);
    CHECK_FALSE(rep.trials[static_cast<std::size_t>(3 * i + 1)].failed);
    const TrialResult& s = rep.trials[static_cast<std::size_t>(3 * i + 2)];
    CHECK(s.failed);
    CHECK(s.message.find("convergence") != std::string::npos);
    CHECK(std::isnan(s.anees));
  }
  CHECK(rep.failures == cfg.sim.trials);

  const EstimatorSummary& esgvi = rep.aggregate[2];
  CHECK(esgvi.estimator == kEstimatorEsgvi);
  CHECK(esgvi.trials == 0);
  CHECK(esgvi.failures == cfg.sim.trials);
  CHECK(std::isnan(esgvi.anees));
}
