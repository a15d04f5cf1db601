#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gvi2d/esgvi.hpp"
#include "gvi2d/graph.hpp"
#include "gvi2d/map_solver.hpp"
#include "gvi2d/metrics.hpp"
#include "gvi2d/sim.hpp"

namespace gvi2d {

// Dataset and result files are CSV with a header row; doubles are written
// with 17 significant digits so a write → read round trip is lossless.
// Every file starts with '#'-prefixed provenance comments carrying the
// configuration hash and master seed. Configs and noise models are JSON
// with strict schemas: unknown keys are rejected.

/// 17-significant-digit decimal form of v; parses back to the same bits.
std::string format_double(double v);

/// Locale-independent strtod via from_chars. Throws DataError.
double parse_double(std::string_view s);

/// Identifies the configuration that produced an output file.
struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
};

// ------------------------------------------------------------- datasets ----

/// Sensor logs plus the static geometry, as stored in a dataset directory.
/// Simulated and converted real logs share this layout; `truth` and `nlos`
/// are optional (empty when absent).
struct Dataset {
  std::map<int, Eigen::Vector2d> anchors;
  std::map<int, Eigen::Vector2d> tag_offsets;
  std::vector<OdometrySample> odometry;
  std::vector<RangeSample> ranges;
  Trajectory<Pose2> truth;
  std::vector<std::uint8_t> nlos;

  bool has_truth() const { return !truth.states.empty(); }
};

/// Throws DataError on unsorted streams, unresolved ids, or a flag vector
/// that does not match the range stream.
void validate(const Dataset& ds);

/// Writes anchors.csv, tags.csv, odometry.csv, ranges.csv, and — when
/// present — truth.csv and nlos.csv into `dir` (created if needed).
void write_dataset(const std::filesystem::path& dir, const Dataset& ds, const Provenance& prov);

/// Reads a dataset directory written by write_dataset (or hand-converted to
/// the same schema) and validates it.
Dataset read_dataset(const std::filesystem::path& dir);

Dataset dataset_from_sim(const SimConfig& cfg, const SimOutput& out);

// ------------------------------------------------------------- results -----

void write_trajectory(const std::filesystem::path& file, const Trajectory<Pose2>& traj,
                      const Provenance& prov);
Trajectory<Pose2> read_trajectory(const std::filesystem::path& file);

void write_covariances(const std::filesystem::path& file, const std::vector<double>& times,
                       const std::vector<Eigen::Matrix3d>& covariances, const Provenance& prov);
std::pair<std::vector<double>, std::vector<Eigen::Matrix3d>> read_covariances(
    const std::filesystem::path& file);

void write_trace(const std::filesystem::path& file, const std::vector<IterationReport>& trace,
                 const Provenance& prov);
void write_trace(const std::filesystem::path& file, const std::vector<MapIterationReport>& trace,
                 const Provenance& prov);

/// Per-trial metric rows: estimator, trial, rmse_rot_rad, rmse_trans_m, anees.
void write_summary_csv(const std::filesystem::path& file, const std::vector<TrialResult>& rows,
                       const Provenance& prov);

/// Reads back the scalar columns of a summary CSV (error vectors and
/// covariances are not serialized there).
std::vector<TrialResult> read_summary_csv(const std::filesystem::path& file);

/// Aggregate table, one row per estimator, tab-separated.
void write_aggregate_tsv(const std::filesystem::path& file,
                         const std::vector<EstimatorSummary>& aggregate, const Provenance& prov);

/// Fitted noise model with its achieved log-likelihood.
void write_noise_model(const std::filesystem::path& file, const NoiseModel& model,
                       double log_likelihood, const Provenance& prov);
NoiseModel read_noise_model(const std::filesystem::path& file);

/// One residual sample per line (optionally '#' comments); for fit-noise.
std::vector<double> read_residuals(const std::filesystem::path& file);
void write_residuals(const std::filesystem::path& file, const std::vector<double>& residuals,
                     const Provenance& prov);

// ------------------------------------------------------------- config ------

/// Everything a run needs: simulation, solvers, noise fitting, and the
/// estimator-side settings that are not derivable from a dataset.
struct ExperimentConfig {
  SimConfig sim;
  SolverConfig solver;
  MapConfig map;
  int noise_fit_samples = 5000;
  int gmm_components = 3;
  Side side = Side::Right;
  /// Prior covariance diagonal (rad², m², m²) put on the first pose.
  Eigen::Vector3d prior_cov = Eigen::Vector3d(0.01, 0.04, 0.04);
  /// Optional fitted-model files per method ("esgvi", "map-c", "map-gmm").
  /// An empty path means: fit from the configured simulation's residual
  /// pre-draw.
  std::string noise_model_esgvi;
  std::string noise_model_map_c;
  std::string noise_model_map_gmm;

  void check() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Parses and validates a config file. Missing keys take defaults; unknown
/// keys and malformed JSON throw ConfigError with a diagnostic.
ExperimentConfig load_config(const std::filesystem::path& file);

/// FNV-1a hash (16 hex digits) of the canonical serialized config.
std::string config_hash(const ExperimentConfig& cfg);

Provenance provenance_of(const ExperimentConfig& cfg);

CubatureKind cubature_kind_from_string(std::string_view s);
Side side_from_string(std::string_view s);

}  // namespace gvi2d
