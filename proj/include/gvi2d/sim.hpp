#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include <Eigen/Core>

#include "gvi2d/graph.hpp"
#include "gvi2d/liegroup.hpp"

namespace gvi2d {

// Planar UWB localization simulator: a robot drives a smooth input profile
// through a square arena ringed by range anchors, and every sensor draw is
// seeded so the same configuration reproduces the same dataset bit for bit.

/// Four anchors at the corners of the default arena (a square of ~40 m²).
std::map<int, Eigen::Vector2d> default_anchors();

/// Four tag mounting points at the corners of the robot body.
std::map<int, Eigen::Vector2d> default_tag_offsets();

struct SimConfig {
  int trials = 50;
  /// Process intervals per trial; the trajectory spans poses+1 states.
  int poses = 400;
  double dt = 0.1;  ///< state period (s)
  double odometry_rate_hz = 100.0;
  double range_rate_hz = 10.0;
  std::map<int, Eigen::Vector2d> anchors = default_anchors();
  std::map<int, Eigen::Vector2d> tag_offsets = default_tag_offsets();
  /// Continuous-time PSD of the odometry noise, diag (rad²/s, m²/s, m²/s).
  /// Per-sample velocity noise is N(0, qc/dt_odo), so a compounded state
  /// interval accumulates covariance qc·dt — the same scaling the process
  /// factors assume.
  Eigen::Vector3d qc = Eigen::Vector3d(2e-4, 1e-3, 1e-3);
  double range_sigma = 0.1;  ///< m
  double corrupt_fraction = 0.25;
  double corrupt_lo_sigmas = 1.0;
  double corrupt_hi_sigmas = 6.0;
  std::uint64_t seed = 1;

  /// Odometry samples per state interval (odometry_rate_hz · dt, validated
  /// to be a whole number by check()).
  int odometry_per_state() const;

  /// Throws ConfigError on nonpositive counts/rates, fraction outside [0,1],
  /// an inverted corruption window, or an odometry rate that does not give a
  /// whole number of samples per state interval.
  void check() const;
};

struct SimOutput {
  /// Ground truth at odometry resolution (poses·m+1 states); every state
  /// interval boundary is a truth sample.
  Trajectory<Pose2> truth;
  std::vector<OdometrySample> odometry;  ///< measured body rates, u + w
  std::vector<RangeSample> ranges;       ///< noise + NLOS corruption applied
  std::vector<std::uint8_t> nlos;        ///< 1 where the NLOS offset was added
};

/// Body-rate input (ω, v_x, v_y) as a function of time.
using InputProfile = std::function<Twist2(double)>;

/// Smooth sum-of-sinusoids profile with seeded phases. The mean input orbits
/// at radius v̄/ω̄ ≈ 1.9 m, so a trajectory started one radius below the arena
/// center stays well inside the default arena.
InputProfile nominal_profile(std::uint64_t seed);

/// Ranges with measurement noise applied and the NLOS subset flagged. Every
/// range gets N(0, σ²) noise; a Bernoulli(fraction) subset additionally gets
/// a positive offset drawn from U(lo·σ, hi·σ).
struct RangeStream {
  std::vector<RangeSample> samples;
  std::vector<std::uint8_t> nlos;
};

RangeStream corrupt_ranges(const std::vector<RangeSample>& clean, double sigma, double fraction,
                           double lo_sigmas, double hi_sigmas, std::uint64_t seed);

/// Simulates one trial: ground truth propagated by the noiseless input,
/// measured odometry u + w with w ~ N(0, qc/dt_odo) per sample, and one range
/// epoch per 1/range_rate_hz in which one tag (round-robin) measures every
/// anchor. All draws derive from `seed`.
SimOutput simulate_with_profile(const SimConfig& cfg, std::uint64_t seed,
                                const InputProfile& profile, const Pose2& start);

/// simulate_with_profile with the nominal seeded profile, started one orbit
/// radius below the anchor centroid.
SimOutput simulate_trajectory(const SimConfig& cfg, std::uint64_t seed);

}  // namespace gvi2d
