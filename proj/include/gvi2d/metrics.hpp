#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gvi2d/common.hpp"
#include "gvi2d/liegroup.hpp"

namespace gvi2d {

// Estimation-quality metrics: RMSE split by twist component, the average
// normalized estimation error squared (aNEES), and its chi-square
// consistency interval. Errors are full group errors est ⊖ truth, so the
// rotation component is wrapped to (−π, π] by construction.

enum class ErrorComponent { Rotation, Translation };

/// e_k = est_k ⊖ truth_k on the given side. Throws LengthMismatch.
std::vector<Twist2> pose_errors(const std::vector<Pose2>& estimates,
                                const std::vector<Pose2>& truths, Side side);

/// Root-mean-squared norm of the selected twist slice: rotation (rad) is
/// component 0, translation (m) is components 1–2.
double rmse(const std::vector<Twist2>& errors, ErrorComponent component);
double rmse(const std::vector<Pose2>& estimates, const std::vector<Pose2>& truths,
            ErrorComponent component, Side side);

/// (1/(K·n_x)) Σ eₖᵀ Σₖ⁻¹ eₖ over one trajectory, n_x = 3. A consistent
/// estimator scores 1. Throws LengthMismatch on unequal lengths and
/// CovarianceNotSPD when a marginal fails its Cholesky.
double anees(const std::vector<Twist2>& errors,
             const std::vector<Eigen::Matrix3d>& covariances);
double anees(const std::vector<Pose2>& estimates, const std::vector<Pose2>& truths,
             const std::vector<Eigen::Matrix3d>& covariances, Side side);

/// Chi-square interval for the aNEES of a consistent estimator over n_poses
/// poses: [χ²_{α/2}(Kn_x), χ²_{1−α/2}(Kn_x)] / (Kn_x) with α = 1 − confidence.
std::pair<double, double> anees_bounds(int n_poses, int n_x, double confidence);

/// One estimator's performance on one trial.
struct TrialResult {
  std::string estimator;
  int trial = 0;
  std::vector<Twist2> errors;  ///< est ⊖ truth, one per pose
  std::vector<Eigen::Matrix3d> covariances;
  double rmse_rot_rad = std::numeric_limits<double>::quiet_NaN();
  double rmse_trans_m = std::numeric_limits<double>::quiet_NaN();
  double anees = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string message;
};

/// Computes the scalar metrics from the trajectories. Throws LengthMismatch.
TrialResult make_trial_result(std::string estimator, int trial, const std::vector<Pose2>& estimates,
                              const std::vector<Pose2>& truths,
                              std::vector<Eigen::Matrix3d> covariances, Side side);

/// A flagged placeholder row for a trial whose solve failed.
TrialResult failed_trial(std::string estimator, int trial, std::string message);

struct EstimatorSummary {
  std::string estimator;
  double rmse_rot_rad = std::numeric_limits<double>::quiet_NaN();
  double rmse_trans_m = std::numeric_limits<double>::quiet_NaN();
  double anees = std::numeric_limits<double>::quiet_NaN();
  int trials = 0;    ///< trials contributing to the aggregates
  int failures = 0;  ///< flagged trials, excluded from the aggregates
};

/// Per-estimator aggregates in first-appearance order: RMSE pooled as the
/// root of the mean per-trial mean-square, aNEES as the mean per-trial
/// aNEES. Both equal the all-pose Eq. 24/25 definitions when every trial has
/// the same pose count, which a fixed configuration guarantees. Throws
/// LengthMismatch on an empty input.
std::vector<EstimatorSummary> summarize(const std::vector<TrialResult>& results);

}  // namespace gvi2d
