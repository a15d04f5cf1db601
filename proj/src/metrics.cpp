#include "gvi2d/metrics.hpp"

#include <array>
#include <cmath>

#include <Eigen/Cholesky>
#include <boost/math/distributions/chi_squared.hpp>

namespace gvi2d {

std::vector<Twist2> pose_errors(const std::vector<Pose2>& estimates,
                                const std::vector<Pose2>& truths, Side side) {
  if (estimates.size() != truths.size())
    throw LengthMismatch("pose_errors: " + std::to_string(estimates.size()) + " estimates vs " +
                         std::to_string(truths.size()) + " truths");
  std::vector<Twist2> errors;
  errors.reserve(estimates.size());
  for (size_t k = 0; k < estimates.size(); ++k)
    errors.push_back(estimates[k].ominus(truths[k], side));
  return errors;
}

double rmse(const std::vector<Twist2>& errors, ErrorComponent component) {
  if (errors.empty()) throw LengthMismatch("rmse: no errors");
  double acc = 0.0;
  for (const Twist2& e : errors)
    acc += component == ErrorComponent::Rotation ? e[0] * e[0] : e.tail<2>().squaredNorm();
  return std::sqrt(acc / static_cast<double>(errors.size()));
}

double rmse(const std::vector<Pose2>& estimates, const std::vector<Pose2>& truths,
            ErrorComponent component, Side side) {
  return rmse(pose_errors(estimates, truths, side), component);
}

double anees(const std::vector<Twist2>& errors,
             const std::vector<Eigen::Matrix3d>& covariances) {
  if (errors.empty()) throw LengthMismatch("anees: no errors");
  if (errors.size() != covariances.size())
    throw LengthMismatch("anees: " + std::to_string(errors.size()) + " errors vs " +
                         std::to_string(covariances.size()) + " covariances");
  double acc = 0.0;
  for (size_t k = 0; k < errors.size(); ++k) {
    const Eigen::LLT<Eigen::Matrix3d> llt(covariances[k]);
    if (llt.info() != Eigen::Success)
      throw CovarianceNotSPD("anees: marginal covariance " + std::to_string(k) +
                             " is not positive definite");
    acc += errors[k].dot(llt.solve(errors[k]));
  }
  const double n_x = static_cast<double>(Twist2::RowsAtCompileTime);
  return acc / (static_cast<double>(errors.size()) * n_x);
}

double anees(const std::vector<Pose2>& estimates, const std::vector<Pose2>& truths,
             const std::vector<Eigen::Matrix3d>& covariances, Side side) {
  return anees(pose_errors(estimates, truths, side), covariances);
}

std::pair<double, double> anees_bounds(int n_poses, int n_x, double confidence) {
  if (n_poses < 1) throw ConfigError("anees_bounds: n_poses must be >= 1");
  if (n_x < 1) throw ConfigError("anees_bounds: n_x must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw ConfigError("anees_bounds: confidence must lie in (0, 1)");
  const double dof = static_cast<double>(n_poses) * static_cast<double>(n_x);
  const boost::math::chi_squared_distribution<double> chi(dof);
  const double alpha = 1.0 - confidence;
  const double lo = boost::math::quantile(chi, alpha / 2.0) / dof;
  const double hi = boost::math::quantile(boost::math::complement(chi, alpha / 2.0)) / dof;
  return {lo, hi};
}

TrialResult make_trial_result(std::string estimator, int trial, const std::vector<Pose2>& estimates,
                              const std::vector<Pose2>& truths,
                              std::vector<Eigen::Matrix3d> covariances, Side side) {
  TrialResult r;
  r.estimator = std::move(estimator);
  r.trial = trial;
  r.errors = pose_errors(estimates, truths, side);
  r.covariances = std::move(covariances);
  r.rmse_rot_rad = rmse(r.errors, ErrorComponent::Rotation);
  r.rmse_trans_m = rmse(r.errors, ErrorComponent::Translation);
  r.anees = anees(r.errors, r.covariances);
  return r;
}

TrialResult failed_trial(std::string estimator, int trial, std::string message) {
  TrialResult r;
  r.estimator = std::move(estimator);
  r.trial = trial;
  r.failed = true;
  r.message = std::move(message);
  return r;
}

std::vector<EstimatorSummary> summarize(const std::vector<TrialResult>& results) {
  if (results.empty()) throw LengthMismatch("summarize: no trial results");
  std::vector<EstimatorSummary> out;
  const auto slot = [&out](const std::string& name) -> EstimatorSummary& {
    for (auto& s : out)
      if (s.estimator == name) return s;
    out.push_back({});
    out.back().estimator = name;
    return out.back();
  };

  // Accumulate mean-squares per estimator, parallel to `out`.
  std::vector<std::array<double, 3>> acc;  // Σ rmse_rot², Σ rmse_trans², Σ anees
  for (const TrialResult& r : results) {
    EstimatorSummary& s = slot(r.estimator);
    acc.resize(out.size(), {0.0, 0.0, 0.0});
    const size_t i = static_cast<size_t>(&s - out.data());
    if (r.failed) {
      ++s.failures;
      continue;
    }
    ++s.trials;
    acc[i][0] += r.rmse_rot_rad * r.rmse_rot_rad;
    acc[i][1] += r.rmse_trans_m * r.rmse_trans_m;
    acc[i][2] += r.anees;
  }
  for (size_t i = 0; i < out.size(); ++i) {
    if (out[i].trials == 0) continue;
    const double n = static_cast<double>(out[i].trials);
    out[i].rmse_rot_rad = std::sqrt(acc[i][0] / n);
    out[i].rmse_trans_m = std::sqrt(acc[i][1] / n);
    out[i].anees = acc[i][2] / n;
  }
  return out;
}

}  // namespace gvi2d
