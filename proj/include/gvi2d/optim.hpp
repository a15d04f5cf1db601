#pragma once

#include <Eigen/Core>

#include <functional>

namespace gvi2d {

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Derivative-free minimization of f from x0 (GSL nmsimplex2). Non-finite
/// objective values are treated as +large, so f may safely throw its hands
/// up outside its domain by returning inf/nan.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, double step_size = 0.1,
                             double size_tol = 1e-10, int max_iterations = 2000);

}  // namespace gvi2d
