#include "gvi2d/optim.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>

namespace gvi2d {

namespace {

double trampoline(const gsl_vector* v, void* params) {
  const auto& f = *static_cast<const std::function<double(const Eigen::VectorXd&)>*>(params);
  Eigen::VectorXd x(v->size);
  for (size_t i = 0; i < v->size; ++i) x(i) = gsl_vector_get(v, i);
  const double val = f(x);
  return std::isfinite(val) ? val : 1e300;
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, double step_size, double size_tol,
                             int max_iterations) {
  [[maybe_unused]] static gsl_error_handler_t* const off = gsl_set_error_handler_off();

  const size_t n = static_cast<size_t>(x0.size());
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* step = gsl_vector_alloc(n);
  for (size_t i = 0; i < n; ++i) {
    gsl_vector_set(x, i, x0(static_cast<Eigen::Index>(i)));
    gsl_vector_set(step, i, step_size);
  }

  gsl_multimin_function func;
  func.n = n;
  func.f = &trampoline;
  func.params = const_cast<void*>(static_cast<const void*>(&f));

  gsl_multimin_fminimizer* s =
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &func, x, step);

  NelderMeadResult result;
  int iter = 0;
  int status = GSL_CONTINUE;
  while (status == GSL_CONTINUE && iter < max_iterations) {
    ++iter;
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), size_tol);
  }

  result.x.resize(static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i) result.x(static_cast<Eigen::Index>(i)) = gsl_vector_get(s->x, i);
  result.f = s->fval;
  result.iterations = iter;
  result.converged = (status == GSL_SUCCESS);

  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(x);
  gsl_vector_free(step);
  return result;
}

}  // namespace gvi2d
