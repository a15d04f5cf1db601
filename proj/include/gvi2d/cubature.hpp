#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <utility>
#include <vector>

#include "gvi2d/common.hpp"
#include "gvi2d/liegroup.hpp"

namespace gvi2d {

/// Unit sigma points and weights for expectations under a standard normal.
/// Points are the columns of `points` (dim x count); weights sum to one.
struct CubatureRule {
  Eigen::MatrixXd points;
  Eigen::VectorXd weights;

  int dim() const { return static_cast<int>(points.rows()); }
  int count() const { return static_cast<int>(points.cols()); }
};

/// Tensor product of the 1-D third-order Gauss-Hermite rule
/// (nodes {-√3, 0, √3}, weights {1/6, 2/3, 1/6}): 3^dim points, exact for
/// normal moments of degree ≤ 5 per axis.
inline CubatureRule gauss_hermite_rule(int dim) {
  if (dim < 1 || dim > 8)
    throw DimensionTooLarge("gauss_hermite_rule: dim must be in [1, 8], got " +
                            std::to_string(dim));
  const double nodes[3] = {-std::sqrt(3.0), 0.0, std::sqrt(3.0)};
  const double w1[3] = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};

  int count = 1;
  for (int d = 0; d < dim; ++d) count *= 3;

  CubatureRule rule;
  rule.points.resize(dim, count);
  rule.weights.resize(count);
  for (int l = 0; l < count; ++l) {
    int idx = l;
    double w = 1.0;
    for (int d = 0; d < dim; ++d) {
      rule.points(d, l) = nodes[idx % 3];
      w *= w1[idx % 3];
      idx /= 3;
    }
    rule.weights(l) = w;
  }
  return rule;
}

/// Spherical 2n-point rule: ±√n·e_i with equal weights. Exact for degree ≤ 3;
/// the economical choice for the 6-dimensional process-factor marginals.
inline CubatureRule spherical_rule(int dim) {
  if (dim < 1) throw DimensionTooLarge("spherical_rule: dim must be >= 1");
  CubatureRule rule;
  rule.points = Eigen::MatrixXd::Zero(dim, 2 * dim);
  rule.weights = Eigen::VectorXd::Constant(2 * dim, 1.0 / (2.0 * dim));
  const double radius = std::sqrt(static_cast<double>(dim));
  for (int d = 0; d < dim; ++d) {
    rule.points(d, 2 * d) = radius;
    rule.points(d, 2 * d + 1) = -radius;
  }
  return rule;
}

/// Gaussian over a group: mean element plus covariance of the tangent
/// perturbation δξ, composed on the stated side.
template <GroupState G>
struct MlgGaussian {
  using Mat = Eigen::Matrix<double, G::kDof, G::kDof>;

  G mean;
  Mat cov;
  Side side = Side::Right;
};

/// Lower Cholesky factor of q.cov; throws CovarianceNotSPD on failure.
template <GroupState G>
Eigen::Matrix<double, G::kDof, G::kDof> sqrt_cov(const MlgGaussian<G>& q) {
  const Eigen::LLT<typename MlgGaussian<G>::Mat> llt(q.cov);
  if (llt.info() != Eigen::Success)
    throw CovarianceNotSPD("sigma points: covariance Cholesky failed");
  return llt.matrixL();
}

/// Sigma points X^ℓ = X̄ ⊕ (√Σ α^ℓ), paired with the rule's weights.
template <GroupState G>
std::vector<std::pair<double, G>> group_sigma_points(const MlgGaussian<G>& q,
                                                     const CubatureRule& rule) {
  if (rule.dim() != G::kDof)
    throw LengthMismatch("group_sigma_points: rule dimension does not match the group");
  const auto L = sqrt_cov(q);
  std::vector<std::pair<double, G>> points;
  points.reserve(rule.count());
  for (int l = 0; l < rule.count(); ++l) {
    const typename G::Tangent delta = L * rule.points.col(l);
    points.emplace_back(rule.weights(l), q.mean.oplus(delta, q.side));
  }
  return points;
}

/// E[f(X)] by cubature.
template <GroupState G, class F>
double expect_scalar(const MlgGaussian<G>& q, const CubatureRule& rule, F&& f) {
  if (rule.dim() != G::kDof)
    throw LengthMismatch("expect_scalar: rule dimension does not match the group");
  const auto L = sqrt_cov(q);
  double acc = 0.0;
  for (int l = 0; l < rule.count(); ++l) {
    const typename G::Tangent delta = L * rule.points.col(l);
    acc += rule.weights(l) * f(q.mean.oplus(delta, q.side));
  }
  return acc;
}

/// E[(X ⊖ X̄) f(X)] by cubature. The deviation of the ℓ-th sigma point is
/// √Σ α^ℓ by construction, so no ⊖ is evaluated numerically.
template <GroupState G, class F>
Eigen::Matrix<double, G::kDof, 1> expect_vector(const MlgGaussian<G>& q, const CubatureRule& rule,
                                                F&& f) {
  if (rule.dim() != G::kDof)
    throw LengthMismatch("expect_vector: rule dimension does not match the group");
  const auto L = sqrt_cov(q);
  Eigen::Matrix<double, G::kDof, 1> acc = Eigen::Matrix<double, G::kDof, 1>::Zero();
  for (int l = 0; l < rule.count(); ++l) {
    const typename G::Tangent delta = L * rule.points.col(l);
    acc += rule.weights(l) * f(q.mean.oplus(delta, q.side)) * delta;
  }
  return acc;
}

/// E[(X ⊖ X̄)(X ⊖ X̄)ᵀ f(X)] by cubature.
template <GroupState G, class F>
Eigen::Matrix<double, G::kDof, G::kDof> expect_matrix(const MlgGaussian<G>& q,
                                                      const CubatureRule& rule, F&& f) {
  if (rule.dim() != G::kDof)
    throw LengthMismatch("expect_matrix: rule dimension does not match the group");
  const auto L = sqrt_cov(q);
  Eigen::Matrix<double, G::kDof, G::kDof> acc = Eigen::Matrix<double, G::kDof, G::kDof>::Zero();
  for (int l = 0; l < rule.count(); ++l) {
    const typename G::Tangent delta = L * rule.points.col(l);
    acc += (rule.weights(l) * f(q.mean.oplus(delta, q.side))) * (delta * delta.transpose());
  }
  return acc;
}

/// E[f], E[δ f], and E[δδᵀ f] in a single sweep over the sigma points —
/// the bundle the variational solver needs per factor per iteration.
template <GroupState G>
struct ExpectationBlocks {
  double scalar;
  Eigen::Matrix<double, G::kDof, 1> vector;
  Eigen::Matrix<double, G::kDof, G::kDof> matrix;
};

template <GroupState G, class F>
ExpectationBlocks<G> expect_blocks(const MlgGaussian<G>& q, const CubatureRule& rule, F&& f) {
  if (rule.dim() != G::kDof)
    throw LengthMismatch("expect_blocks: rule dimension does not match the group");
  const auto L = sqrt_cov(q);
  ExpectationBlocks<G> b;
  b.scalar = 0.0;
  b.vector.setZero();
  b.matrix.setZero();
  for (int l = 0; l < rule.count(); ++l) {
    const typename G::Tangent delta = L * rule.points.col(l);
    const double wf = rule.weights(l) * f(q.mean.oplus(delta, q.side));
    b.scalar += wf;
    b.vector += wf * delta;
    b.matrix += wf * (delta * delta.transpose());
  }
  return b;
}

/// Two group elements treated as one product-group state; the tangent is the
/// stack of both perturbations. Gives binary factors the same sigma-point
/// machinery as unary ones.
template <GroupState G>
struct PairState {
  static constexpr int kDof = 2 * G::kDof;
  using Tangent = Eigen::Matrix<double, kDof, 1>;

  G first, second;

  static PairState Identity() { return {G::Identity(), G::Identity()}; }

  PairState oplus(const Tangent& xi, Side side) const {
    return {first.oplus(xi.template head<G::kDof>(), side),
            second.oplus(xi.template tail<G::kDof>(), side)};
  }

  Tangent ominus(const PairState& base, Side side) const {
    Tangent out;
    out.template head<G::kDof>() = first.ominus(base.first, side);
    out.template tail<G::kDof>() = second.ominus(base.second, side);
    return out;
  }
};

}  // namespace gvi2d
