#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>
#include <concepts>

#include "gvi2d/common.hpp"

namespace gvi2d {

/// Tangent vector of SE(2), ordered (rotation, translation):
///   xi = (theta [rad], v_x [m], v_y [m])
/// All covariances in the project follow this ordering.
using Twist2 = Eigen::Vector3d;

namespace detail {

// sin(t)/t and (1-cos(t))/t with a 2nd-order Taylor fallback below the
// small-angle threshold, where the direct quotients cancel catastrophically.
constexpr double kSmallAngle = 1e-6;

inline double sinc(double t) {
  if (std::abs(t) < kSmallAngle) return 1.0 - t * t / 6.0;
  return std::sin(t) / t;
}

inline double cosc(double t) {
  if (std::abs(t) < kSmallAngle) return t / 2.0 - t * t * t / 24.0;
  // half-angle form of (1-cos t)/t; the naive quotient cancels near zero
  const double s = std::sin(t / 2.0);
  return 2.0 * s * s / t;
}

}  // namespace detail

/// Planar rotation, stored as its 2x2 matrix.
///
/// Long composition chains drift off the manifold; a polar projection
/// (closest rotation in Frobenius norm) runs every 1000 compositions.
class Rot2 {
 public:
  Rot2() : mat_(Eigen::Matrix2d::Identity()) {}

  static Rot2 FromAngle(double theta) {
    Rot2 r;
    const double c = std::cos(theta), s = std::sin(theta);
    r.mat_ << c, -s, s, c;
    return r;
  }

  static Rot2 Identity() { return Rot2(); }

  /// Angle in (-pi, pi].
  double angle() const {
    double t = std::atan2(mat_(1, 0), mat_(0, 0));
    if (t <= -M_PI) t = M_PI;
    return t;
  }

  const Eigen::Matrix2d& matrix() const { return mat_; }

  Rot2 operator*(const Rot2& other) const {
    Rot2 r;
    r.mat_ = mat_ * other.mat_;
    r.compositions_ = compositions_ + other.compositions_ + 1;
    if (r.compositions_ >= kRenormEvery) r.renormalize();
    return r;
  }

  Eigen::Vector2d operator*(const Eigen::Vector2d& v) const { return mat_ * v; }

  Rot2 inverse() const {
    Rot2 r;
    r.mat_ = mat_.transpose();
    r.compositions_ = compositions_;
    return r;
  }

 private:
  static constexpr int kRenormEvery = 1000;

  // Polar projection: the closest rotation to mat_ has angle
  // atan2(m10 - m01, m00 + m11).
  void renormalize() {
    const double t = std::atan2(mat_(1, 0) - mat_(0, 1), mat_(0, 0) + mat_(1, 1));
    const double c = std::cos(t), s = std::sin(t);
    mat_ << c, -s, s, c;
    compositions_ = 0;
  }

  Eigen::Matrix2d mat_;
  int compositions_ = 0;
};

/// SE(2) element: rotation C mapping body to world, translation r in world.
/// Embeds as the homogeneous matrix [C r; 0 1].
class Pose2 {
 public:
  static constexpr int kDof = 3;
  using Tangent = Twist2;

  Pose2() : t_(Eigen::Vector2d::Zero()) {}
  Pose2(const Rot2& rot, const Eigen::Vector2d& trans) : rot_(rot), t_(trans) {}
  Pose2(double theta, double x, double y) : rot_(Rot2::FromAngle(theta)), t_(x, y) {}

  static Pose2 Identity() { return Pose2(); }

  const Rot2& rotation() const { return rot_; }
  const Eigen::Vector2d& translation() const { return t_; }
  double angle() const { return rot_.angle(); }

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m.topLeftCorner<2, 2>() = rot_.matrix();
    m.topRightCorner<2, 1>() = t_;
    return m;
  }

  Pose2 operator*(const Pose2& other) const {
    return Pose2(rot_ * other.rot_, t_ + rot_ * other.t_);
  }

  Pose2 inverse() const {
    const Rot2 rinv = rot_.inverse();
    return Pose2(rinv, -(rinv * t_));
  }

  /// Closed-form SE(2) exponential: rotation by theta, translation through
  /// the left Jacobian of SO(2) applied to the translational part.
  static Pose2 Exp(const Tangent& xi) {
    const double th = xi(0);
    const double a = detail::sinc(th), b = detail::cosc(th);
    Eigen::Matrix2d v;
    v << a, -b, b, a;
    return Pose2(Rot2::FromAngle(th), v * xi.tail<2>());
  }

  /// Inverse of Exp; the rotation component lies in (-pi, pi].
  Tangent Log() const {
    const double th = rot_.angle();
    const double a = detail::sinc(th), b = detail::cosc(th);
    const double den = a * a + b * b;
    Eigen::Matrix2d vinv;
    vinv << a, b, -b, a;
    Tangent xi;
    xi(0) = th;
    xi.tail<2>() = (vinv / den) * t_;
    return xi;
  }

  Pose2 oplus(const Tangent& xi, Side side) const {
    return side == Side::Right ? (*this) * Exp(xi) : Exp(xi) * (*this);
  }

  /// this ominus base: log(base^-1 * this) (right) or log(this * base^-1) (left).
  Tangent ominus(const Pose2& base, Side side) const {
    return side == Side::Right ? (base.inverse() * (*this)).Log()
                               : ((*this) * base.inverse()).Log();
  }

  /// Adjoint matrix: Exp(Adj(X) xi) = X Exp(xi) X^-1.
  Eigen::Matrix3d Adj() const {
    Eigen::Matrix3d ad = Eigen::Matrix3d::Identity();
    ad.bottomRightCorner<2, 2>() = rot_.matrix();
    ad(1, 0) = t_(1);
    ad(2, 0) = -t_(0);
    return ad;
  }

 private:
  Rot2 rot_;
  Eigen::Vector2d t_;
};

/// se(2) hat: xi = (theta, v) -> [theta*S, v; 0, 0] with S the 90-degree spin.
inline Eigen::Matrix3d hat(const Twist2& xi) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(0, 1) = -xi(0);
  m(1, 0) = xi(0);
  m(0, 2) = xi(1);
  m(1, 2) = xi(2);
  return m;
}

/// Inverse of hat. Throws NotInAlgebra unless the matrix has the se(2)
/// structure (zero bottom row, skew upper-left block) to 1e-12.
inline Twist2 vee(const Eigen::Matrix3d& m) {
  constexpr double tol = 1e-12;
  if (std::abs(m(2, 0)) > tol || std::abs(m(2, 1)) > tol || std::abs(m(2, 2)) > tol)
    throw NotInAlgebra("vee: bottom row not zero");
  if (std::abs(m(0, 0)) > tol || std::abs(m(1, 1)) > tol || std::abs(m(0, 1) + m(1, 0)) > tol)
    throw NotInAlgebra("vee: upper-left block not skew");
  return Twist2(m(1, 0), m(0, 2), m(1, 2));
}

inline Pose2 exp_map(const Twist2& xi) { return Pose2::Exp(xi); }
inline Twist2 log_map(const Pose2& x) { return x.Log(); }

inline Pose2 oplus(const Pose2& x, const Twist2& xi, Side side) { return x.oplus(xi, side); }
inline Twist2 ominus(const Pose2& y, const Pose2& x, Side side) { return y.ominus(x, side); }

/// se(2) small adjoint: ad(xi) eta = [hat(xi), hat(eta)]^vee.
inline Eigen::Matrix3d ad_se2(const Twist2& xi) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(1, 0) = xi(2);
  m(1, 2) = -xi(0);
  m(2, 0) = -xi(1);
  m(2, 1) = xi(0);
  return m;
}

/// R^N as a (trivial) group state; oplus/ominus are plain vector arithmetic
/// and both sides coincide. Used where an exactly linear chain is needed.
template <int N>
class VectorState {
 public:
  static constexpr int kDof = N;
  using Tangent = Eigen::Matrix<double, N, 1>;

  VectorState() : v_(Tangent::Zero()) {}
  explicit VectorState(const Tangent& v) : v_(v) {}

  static VectorState Identity() { return VectorState(); }

  VectorState oplus(const Tangent& xi, Side) const { return VectorState(v_ + xi); }
  Tangent ominus(const VectorState& base, Side) const { return v_ - base.v_; }

  Eigen::Matrix<double, N, N> Adj() const { return Eigen::Matrix<double, N, N>::Identity(); }

  const Tangent& vector() const { return v_; }

 private:
  Tangent v_;
};

template <class G>
concept GroupState = requires(const G& a, const G& b, const typename G::Tangent& t) {
  { G::kDof } -> std::convertible_to<int>;
  { G::Identity() } -> std::same_as<G>;
  { a.oplus(t, Side::Right) } -> std::same_as<G>;
  { a.ominus(b, Side::Right) } -> std::same_as<typename G::Tangent>;
};

/// First-order inverse-Jacobian factors for on-manifold linearization.
/// For SE(2) the series is I +- ad(e)/2 + O(e^2); for vector states both
/// are exactly the identity.
template <GroupState G>
struct GroupJacobians {
  using Mat = Eigen::Matrix<double, G::kDof, G::kDof>;
  static Mat inv_jacobian(const typename G::Tangent&, Side) { return Mat::Identity(); }
};

template <>
struct GroupJacobians<Pose2> {
  using Mat = Eigen::Matrix3d;
  static Mat inv_jacobian(const Twist2& e, Side side) {
    const double sgn = (side == Side::Right) ? 0.5 : -0.5;
    return Mat::Identity() + sgn * ad_se2(e);
  }
};

}  // namespace gvi2d
