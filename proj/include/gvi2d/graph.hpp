#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "gvi2d/block_tridiag.hpp"
#include "gvi2d/common.hpp"
#include "gvi2d/liegroup.hpp"
#include "gvi2d/noise.hpp"

namespace gvi2d {

// ------------------------------------------------------------ trajectory ---

template <GroupState G>
struct Trajectory {
  std::vector<G> states;
  std::vector<double> times;  // seconds, strictly increasing

  int size() const { return static_cast<int>(states.size()); }
};

template <GroupState G>
void validate(const Trajectory<G>& traj) {
  if (traj.states.empty()) throw LengthMismatch("trajectory: needs at least one state");
  if (traj.states.size() != traj.times.size())
    throw LengthMismatch("trajectory: state/time count mismatch");
  for (size_t i = 1; i < traj.times.size(); ++i)
    if (!(traj.times[i] > traj.times[i - 1]))
      throw DataError("trajectory: timestamps must be strictly increasing");
}

// --------------------------------------------------------------- factors ---

enum class FactorKind { Prior, Process, Range };

inline const char* to_string(FactorKind k) {
  switch (k) {
    case FactorKind::Prior: return "prior";
    case FactorKind::Process: return "process";
    default: return "range";
  }
}

/// Local gradient and positive-semidefinite Hessian surrogate of one factor,
/// stacked over its connected states (dimension kDof·arity). Fixed-capacity
/// storage keeps the per-factor linearization allocation-free.
template <GroupState G>
struct LocalBlocks {
  using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2 * G::kDof, 1>;
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2 * G::kDof, 2 * G::kDof>;

  double value = 0.0;
  Vec grad;
  Mat hess;
};

/// A factor exposes only its energy φ evaluated at concrete states — no
/// derivatives — which is all the variational solver is allowed to touch.
/// state(i) is the projection from the factor's i-th local slot to the
/// global state index.
template <GroupState G>
class Factor {
 public:
  virtual ~Factor() = default;

  virtual FactorKind kind() const = 0;
  virtual int arity() const = 0;
  virtual int state(int i) const = 0;

  virtual double energy(const G&) const {
    throw LengthMismatch("factor: unary energy called on a non-unary factor");
  }
  virtual double energy(const G&, const G&) const {
    throw LengthMismatch("factor: binary energy called on a non-binary factor");
  }
};

/// Extension used by the MAP baselines: analytic on-manifold linearization.
/// The returned Hessian block is the Gauss-Newton surrogate (positive
/// semidefinite by construction), not the possibly indefinite exact Hessian.
template <GroupState G>
class MapFactor : public Factor<G> {
 public:
  virtual LocalBlocks<G> linearize(const G&) const {
    throw LengthMismatch("factor: unary linearize called on a non-unary factor");
  }
  virtual LocalBlocks<G> linearize(const G&, const G&) const {
    throw LengthMismatch("factor: binary linearize called on a non-binary factor");
  }

  /// Blocks for the Laplace approximation at the solution: the same gradient,
  /// but with the true second derivative of the energy as curvature. The
  /// default forwards to linearize, which is exact for quadratic factors;
  /// robust factors override, and their contribution may be indefinite.
  virtual LocalBlocks<G> laplace_blocks(const G& x) const { return linearize(x); }
  virtual LocalBlocks<G> laplace_blocks(const G& a, const G& b) const { return linearize(a, b); }
};

// ----------------------------------------------------------- prior factor --

template <GroupState G>
class PriorFactor final : public MapFactor<G> {
 public:
  using Mat = Eigen::Matrix<double, G::kDof, G::kDof>;
  using Factor<G>::energy;
  using MapFactor<G>::linearize;

  PriorFactor(int index, const G& mean, const Mat& cov, Side side)
      : index_(index), mean_(mean), info_(cov.inverse()), side_(side) {
    if (index < 0) throw IndexOutOfRange("prior factor: negative state index");
  }

  FactorKind kind() const override { return FactorKind::Prior; }
  int arity() const override { return 1; }
  int state(int i) const override {
    if (i != 0) throw IndexOutOfRange("prior factor: slot out of range");
    return index_;
  }

  double energy(const G& x) const override {
    const typename G::Tangent e = x.ominus(mean_, side_);
    return 0.5 * e.dot(info_ * e);
  }

  LocalBlocks<G> linearize(const G& x) const override {
    const typename G::Tangent e = x.ominus(mean_, side_);
    // e(δ) to first order: right side gives ∂e/∂δ = Jr⁻¹(e), left gives
    // Jl⁻¹(e); both approximated as I ± ad(e)/2.
    const Mat j = GroupJacobians<G>::inv_jacobian(e, side_);
    LocalBlocks<G> b;
    b.value = 0.5 * e.dot(info_ * e);
    b.grad = j.transpose() * (info_ * e);
    b.hess = j.transpose() * info_ * j;
    return b;
  }

  const G& mean() const { return mean_; }
  const Mat& info() const { return info_; }

 private:
  int index_;
  G mean_;
  Mat info_;
  Side side_;
};

// --------------------------------------------------------- process factor --

/// Gaussian motion-model factor between adjacent states:
///   e = X_k ⊖ f(X_{k−1}, u),   f(X, u) = X ⊕_r (Δt·u),   φ = ½ eᵀ Q⁻¹ e
/// The motion retraction is always on the right (body-frame input); the
/// residual ⊖ follows the configured perturbation side.
template <GroupState G>
class ProcessFactor final : public MapFactor<G> {
 public:
  using Mat = Eigen::Matrix<double, G::kDof, G::kDof>;
  using Tangent = typename G::Tangent;
  using Factor<G>::energy;
  using MapFactor<G>::linearize;

  ProcessFactor(int k, const Tangent& u, double dt, const Mat& q, Side side)
      : k_(k), u_(u), dt_(dt), info_(q.inverse()), side_(side) {
    if (k < 1) throw IndexOutOfRange("process factor: must connect (k-1, k) with k >= 1");
    if (!(dt > 0.0)) throw DataError("process factor: dt must be positive");
    // Ad(U⁻¹) with U = Exp(Δt·u); formed from Exp(−Δt·u) so no matrix
    // inversion is needed.
    adj_uinv_ = G::Identity().oplus(Tangent(-dt * u), Side::Right).Adj();
  }

  FactorKind kind() const override { return FactorKind::Process; }
  int arity() const override { return 2; }
  int state(int i) const override {
    if (i < 0 || i > 1) throw IndexOutOfRange("process factor: slot out of range");
    return k_ - 1 + i;
  }

  G predict(const G& prev) const { return prev.oplus(Tangent(dt_ * u_), Side::Right); }

  double energy(const G& prev, const G& next) const override {
    const Tangent e = next.ominus(predict(prev), side_);
    return 0.5 * e.dot(info_ * e);
  }

  LocalBlocks<G> linearize(const G& prev, const G& next) const override {
    const Tangent e = next.ominus(predict(prev), side_);
    // Right side: e(δ_k) = Log(Exp(e)Exp(δ_k)) and the previous-state
    // perturbation conjugates through U, giving
    //   ∂e/∂δ_k = Jr⁻¹(e),   ∂e/∂δ_{k−1} = −Jl⁻¹(e)·Ad(U⁻¹).
    // Left side: e(δ_k) = Log(Exp(δ_k)Exp(e)), e(δ_{k−1}) = Log(Exp(e)Exp(−δ)):
    //   ∂e/∂δ_k = Jl⁻¹(e),   ∂e/∂δ_{k−1} = −Jr⁻¹(e).
    Mat j_next, j_prev;
    if (side_ == Side::Right) {
      j_next = GroupJacobians<G>::inv_jacobian(e, Side::Right);
      j_prev = -GroupJacobians<G>::inv_jacobian(e, Side::Left) * adj_uinv_;
    } else {
      j_next = GroupJacobians<G>::inv_jacobian(e, Side::Left);
      j_prev = -GroupJacobians<G>::inv_jacobian(e, Side::Right);
    }

    LocalBlocks<G> b;
    b.value = 0.5 * e.dot(info_ * e);
    b.grad.resize(2 * G::kDof);
    b.hess.resize(2 * G::kDof, 2 * G::kDof);
    const Tangent w = info_ * e;
    b.grad.template head<G::kDof>() = j_prev.transpose() * w;
    b.grad.template tail<G::kDof>() = j_next.transpose() * w;
    b.hess.template topLeftCorner<G::kDof, G::kDof>() = j_prev.transpose() * info_ * j_prev;
    b.hess.template topRightCorner<G::kDof, G::kDof>() = j_prev.transpose() * info_ * j_next;
    b.hess.template bottomLeftCorner<G::kDof, G::kDof>() =
        b.hess.template topRightCorner<G::kDof, G::kDof>().transpose();
    b.hess.template bottomRightCorner<G::kDof, G::kDof>() = j_next.transpose() * info_ * j_next;
    return b;
  }

  const Tangent& input() const { return u_; }
  double dt() const { return dt_; }
  const Mat& info() const { return info_; }

 private:
  int k_;
  Tangent u_;
  double dt_;
  Mat info_;
  Side side_;
  Mat adj_uinv_;
};

// ----------------------------------------------------------- range factor --

/// Predicted range from the tag (body offset p) to a fixed anchor a:
///   g(X) = ‖a − (C·p + r)‖
inline double range_predict(const Pose2& x, const Eigen::Vector2d& anchor,
                            const Eigen::Vector2d& tag_offset) {
  const Eigen::Vector2d tag = x.rotation() * tag_offset + x.translation();
  return (anchor - tag).norm();
}

/// Unary range factor: φ = noise-energy(y − g(X)) under any scalar model.
class RangeFactor final : public MapFactor<Pose2> {
 public:
  using Factor<Pose2>::energy;
  using MapFactor<Pose2>::linearize;

  RangeFactor(int index, double y, const Eigen::Vector2d& anchor,
              const Eigen::Vector2d& tag_offset, NoiseModel model, Side side)
      : index_(index), y_(y), anchor_(anchor), offset_(tag_offset),
        model_(std::move(model)), side_(side) {
    if (index < 0) throw IndexOutOfRange("range factor: negative state index");
  }

  FactorKind kind() const override { return FactorKind::Range; }
  int arity() const override { return 1; }
  int state(int i) const override {
    if (i != 0) throw IndexOutOfRange("range factor: slot out of range");
    return index_;
  }

  double energy(const Pose2& x) const override {
    return gvi2d::energy(model_, y_ - range_predict(x, anchor_, offset_));
  }

  /// Gauss-Newton blocks for the iteration: always positive semidefinite.
  LocalBlocks<Pose2> linearize(const Pose2& x) const override { return assemble(x, false); }

  /// Laplace blocks: true energy curvature φ''(r) on the measurement
  /// Jacobian, negative beyond the elbow of a redescending loss — an
  /// outlier-dominated factor then subtracts information instead of adding
  /// a fictitious full weight. The φ'(r)·∇²g residual-curvature term is
  /// dropped, as in Gauss-Newton.
  LocalBlocks<Pose2> laplace_blocks(const Pose2& x) const override { return assemble(x, true); }

  double measurement() const { return y_; }
  const NoiseModel& model() const { return model_; }

 private:
  LocalBlocks<Pose2> assemble(const Pose2& x, bool true_curvature) const {
    const Eigen::Vector2d tag = x.rotation() * offset_ + x.translation();
    const Eigen::Vector2d diff = tag - anchor_;
    const double d = diff.norm();
    const double r = y_ - d;

    // ∂g/∂δ: the perturbed tag position moves by C·[S·p | I]δ (right) or
    // [S·tag | I]δ (left), with S the 90° spin; project onto the unit
    // anchor-to-tag direction. Exact — no small-angle approximation.
    Eigen::RowVector3d jg = Eigen::RowVector3d::Zero();
    if (d > 1e-12) {
      const Eigen::RowVector2d u = diff.transpose() / d;
      if (side_ == Side::Right) {
        const Eigen::Vector2d sp(-offset_(1), offset_(0));
        jg(0) = u.dot(x.rotation() * sp);
        jg.tail<2>() = u * x.rotation().matrix();
      } else {
        jg(0) = u.dot(Eigen::Vector2d(-tag(1), tag(0)));
        jg.tail<2>() = u;
      }
    }

    const double curv = true_curvature ? dd_energy(model_, r) : gn_curvature(model_, r);
    LocalBlocks<Pose2> b;
    b.value = gvi2d::energy(model_, r);
    b.grad = -d_energy(model_, r) * jg.transpose();  // ∂r/∂δ = −∂g/∂δ
    b.hess = curv * (jg.transpose() * jg);
    return b;
  }

  int index_;
  double y_;
  Eigen::Vector2d anchor_;
  Eigen::Vector2d offset_;
  NoiseModel model_;
  Side side_;
};

// ------------------------------------------------------- free energy ops ---

template <GroupState G>
double process_energy(const G& prev, const G& next, const typename G::Tangent& u, double dt,
                      const Eigen::Matrix<double, G::kDof, G::kDof>& q, Side side) {
  const typename G::Tangent e =
      next.ominus(prev.oplus(typename G::Tangent(dt * u), Side::Right), side);
  return 0.5 * e.dot(q.inverse() * e);
}

inline double range_energy(const Pose2& x, double y, const Eigen::Vector2d& anchor,
                           const Eigen::Vector2d& tag_offset, const NoiseModel& model) {
  return energy(model, y - range_predict(x, anchor, tag_offset));
}

// ----------------------------------------------------------- factor graph --

template <GroupState G>
struct FactorGraph {
  Side side = Side::Right;
  std::vector<double> state_times;
  std::vector<std::unique_ptr<Factor<G>>> factors;

  int num_states() const { return static_cast<int>(state_times.size()); }

  void check_indices() const {
    for (const auto& f : factors)
      for (int i = 0; i < f->arity(); ++i)
        if (f->state(i) < 0 || f->state(i) >= num_states())
          throw IndexOutOfRange("factor graph: factor references state " +
                                std::to_string(f->state(i)) + " of " +
                                std::to_string(num_states()));
  }
};

/// Scatter-add of one factor's local blocks into the global system
/// (Eq.-13-style projection). Binary factors must connect adjacent states,
/// which keeps the assembled matrix exactly block-tridiagonal.
template <GroupState G>
void scatter_add(const Factor<G>& f, const LocalBlocks<G>& b, BlockTridiag<G::kDof>& info,
                 Eigen::VectorXd& grad) {
  constexpr int D = G::kDof;
  const int i = f.state(0);
  if (f.arity() == 1) {
    info.add_diag(i, b.hess);
    grad.segment<D>(i * D) += b.grad;
  } else {
    const int j = f.state(1);
    if (j != i + 1)
      throw IndexOutOfRange("scatter_add: binary factor must connect adjacent states");
    info.add_diag(i, b.hess.template topLeftCorner<D, D>());
    info.add_diag(j, b.hess.template bottomRightCorner<D, D>());
    info.add_off(i, b.hess.template topRightCorner<D, D>());
    grad.segment<D>(i * D) += b.grad.template head<D>();
    grad.segment<D>(j * D) += b.grad.template tail<D>();
  }
}

template <GroupState G>
struct AssembledSystem {
  BlockTridiag<G::kDof> info;
  Eigen::VectorXd grad;
};

/// Assembles per-factor blocks (aligned with graph.factors) into the global
/// information matrix and stacked gradient.
template <GroupState G>
AssembledSystem<G> assemble(const FactorGraph<G>& graph,
                            const std::vector<LocalBlocks<G>>& blocks) {
  if (blocks.size() != graph.factors.size())
    throw LengthMismatch("assemble: one block set per factor required");
  AssembledSystem<G> sys{BlockTridiag<G::kDof>(graph.num_states()),
                         Eigen::VectorXd::Zero(graph.num_states() * G::kDof)};
  for (size_t i = 0; i < blocks.size(); ++i)
    scatter_add(*graph.factors[i], blocks[i], sys.info, sys.grad);
  return sys;
}

template <GroupState G>
BlockTridiag<G::kDof> assemble_info(const FactorGraph<G>& graph,
                                    const std::vector<LocalBlocks<G>>& blocks) {
  return assemble(graph, blocks).info;
}

/// Total energy Σ_k φ_k at a concrete trajectory (the MAP objective).
template <GroupState G>
double total_energy(const FactorGraph<G>& graph, const std::vector<G>& states) {
  double acc = 0.0;
  for (const auto& f : graph.factors)
    acc += f->arity() == 1 ? f->energy(states[f->state(0)])
                           : f->energy(states[f->state(0)], states[f->state(1)]);
  return acc;
}

/// Integrates the graph's process-factor inputs from x0 — the dead-reckoned
/// initialization.
template <GroupState G>
Trajectory<G> dead_reckon(const FactorGraph<G>& graph, const G& x0) {
  Trajectory<G> traj;
  traj.times = graph.state_times;
  traj.states.assign(graph.num_states(), x0);
  for (const auto& f : graph.factors) {
    if (f->kind() != FactorKind::Process) continue;
    const auto* p = dynamic_cast<const ProcessFactor<G>*>(f.get());
    if (p == nullptr) throw DataError("dead_reckon: process factor of unexpected type");
    traj.states[p->state(1)] = p->predict(traj.states[p->state(0)]);
  }
  return traj;
}

// ------------------------------------------------------------ graph build --

struct OdometrySample {
  double t = 0.0;
  Twist2 u = Twist2::Zero();  // (ω, v_x, v_y)
};

struct RangeSample {
  double t = 0.0;
  int tag = 0;
  int anchor = 0;
  double range = 0.0;
};

struct PriorSpec {
  Pose2 mean;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
};

struct GraphBuildConfig {
  int downsample = 10;   // odometry samples compounded per state interval
  double dt_odo = 0.0;   // sample period; 0 → inferred from the stream
  Eigen::Matrix3d qc = Eigen::Matrix3d::Identity();  // continuous-time PSD
  Side side = Side::Right;
};

/// Builds the estimation graph from sensor streams: one prior on X_0, one
/// process factor per state interval (odometry compounded within the
/// interval), and one range factor per measurement attached to the pose with
/// the nearest timestamp.
FactorGraph<Pose2> build_graph(const std::vector<OdometrySample>& odometry,
                               const std::vector<RangeSample>& ranges, const PriorSpec& prior,
                               const std::map<int, Eigen::Vector2d>& anchors,
                               const std::map<int, Eigen::Vector2d>& tag_offsets,
                               const NoiseModel& range_model, const GraphBuildConfig& cfg);

}  // namespace gvi2d
