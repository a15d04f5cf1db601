#include "gvi2d/sim.hpp"

#include <cmath>

#include "gvi2d/rng.hpp"

namespace gvi2d {

namespace {

constexpr double kArenaSide = 6.3245553203367586;  // sqrt(40 m²)
constexpr double kTwoPi = 6.2831853071795865;

// Nominal input levels; the orbit radius v̄/ω̄ ≈ 1.86 m leaves ≥ 1.2 m of
// margin to the arena walls once centered.
constexpr double kOmegaBar = 0.35;  // rad/s
constexpr double kSpeedBar = 0.65;  // m/s

}  // namespace

std::map<int, Eigen::Vector2d> default_anchors() {
  const double s = kArenaSide;
  return {{0, {0.0, 0.0}}, {1, {s, 0.0}}, {2, {s, s}}, {3, {0.0, s}}};
}

std::map<int, Eigen::Vector2d> default_tag_offsets() {
  return {{0, {0.20, 0.15}}, {1, {0.20, -0.15}}, {2, {-0.20, -0.15}}, {3, {-0.20, 0.15}}};
}

int SimConfig::odometry_per_state() const {
  return static_cast<int>(std::lround(odometry_rate_hz * dt));
}

void SimConfig::check() const {
  if (trials < 1) throw ConfigError("sim: trials must be >= 1");
  if (poses < 1) throw ConfigError("sim: poses must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("sim: dt must be positive");
  if (!(odometry_rate_hz > 0.0)) throw ConfigError("sim: odometry rate must be positive");
  if (!(range_rate_hz > 0.0)) throw ConfigError("sim: range rate must be positive");
  const double per_state = odometry_rate_hz * dt;
  if (per_state < 1.0 - 1e-9 ||
      std::abs(per_state - std::lround(per_state)) > 1e-9 * std::max(1.0, per_state))
    throw ConfigError("sim: odometry rate must give a whole number of samples per state interval");
  if (anchors.empty()) throw ConfigError("sim: need at least one anchor");
  if (tag_offsets.empty()) throw ConfigError("sim: need at least one tag offset");
  if ((qc.array() < 0.0).any()) throw ConfigError("sim: qc spectral densities must be >= 0");
  if (range_sigma < 0.0) throw ConfigError("sim: range sigma must be >= 0");
  if (corrupt_fraction < 0.0 || corrupt_fraction > 1.0)
    throw ConfigError("sim: corruption fraction must lie in [0, 1]");
  if (corrupt_lo_sigmas < 0.0 || corrupt_lo_sigmas > corrupt_hi_sigmas)
    throw ConfigError("sim: corruption window needs 0 <= lo <= hi");
}

InputProfile nominal_profile(std::uint64_t seed) {
  Rng rng(seed);
  const double p1 = rng.uniform(0.0, kTwoPi);
  const double p2 = rng.uniform(0.0, kTwoPi);
  const double p3 = rng.uniform(0.0, kTwoPi);
  return [p1, p2, p3](double t) {
    const double omega = kOmegaBar * (1.0 + 0.25 * std::sin(0.20 * t + p1));
    const double vx = kSpeedBar * (1.0 + 0.20 * std::sin(0.13 * t + p2));
    const double vy = 0.05 * std::sin(0.29 * t + p3);
    return Twist2(omega, vx, vy);
  };
}

RangeStream corrupt_ranges(const std::vector<RangeSample>& clean, double sigma, double fraction,
                           double lo_sigmas, double hi_sigmas, std::uint64_t seed) {
  if (sigma < 0.0) throw ConfigError("corrupt_ranges: sigma must be >= 0");
  if (fraction < 0.0 || fraction > 1.0)
    throw ConfigError("corrupt_ranges: fraction must lie in [0, 1]");
  if (lo_sigmas < 0.0 || lo_sigmas > hi_sigmas)
    throw ConfigError("corrupt_ranges: corruption window needs 0 <= lo <= hi");

  RangeStream out;
  out.samples = clean;
  out.nlos.assign(clean.size(), 0);
  Rng rng(seed);
  for (size_t i = 0; i < out.samples.size(); ++i) {
    double noise = sigma * rng.normal();
    if (rng.uniform() < fraction) {
      out.nlos[i] = 1;
      noise += lo_sigmas == hi_sigmas ? lo_sigmas * sigma
                                      : rng.uniform(lo_sigmas * sigma, hi_sigmas * sigma);
    }
    out.samples[i].range += noise;
  }
  return out;
}

SimOutput simulate_with_profile(const SimConfig& cfg, std::uint64_t seed,
                                const InputProfile& profile, const Pose2& start) {
  cfg.check();

  const int m = cfg.odometry_per_state();
  const int n_odo = cfg.poses * m;
  const double dt_odo = cfg.dt / m;

  SimOutput out;
  out.truth.states.reserve(n_odo + 1);
  out.truth.times.reserve(n_odo + 1);
  out.odometry.reserve(n_odo);

  const Eigen::Vector3d noise_sd = (cfg.qc / dt_odo).cwiseSqrt();
  Rng odo_rng(derive_seed(seed, "odometry"));

  Pose2 x = start;
  out.truth.states.push_back(x);
  out.truth.times.push_back(0.0);
  for (int i = 0; i < n_odo; ++i) {
    const double t = i * dt_odo;
    const Twist2 u = profile(t);
    Twist2 w;
    for (int j = 0; j < 3; ++j) w[j] = noise_sd[j] * odo_rng.normal();
    out.odometry.push_back({t, u + w});
    x = x * Pose2::Exp(dt_odo * u);
    out.truth.states.push_back(x);
    out.truth.times.push_back((i + 1) * dt_odo);
  }

  // Range epochs: one tag (round-robin by epoch) measures every anchor. The
  // first epoch sits one range period in, since pose 0 is already pinned by
  // the prior.
  const double dt_range = 1.0 / cfg.range_rate_hz;
  const double horizon = cfg.poses * cfg.dt;
  const int n_epochs = static_cast<int>(std::floor(horizon / dt_range + 1e-9));
  std::vector<int> tag_ids;
  for (const auto& [id, offset] : cfg.tag_offsets) tag_ids.push_back(id);

  std::vector<RangeSample> clean;
  clean.reserve(static_cast<size_t>(n_epochs) * cfg.anchors.size());
  for (int j = 1; j <= n_epochs; ++j) {
    const double t = j * dt_range;
    const int truth_idx = std::min(static_cast<int>(std::lround(t / dt_odo)), n_odo);
    const Pose2& pose = out.truth.states[truth_idx];
    const int tag = tag_ids[(j - 1) % tag_ids.size()];
    const Eigen::Vector2d& offset = cfg.tag_offsets.at(tag);
    for (const auto& [anchor_id, anchor] : cfg.anchors)
      clean.push_back({t, tag, anchor_id, range_predict(pose, anchor, offset)});
  }

  RangeStream corrupted =
      corrupt_ranges(clean, cfg.range_sigma, cfg.corrupt_fraction, cfg.corrupt_lo_sigmas,
                     cfg.corrupt_hi_sigmas, derive_seed(seed, "ranges"));
  out.ranges = std::move(corrupted.samples);
  out.nlos = std::move(corrupted.nlos);
  return out;
}

SimOutput simulate_trajectory(const SimConfig& cfg, std::uint64_t seed) {
  cfg.check();
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  for (const auto& [id, p] : cfg.anchors) center += p;
  center /= static_cast<double>(cfg.anchors.size());
  const Pose2 start(0.0, center.x(), center.y() - kSpeedBar / kOmegaBar);
  return simulate_with_profile(cfg, seed, nominal_profile(derive_seed(seed, "profile")), start);
}

}  // namespace gvi2d
