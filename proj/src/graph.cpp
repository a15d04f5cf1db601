#include "gvi2d/graph.hpp"

#include <algorithm>
#include <cmath>

namespace gvi2d {

namespace {

/// Index of the state whose timestamp is nearest to t (ties go to the
/// earlier state). Assumes times sorted ascending.
int nearest_state(const std::vector<double>& times, double t) {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0;
  if (it == times.end()) return static_cast<int>(times.size()) - 1;
  const int hi = static_cast<int>(it - times.begin());
  return (t - times[hi - 1] <= times[hi] - t) ? hi - 1 : hi;
}

}  // namespace

FactorGraph<Pose2> build_graph(const std::vector<OdometrySample>& odometry,
                               const std::vector<RangeSample>& ranges, const PriorSpec& prior,
                               const std::map<int, Eigen::Vector2d>& anchors,
                               const std::map<int, Eigen::Vector2d>& tag_offsets,
                               const NoiseModel& range_model, const GraphBuildConfig& cfg) {
  if (odometry.empty()) throw EmptyOdometry("build_graph: odometry stream is empty");
  if (cfg.downsample < 1) throw ConfigError("build_graph: downsample must be >= 1");
  for (size_t i = 1; i < odometry.size(); ++i)
    if (!(odometry[i].t > odometry[i - 1].t))
      throw DataError("build_graph: odometry timestamps must be strictly increasing");

  double dt_odo = cfg.dt_odo;
  if (dt_odo <= 0.0) {
    if (odometry.size() < 2)
      throw ConfigError("build_graph: cannot infer the odometry period from one sample");
    dt_odo = odometry[1].t - odometry[0].t;
  }

  const int n_odo = static_cast<int>(odometry.size());
  const int num_intervals = (n_odo + cfg.downsample - 1) / cfg.downsample;

  FactorGraph<Pose2> graph;
  graph.side = cfg.side;
  graph.state_times.resize(num_intervals + 1);
  for (int j = 0; j <= num_intervals; ++j) {
    const int idx = j * cfg.downsample;
    // The terminal state sits at the end of the last odometry interval.
    graph.state_times[j] = idx < n_odo ? odometry[idx].t : odometry.back().t + dt_odo;
  }

  graph.factors.push_back(
      std::make_unique<PriorFactor<Pose2>>(0, prior.mean, prior.cov, cfg.side));

  // Compound the odometry within each state interval into a single
  // body-frame increment, then express it as a constant rate over the step.
  for (int j = 0; j < num_intervals; ++j) {
    const int lo = j * cfg.downsample;
    const int hi = std::min((j + 1) * cfg.downsample, n_odo);
    Pose2 delta;
    for (int i = lo; i < hi; ++i) {
      const double dt_i = (i + 1 < n_odo ? odometry[i + 1].t : odometry.back().t + dt_odo) -
                          odometry[i].t;
      delta = delta * Pose2::Exp(dt_i * odometry[i].u);
    }
    const double dt_state = graph.state_times[j + 1] - graph.state_times[j];
    const Twist2 u = delta.Log() / dt_state;
    graph.factors.push_back(std::make_unique<ProcessFactor<Pose2>>(
        j + 1, u, dt_state, Eigen::Matrix3d(dt_state * cfg.qc), cfg.side));
  }

  for (const RangeSample& r : ranges) {
    if (r.t < graph.state_times.front())
      throw RangeBeforeFirstPose("build_graph: range at t=" + std::to_string(r.t) +
                                 " precedes the first pose");
    const auto anchor = anchors.find(r.anchor);
    if (anchor == anchors.end())
      throw DataError("build_graph: unknown anchor id " + std::to_string(r.anchor));
    const auto tag = tag_offsets.find(r.tag);
    if (tag == tag_offsets.end())
      throw DataError("build_graph: unknown tag id " + std::to_string(r.tag));
    graph.factors.push_back(std::make_unique<RangeFactor>(
        nearest_state(graph.state_times, r.t), r.range, anchor->second, tag->second,
        range_model, cfg.side));
  }

  return graph;
}

}  // namespace gvi2d
