#include "gvi2d/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "gvi2d/rng.hpp"

namespace gvi2d {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_provenance(std::ostream& os, const Provenance& prov) {
  os << "# config_hash: " << prov.config_hash << "\n";
  os << "# seed: " << prov.seed << "\n";
}

std::ofstream open_out(const fs::path& file) {
  if (file.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
    if (ec) throw DataError("cannot create directory " + file.parent_path().string());
  }
  std::ofstream os(file, std::ios::binary);  // binary: '\n' only, on every platform
  if (!os) throw DataError("cannot open " + file.string() + " for writing");
  return os;
}

std::ifstream open_in(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw DataError("cannot open " + file.string());
  return is;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(sep, start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

/// Line-oriented CSV reader: skips '#' comments and blank lines, checks the
/// header, and yields split rows.
class CsvReader {
 public:
  CsvReader(const fs::path& file, const std::string& header)
      : name_(file.string()), is_(open_in(file)) {
    std::string line;
    while (std::getline(is_, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (line != header)
        throw DataError(name_ + ": expected header '" + header + "', got '" + line + "'");
      return;
    }
    throw DataError(name_ + ": missing header '" + header + "'");
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(is_, line)) {
      if (line.empty() || line[0] == '#') continue;
      fields = split(line, ',');
      return true;
    }
    return false;
  }

  const std::string& name() const { return name_; }

 private:
  std::string name_;
  std::ifstream is_;
};

double field_double(const CsvReader& reader, const std::vector<std::string>& fields, size_t i) {
  if (i >= fields.size()) throw DataError(reader.name() + ": short row");
  try {
    return parse_double(fields[i]);
  } catch (const DataError& e) {
    throw DataError(reader.name() + ": " + e.what());
  }
}

int field_int(const CsvReader& reader, const std::vector<std::string>& fields, size_t i) {
  if (i >= fields.size()) throw DataError(reader.name() + ": short row");
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(fields[i].data(), fields[i].data() + fields[i].size(), value);
  if (ec != std::errc() || ptr != fields[i].data() + fields[i].size())
    throw DataError(reader.name() + ": bad integer '" + fields[i] + "'");
  return value;
}

// --------------------------------------------------- strict JSON helpers ---

void check_keys(const json& j, const char* where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (std::string_view a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

template <typename T>
void get_if_present(const json& j, const char* where, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    it->get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + "." + key + ": " + e.what());
  }
}

void get_vec3(const json& j, const char* where, const char* key, Eigen::Vector3d& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_array() || it->size() != 3)
    throw ConfigError(std::string(where) + "." + key + ": expected an array of 3 numbers");
  for (int i = 0; i < 3; ++i) {
    try {
      out[i] = it->at(static_cast<size_t>(i)).get<double>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string(where) + "." + key + ": " + e.what());
    }
  }
}

void get_landmarks(const json& j, const char* where, const char* key,
                   std::map<int, Eigen::Vector2d>& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_array()) throw ConfigError(std::string(where) + "." + key + ": expected an array");
  std::map<int, Eigen::Vector2d> parsed;
  for (const auto& row : *it) {
    if (!row.is_array() || row.size() != 3)
      throw ConfigError(std::string(where) + "." + key + ": each entry must be [id, x, y]");
    try {
      const int id = row.at(0).get<int>();
      if (parsed.count(id))
        throw ConfigError(std::string(where) + "." + key + ": duplicate id " + std::to_string(id));
      parsed[id] = Eigen::Vector2d(row.at(1).get<double>(), row.at(2).get<double>());
    } catch (const json::exception& e) {
      throw ConfigError(std::string(where) + "." + key + ": " + e.what());
    }
  }
  out = std::move(parsed);
}

json landmarks_to_json(const std::map<int, Eigen::Vector2d>& landmarks) {
  json arr = json::array();
  for (const auto& [id, p] : landmarks) arr.push_back({id, p.x(), p.y()});
  return arr;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 64> buf;
  const auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  if (ec != std::errc()) throw DataError("format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view s) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError("bad number '" + std::string(s) + "'");
  return value;
}

// --------------------------------------------------------------- dataset ---

void validate(const Dataset& ds) {
  for (size_t i = 1; i < ds.odometry.size(); ++i)
    if (!(ds.odometry[i].t > ds.odometry[i - 1].t))
      throw DataError("dataset: odometry timestamps must be strictly increasing");
  for (size_t i = 1; i < ds.ranges.size(); ++i)
    if (ds.ranges[i].t < ds.ranges[i - 1].t)
      throw DataError("dataset: range timestamps must be sorted");
  for (size_t i = 1; i < ds.truth.times.size(); ++i)
    if (!(ds.truth.times[i] > ds.truth.times[i - 1]))
      throw DataError("dataset: truth timestamps must be strictly increasing");
  if (ds.truth.states.size() != ds.truth.times.size())
    throw DataError("dataset: truth states and times differ in length");
  for (const RangeSample& r : ds.ranges) {
    if (!ds.anchors.count(r.anchor))
      throw DataError("dataset: unknown anchor id " + std::to_string(r.anchor));
    if (!ds.tag_offsets.count(r.tag))
      throw DataError("dataset: unknown tag id " + std::to_string(r.tag));
  }
  if (!ds.nlos.empty() && ds.nlos.size() != ds.ranges.size())
    throw DataError("dataset: nlos flags do not match the range stream");
}

void write_dataset(const fs::path& dir, const Dataset& ds, const Provenance& prov) {
  validate(ds);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string());

  {
    auto os = open_out(dir / "anchors.csv");
    write_provenance(os, prov);
    os << "id,x,y\n";
    for (const auto& [id, p] : ds.anchors)
      os << id << ',' << format_double(p.x()) << ',' << format_double(p.y()) << '\n';
  }
  {
    auto os = open_out(dir / "tags.csv");
    write_provenance(os, prov);
    os << "id,offset_x,offset_y\n";
    for (const auto& [id, p] : ds.tag_offsets)
      os << id << ',' << format_double(p.x()) << ',' << format_double(p.y()) << '\n';
  }
  {
    auto os = open_out(dir / "odometry.csv");
    write_provenance(os, prov);
    os << "t,omega,vx,vy\n";
    for (const auto& s : ds.odometry)
      os << format_double(s.t) << ',' << format_double(s.u[0]) << ',' << format_double(s.u[1])
         << ',' << format_double(s.u[2]) << '\n';
  }
  {
    auto os = open_out(dir / "ranges.csv");
    write_provenance(os, prov);
    os << "t,tag,anchor,range\n";
    for (const auto& r : ds.ranges)
      os << format_double(r.t) << ',' << r.tag << ',' << r.anchor << ','
         << format_double(r.range) << '\n';
  }
  if (ds.has_truth()) write_trajectory(dir / "truth.csv", ds.truth, prov);
  if (!ds.nlos.empty()) {
    auto os = open_out(dir / "nlos.csv");
    write_provenance(os, prov);
    os << "nlos\n";
    for (auto f : ds.nlos) os << static_cast<int>(f) << '\n';
  }
}

Dataset read_dataset(const fs::path& dir) {
  Dataset ds;
  {
    CsvReader reader(dir / "anchors.csv", "id,x,y");
    std::vector<std::string> f;
    while (reader.next(f))
      ds.anchors[field_int(reader, f, 0)] =
          Eigen::Vector2d(field_double(reader, f, 1), field_double(reader, f, 2));
  }
  {
    CsvReader reader(dir / "tags.csv", "id,offset_x,offset_y");
    std::vector<std::string> f;
    while (reader.next(f))
      ds.tag_offsets[field_int(reader, f, 0)] =
          Eigen::Vector2d(field_double(reader, f, 1), field_double(reader, f, 2));
  }
  {
    CsvReader reader(dir / "odometry.csv", "t,omega,vx,vy");
    std::vector<std::string> f;
    while (reader.next(f))
      ds.odometry.push_back({field_double(reader, f, 0),
                             Twist2(field_double(reader, f, 1), field_double(reader, f, 2),
                                    field_double(reader, f, 3))});
  }
  {
    CsvReader reader(dir / "ranges.csv", "t,tag,anchor,range");
    std::vector<std::string> f;
    while (reader.next(f))
      ds.ranges.push_back({field_double(reader, f, 0), field_int(reader, f, 1),
                           field_int(reader, f, 2), field_double(reader, f, 3)});
  }
  if (fs::exists(dir / "truth.csv")) ds.truth = read_trajectory(dir / "truth.csv");
  if (fs::exists(dir / "nlos.csv")) {
    CsvReader reader(dir / "nlos.csv", "nlos");
    std::vector<std::string> f;
    while (reader.next(f))
      ds.nlos.push_back(static_cast<std::uint8_t>(field_int(reader, f, 0) != 0));
  }
  validate(ds);
  return ds;
}

Dataset dataset_from_sim(const SimConfig& cfg, const SimOutput& out) {
  Dataset ds;
  ds.anchors = cfg.anchors;
  ds.tag_offsets = cfg.tag_offsets;
  ds.odometry = out.odometry;
  ds.ranges = out.ranges;
  ds.truth = out.truth;
  ds.nlos = out.nlos;
  return ds;
}

// --------------------------------------------------------------- results ---

void write_trajectory(const fs::path& file, const Trajectory<Pose2>& traj,
                      const Provenance& prov) {
  if (traj.states.size() != traj.times.size())
    throw LengthMismatch("write_trajectory: states and times differ in length");
  auto os = open_out(file);
  write_provenance(os, prov);
  os << "t,theta,x,y\n";
  for (size_t i = 0; i < traj.states.size(); ++i) {
    const Pose2& x = traj.states[i];
    os << format_double(traj.times[i]) << ',' << format_double(x.rotation().angle()) << ','
       << format_double(x.translation().x()) << ',' << format_double(x.translation().y()) << '\n';
  }
}

Trajectory<Pose2> read_trajectory(const fs::path& file) {
  Trajectory<Pose2> traj;
  CsvReader reader(file, "t,theta,x,y");
  std::vector<std::string> f;
  while (reader.next(f)) {
    traj.times.push_back(field_double(reader, f, 0));
    traj.states.emplace_back(field_double(reader, f, 1), field_double(reader, f, 2),
                             field_double(reader, f, 3));
  }
  return traj;
}

void write_covariances(const fs::path& file, const std::vector<double>& times,
                       const std::vector<Eigen::Matrix3d>& covariances, const Provenance& prov) {
  if (times.size() != covariances.size())
    throw LengthMismatch("write_covariances: times and covariances differ in length");
  auto os = open_out(file);
  write_provenance(os, prov);
  os << "t,s00,s01,s02,s11,s12,s22\n";
  for (size_t i = 0; i < times.size(); ++i) {
    const Eigen::Matrix3d& s = covariances[i];
    os << format_double(times[i]) << ',' << format_double(s(0, 0)) << ',' << format_double(s(0, 1))
       << ',' << format_double(s(0, 2)) << ',' << format_double(s(1, 1)) << ','
       << format_double(s(1, 2)) << ',' << format_double(s(2, 2)) << '\n';
  }
}

std::pair<std::vector<double>, std::vector<Eigen::Matrix3d>> read_covariances(
    const fs::path& file) {
  std::vector<double> times;
  std::vector<Eigen::Matrix3d> covs;
  CsvReader reader(file, "t,s00,s01,s02,s11,s12,s22");
  std::vector<std::string> f;
  while (reader.next(f)) {
    times.push_back(field_double(reader, f, 0));
    Eigen::Matrix3d s;
    s(0, 0) = field_double(reader, f, 1);
    s(0, 1) = s(1, 0) = field_double(reader, f, 2);
    s(0, 2) = s(2, 0) = field_double(reader, f, 3);
    s(1, 1) = field_double(reader, f, 4);
    s(1, 2) = s(2, 1) = field_double(reader, f, 5);
    s(2, 2) = field_double(reader, f, 6);
    covs.push_back(s);
  }
  return {std::move(times), std::move(covs)};
}

void write_trace(const fs::path& file, const std::vector<IterationReport>& trace,
                 const Provenance& prov) {
  auto os = open_out(file);
  write_provenance(os, prov);
  os << "iteration,loss,step_inf,backtracks,clamps,step_scale\n";
  for (const auto& it : trace)
    os << it.iteration << ',' << format_double(it.loss) << ',' << format_double(it.step_inf) << ','
       << it.backtracks << ',' << it.clamps << ',' << format_double(it.step_scale) << '\n';
}

void write_trace(const fs::path& file, const std::vector<MapIterationReport>& trace,
                 const Provenance& prov) {
  auto os = open_out(file);
  write_provenance(os, prov);
  os << "iteration,objective,step_inf,lambda,accepted,clamps\n";
  for (const auto& it : trace)
    os << it.iteration << ',' << format_double(it.objective) << ',' << format_double(it.step_inf)
       << ',' << format_double(it.lambda) << ',' << (it.accepted ? 1 : 0) << ',' << it.clamps
       << '\n';
}

void write_summary_csv(const fs::path& file, const std::vector<TrialResult>& rows,
                       const Provenance& prov) {
  auto os = open_out(file);
  write_provenance(os, prov);
  os << "estimator,trial,rmse_rot_rad,rmse_trans_m,anees\n";
  for (const auto& r : rows) {
    if (r.estimator.find_first_of(",\n") != std::string::npos)
      throw DataError("write_summary_csv: estimator name contains a delimiter");
    os << r.estimator << ',' << r.trial << ',' << format_double(r.rmse_rot_rad) << ','
       << format_double(r.rmse_trans_m) << ',' << format_double(r.anees) << '\n';
  }
}

std::vector<TrialResult> read_summary_csv(const fs::path& file) {
  std::vector<TrialResult> rows;
  CsvReader reader(file, "estimator,trial,rmse_rot_rad,rmse_trans_m,anees");
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f.size() != 5) throw DataError(reader.name() + ": expected 5 columns");
    TrialResult r;
    r.estimator = f[0];
    r.trial = field_int(reader, f, 1);
    r.rmse_rot_rad = field_double(reader, f, 2);
    r.rmse_trans_m = field_double(reader, f, 3);
    r.anees = field_double(reader, f, 4);
    r.failed = std::isnan(r.rmse_rot_rad);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_aggregate_tsv(const fs::path& file, const std::vector<EstimatorSummary>& aggregate,
                         const Provenance& prov) {
  auto os = open_out(file);
  write_provenance(os, prov);
  os << "estimator\trmse_rot_rad\trmse_trans_m\tanees\ttrials\tfailures\n";
  for (const auto& s : aggregate)
    os << s.estimator << '\t' << format_double(s.rmse_rot_rad) << '\t'
       << format_double(s.rmse_trans_m) << '\t' << format_double(s.anees) << '\t' << s.trials
       << '\t' << s.failures << '\n';
}

void write_noise_model(const fs::path& file, const NoiseModel& model, double log_likelihood,
                       const Provenance& prov) {
  json j;
  j["model"] = noise_to_json(model);
  j["log_likelihood"] = log_likelihood;
  j["config_hash"] = prov.config_hash;
  j["seed"] = prov.seed;
  auto os = open_out(file);
  os << j.dump(2) << '\n';
}

NoiseModel read_noise_model(const fs::path& file) {
  auto is = open_in(file);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw DataError(file.string() + ": " + e.what());
  }
  check_keys(j, "noise model file", {"model", "log_likelihood", "config_hash", "seed"});
  if (!j.contains("model")) throw DataError(file.string() + ": missing 'model'");
  return noise_from_json(j["model"]);
}

std::vector<double> read_residuals(const fs::path& file) {
  auto is = open_in(file);
  std::vector<double> residuals;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    try {
      residuals.push_back(parse_double(line));
    } catch (const DataError& e) {
      throw DataError(file.string() + ": " + e.what());
    }
  }
  if (residuals.empty()) throw DataError(file.string() + ": no residual samples");
  return residuals;
}

void write_residuals(const fs::path& file, const std::vector<double>& residuals,
                     const Provenance& prov) {
  auto os = open_out(file);
  write_provenance(os, prov);
  for (double r : residuals) os << format_double(r) << '\n';
}

// ---------------------------------------------------------------- config ---

void ExperimentConfig::check() const {
  sim.check();
  solver.check();
  map.check();
  if (noise_fit_samples < 10) throw ConfigError("config: noise_fit.samples must be >= 10");
  if (gmm_components < 1) throw ConfigError("config: noise_fit.gmm_components must be >= 1");
  if (!(prior_cov.array() > 0.0).all())
    throw ConfigError("config: estimator.prior_cov must be positive");
}

CubatureKind cubature_kind_from_string(std::string_view s) {
  if (s == "gh3") return CubatureKind::GaussHermite3;
  if (s == "spherical") return CubatureKind::Spherical;
  throw ConfigError("unknown cubature rule '" + std::string(s) + "' (use gh3 or spherical)");
}

Side side_from_string(std::string_view s) {
  if (s == "right") return Side::Right;
  if (s == "left") return Side::Left;
  throw ConfigError("unknown perturbation side '" + std::string(s) + "' (use right or left)");
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, "config", {"seed", "sim", "solver", "map", "noise_fit", "estimator",
                           "noise_models"});
  ExperimentConfig cfg;
  get_if_present(j, "config", "seed", cfg.sim.seed);

  if (j.contains("sim")) {
    const json& s = j["sim"];
    check_keys(s, "sim",
               {"trials", "poses", "dt", "odometry_rate_hz", "range_rate_hz", "qc", "range_sigma",
                "corrupt_fraction", "corrupt_lo_sigmas", "corrupt_hi_sigmas", "anchors", "tags"});
    get_if_present(s, "sim", "trials", cfg.sim.trials);
    get_if_present(s, "sim", "poses", cfg.sim.poses);
    get_if_present(s, "sim", "dt", cfg.sim.dt);
    get_if_present(s, "sim", "odometry_rate_hz", cfg.sim.odometry_rate_hz);
    get_if_present(s, "sim", "range_rate_hz", cfg.sim.range_rate_hz);
    get_vec3(s, "sim", "qc", cfg.sim.qc);
    get_if_present(s, "sim", "range_sigma", cfg.sim.range_sigma);
    get_if_present(s, "sim", "corrupt_fraction", cfg.sim.corrupt_fraction);
    get_if_present(s, "sim", "corrupt_lo_sigmas", cfg.sim.corrupt_lo_sigmas);
    get_if_present(s, "sim", "corrupt_hi_sigmas", cfg.sim.corrupt_hi_sigmas);
    get_landmarks(s, "sim", "anchors", cfg.sim.anchors);
    get_landmarks(s, "sim", "tags", cfg.sim.tag_offsets);
  }

  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, "solver",
               {"max_iterations", "tol_step_inf", "tol_rel_loss", "shrink", "max_backtracks",
                "unary_rule", "binary_rule", "warm_start", "init_stddev", "hessian_floor",
                "loss_slack"});
    get_if_present(s, "solver", "max_iterations", cfg.solver.max_iterations);
    get_if_present(s, "solver", "tol_step_inf", cfg.solver.tol_step_inf);
    get_if_present(s, "solver", "tol_rel_loss", cfg.solver.tol_rel_loss);
    get_if_present(s, "solver", "shrink", cfg.solver.shrink);
    get_if_present(s, "solver", "max_backtracks", cfg.solver.max_backtracks);
    get_if_present(s, "solver", "warm_start", cfg.solver.warm_start);
    get_if_present(s, "solver", "init_stddev", cfg.solver.init_stddev);
    get_if_present(s, "solver", "hessian_floor", cfg.solver.hessian_floor);
    get_if_present(s, "solver", "loss_slack", cfg.solver.loss_slack);
    std::string rule;
    if (s.contains("unary_rule")) {
      get_if_present(s, "solver", "unary_rule", rule);
      cfg.solver.unary_rule = cubature_kind_from_string(rule);
    }
    if (s.contains("binary_rule")) {
      get_if_present(s, "solver", "binary_rule", rule);
      cfg.solver.binary_rule = cubature_kind_from_string(rule);
    }
  }

  if (j.contains("map")) {
    const json& s = j["map"];
    check_keys(s, "map",
               {"max_iterations", "tol_step_inf", "lm_init", "lm_grow", "lm_shrink",
                "objective_slack"});
    get_if_present(s, "map", "max_iterations", cfg.map.max_iterations);
    get_if_present(s, "map", "tol_step_inf", cfg.map.tol_step_inf);
    get_if_present(s, "map", "lm_init", cfg.map.lm_init);
    get_if_present(s, "map", "lm_grow", cfg.map.lm_grow);
    get_if_present(s, "map", "lm_shrink", cfg.map.lm_shrink);
    get_if_present(s, "map", "objective_slack", cfg.map.objective_slack);
  }

  if (j.contains("noise_fit")) {
    const json& s = j["noise_fit"];
    check_keys(s, "noise_fit", {"samples", "gmm_components"});
    get_if_present(s, "noise_fit", "samples", cfg.noise_fit_samples);
    get_if_present(s, "noise_fit", "gmm_components", cfg.gmm_components);
  }

  if (j.contains("noise_models")) {
    const json& s = j["noise_models"];
    check_keys(s, "noise_models", {"esgvi", "map-c", "map-gmm"});
    get_if_present(s, "noise_models", "esgvi", cfg.noise_model_esgvi);
    get_if_present(s, "noise_models", "map-c", cfg.noise_model_map_c);
    get_if_present(s, "noise_models", "map-gmm", cfg.noise_model_map_gmm);
  }

  if (j.contains("estimator")) {
    const json& s = j["estimator"];
    check_keys(s, "estimator", {"side", "prior_cov"});
    if (s.contains("side")) {
      std::string side;
      get_if_present(s, "estimator", "side", side);
      cfg.side = side_from_string(side);
    }
    get_vec3(s, "estimator", "prior_cov", cfg.prior_cov);
  }

  cfg.check();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.sim.seed;
  j["sim"] = {{"trials", cfg.sim.trials},
              {"poses", cfg.sim.poses},
              {"dt", cfg.sim.dt},
              {"odometry_rate_hz", cfg.sim.odometry_rate_hz},
              {"range_rate_hz", cfg.sim.range_rate_hz},
              {"qc", {cfg.sim.qc[0], cfg.sim.qc[1], cfg.sim.qc[2]}},
              {"range_sigma", cfg.sim.range_sigma},
              {"corrupt_fraction", cfg.sim.corrupt_fraction},
              {"corrupt_lo_sigmas", cfg.sim.corrupt_lo_sigmas},
              {"corrupt_hi_sigmas", cfg.sim.corrupt_hi_sigmas},
              {"anchors", landmarks_to_json(cfg.sim.anchors)},
              {"tags", landmarks_to_json(cfg.sim.tag_offsets)}};
  j["solver"] = {{"max_iterations", cfg.solver.max_iterations},
                 {"tol_step_inf", cfg.solver.tol_step_inf},
                 {"tol_rel_loss", cfg.solver.tol_rel_loss},
                 {"shrink", cfg.solver.shrink},
                 {"max_backtracks", cfg.solver.max_backtracks},
                 {"unary_rule", to_string(cfg.solver.unary_rule)},
                 {"binary_rule", to_string(cfg.solver.binary_rule)},
                 {"warm_start", cfg.solver.warm_start},
                 {"init_stddev", cfg.solver.init_stddev},
                 {"hessian_floor", cfg.solver.hessian_floor},
                 {"loss_slack", cfg.solver.loss_slack}};
  j["map"] = {{"max_iterations", cfg.map.max_iterations},
              {"tol_step_inf", cfg.map.tol_step_inf},
              {"lm_init", cfg.map.lm_init},
              {"lm_grow", cfg.map.lm_grow},
              {"lm_shrink", cfg.map.lm_shrink},
              {"objective_slack", cfg.map.objective_slack}};
  j["noise_fit"] = {{"samples", cfg.noise_fit_samples}, {"gmm_components", cfg.gmm_components}};
  j["noise_models"] = {{"esgvi", cfg.noise_model_esgvi},
                       {"map-c", cfg.noise_model_map_c},
                       {"map-gmm", cfg.noise_model_map_gmm}};
  j["estimator"] = {{"side", to_string(cfg.side)},
                    {"prior_cov", {cfg.prior_cov[0], cfg.prior_cov[1], cfg.prior_cov[2]}}};
  return j;
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw ConfigError("cannot open config " + file.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::uint64_t h = fnv1a(config_to_json(cfg).dump());
  std::array<char, 17> buf{};
  for (int i = 0; i < 16; ++i) buf[15 - i] = "0123456789abcdef"[(h >> (4 * i)) & 0xf];
  return std::string(buf.data(), 16);
}

Provenance provenance_of(const ExperimentConfig& cfg) {
  return {config_hash(cfg), cfg.sim.seed};
}

}  // namespace gvi2d
