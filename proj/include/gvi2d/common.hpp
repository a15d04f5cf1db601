#pragma once

#include <stdexcept>
#include <string>

namespace gvi2d {

/// Which side a tangent-space perturbation composes on: X*exp(xi) (right)
/// or exp(xi)*X (left). The solvers default to right perturbations.
enum class Side { Right, Left };

inline const char* to_string(Side s) { return s == Side::Right ? "right" : "left"; }

struct NotInAlgebra : std::runtime_error {
  explicit NotInAlgebra(const std::string& msg) : std::runtime_error(msg) {}
};

struct CovarianceNotSPD : std::runtime_error {
  explicit CovarianceNotSPD(const std::string& msg) : std::runtime_error(msg) {}
};

struct InfoNotSPD : std::runtime_error {
  InfoNotSPD(const std::string& msg, int block)
      : std::runtime_error(msg + " (block " + std::to_string(block) + ")"), block_index(block) {}
  int block_index;
};

struct LineSearchFailed : std::runtime_error {
  explicit LineSearchFailed(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionTooLarge : std::runtime_error {
  explicit DimensionTooLarge(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateData : std::runtime_error {
  explicit DegenerateData(const std::string& msg) : std::runtime_error(msg) {}
};

struct IndexOutOfRange : std::out_of_range {
  explicit IndexOutOfRange(const std::string& msg) : std::out_of_range(msg) {}
};

struct LengthMismatch : std::invalid_argument {
  explicit LengthMismatch(const std::string& msg) : std::invalid_argument(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyOdometry : DataError {
  explicit EmptyOdometry(const std::string& msg) : DataError(msg) {}
};

struct RangeBeforeFirstPose : DataError {
  explicit RangeBeforeFirstPose(const std::string& msg) : DataError(msg) {}
};

}  // namespace gvi2d
