#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dnmap {

using Vec3 = Eigen::Vector3d;

/// Mismatched vector or matrix dimensions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A map was requested from an empty point set.
class EmptyMapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or incompatible serialized data (checkpoints, meshes).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text input that failed to parse. Carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Inconsistent input data (e.g. scan/pose count mismatch, empty dataset).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Metric evaluation could not run (e.g. empty mesh).
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dnmap
