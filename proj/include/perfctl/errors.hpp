#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace perfctl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Requested confidence level needs more calibration samples than provided.
class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class OracleError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Raised when an iterative solver exhausts its budget. Carries the best
/// iterate seen so far (flattened).
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, Eigen::VectorXd best)
      : Error(what), best_(std::move(best)) {}

  const Eigen::VectorXd& best() const noexcept { return best_; }

 private:
  Eigen::VectorXd best_;
};

/// Configuration could not be parsed. `path` is the dotted field path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : Error(path.empty() ? message : path + ": " + message), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace perfctl
