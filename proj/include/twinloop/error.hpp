#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace twinloop {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PlantErrorCode {
  InvalidTimestep,
  TopologyMismatch,
  UnknownActuator,
  ConflictingActions,
  PowerOutOfBounds,
  DuplicateFault,
  InvalidFault,
  InvalidTopology,
  InvalidHorizon,
};

std::string_view to_string(PlantErrorCode code);

class PlantError : public Error {
 public:
  PlantError(PlantErrorCode code, const std::string& detail)
      : Error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  PlantErrorCode code() const noexcept { return code_; }

 private:
  PlantErrorCode code_;
};

/// Configuration problem; `path()` is the dotted key path, e.g. "plant.pump.q_max".
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& detail)
      : Error(path.empty() ? detail : path + ": " + detail), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

enum class BackendErrorKind { Timeout, Protocol, Unparseable };

std::string_view to_string(BackendErrorKind kind);

/// Recoverable agent failure. The control loop turns it into an invalid proposal.
class BackendError : public Error {
 public:
  BackendError(BackendErrorKind kind, const std::string& detail)
      : Error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  BackendErrorKind kind() const noexcept { return kind_; }

 private:
  BackendErrorKind kind_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class TraceMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace twinloop
