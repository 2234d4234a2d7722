#pragma once

#include <stdexcept>
#include <string>

namespace romni {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid calibration data; the message names the offending field.
struct CalibrationError : Error {
  using Error::Error;
  CalibrationError(const std::string& field, const std::string& why)
      : Error("calibration field '" + field + "': " + why) {}
};

/// A rejected input: wrong shape, non-finite value, unmet precondition.
struct InputError : Error {
  using Error::Error;
};

/// Non-finite values encountered during iterative computation.
struct NumericError : Error {
  using Error::Error;
};

/// File IO failure; the message carries the path.
struct IoError : Error {
  using Error::Error;
  IoError(const std::string& path, const std::string& why) : Error(path + ": " + why) {}
};

/// Bad run configuration (unknown key, unparsable value).
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace romni
