#pragma once

#include <stdexcept>
#include <string>

namespace drokit {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotTwiceDifferentiable : Error {
  using Error::Error;
};

struct NotAbsolutelyContinuous : Error {
  using Error::Error;
};

struct BadRatio : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct BracketFailure : Error {
  using Error::Error;
};

struct MissingConstant : Error {
  explicit MissingConstant(const std::string& field)
      : Error("missing constant: " + field), field_name(field) {}
  std::string field_name;
};

struct UnboundedLoss : Error {
  using Error::Error;
};

struct TraceIncomplete : Error {
  using Error::Error;
};

/// Thrown when an optimizer iterate leaves a loss model's certified working box.
struct IterateOutOfBox : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace drokit
