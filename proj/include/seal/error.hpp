#pragma once

#include <stdexcept>
#include <string>

namespace seal {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Incompatible operand shapes; the message names the op and both shapes.
struct ShapeError : Error {
  using Error::Error;
};

/// Malformed input file; the message names the line or field.
struct ParseError : Error {
  using Error::Error;
};

struct VersionError : ParseError {
  using ParseError::ParseError;
};

/// Invalid user-supplied configuration (maps to CLI exit code 2).
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace seal
