#pragma once

#include <stdexcept>
#include <string>

namespace vda {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit an operation. The message names the node.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures (missing file, unwritable directory).
class IoError : public Error {
 public:
  using Error::Error;
};

/// A numerical precondition failed (non-positive log argument, non-PSD matrix).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace vda
