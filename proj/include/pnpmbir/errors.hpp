#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pnpmbir {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array shapes that do not agree with each other or with a geometry.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument values or enum names supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or out-of-range data values.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Malformed serialized data. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Iterative solver failed to reach its tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double final_residual)
      : Error(what), final_residual_(final_residual) {}

  double final_residual() const noexcept { return final_residual_; }

 private:
  double final_residual_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Pipeline configuration that fails schema or reference checks.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pnpmbir
