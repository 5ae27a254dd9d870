#pragma once

#include <stdexcept>
#include <string>

namespace damrom {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameters violating a domain invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Mesh construction or validation failure.
class MeshError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. The message carries the offending line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what) {}

  int line() const noexcept { return line_; }

 private:
  int line_ = 0;
};

/// Singular systems, NaNs, Picard non-convergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File system and serialization failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace damrom
