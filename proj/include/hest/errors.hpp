#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A 3x3 matrix handed to vee() is not trace-free.
class InvalidAlgebraElement : public Error {
 public:
  using Error::Error;
};

/// Matrix logarithm requested outside its convergence region.
class LogDomainError : public Error {
 public:
  using Error::Error;
};

/// det(x) <= 0, so x cannot be scaled onto SL(3).
class ProjectionError : public Error {
 public:
  using Error::Error;
};

/// Camera pose that places the camera on or across the plane.
class DegeneratePoseError : public Error {
 public:
  using Error::Error;
};

/// Feature whose transferred depth is not positive.
class BehindCameraError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Covariance block that cannot be inverted.
class SingularCovarianceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed input row; carries the file and 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class UnsupportedVersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace hest
