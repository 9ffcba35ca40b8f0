#ifndef OBSRISK_ERRORS_HPP
#define OBSRISK_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace obsrisk {

enum class ErrorKind {
  kDomain,
  kRange,
  kParse,
  kValidation,
  kNumericFailure,
  kInconsistency,
};

/// Base class of every error raised by the library. The kind drives the CLI
/// exit code mapping.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// A point outside the support, an empty stratum, a violated precondition.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message)
      : Error(ErrorKind::kDomain, message) {}
};

/// A model function evaluated outside [0, 1].
class RangeError : public Error {
 public:
  explicit RangeError(const std::string& message)
      : Error(ErrorKind::kRange, message) {}
};

/// A scenario document or model that fails validation.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorKind::kValidation, message) {}
};

/// Two algebraically equal computations disagreed beyond tolerance.
class InconsistencyError : public Error {
 public:
  explicit InconsistencyError(const std::string& message)
      : Error(ErrorKind::kInconsistency, message) {}
};

/// Expression syntax error. `offset` is a byte offset into the source and is
/// always <= source length.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset,
             std::vector<std::string> expected = {})
      : Error(ErrorKind::kParse, message),
        offset_(offset),
        expected_(std::move(expected)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::vector<std::string>& expected() const noexcept {
    return expected_;
  }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

}  // namespace obsrisk

#endif  // OBSRISK_ERRORS_HPP
