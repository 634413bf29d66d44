#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sonine {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the domain of a function (ln of a nonpositive number,
// kernel evaluated at t <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset, std::string expected)
      : Error(message), offset_(offset), expected_(std::move(expected)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t offset_;
  std::string expected_;
};

// Input data violates a documented invariant (exponent outside (0,1), mesh
// not increasing, WSC1 validation failed, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Breakdown inside a solver: singular diagonal, non-finite intermediate,
// eigensolver failure, blow-up.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sonine
