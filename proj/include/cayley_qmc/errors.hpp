#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace cayley_qmc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Site lists that overlap, miss a required site, or name the same site twice.
class SiteError : public Error {
 public:
  using Error::Error;
};

class HermiticityError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range model parameter (beta, alpha, level, order).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Point outside the admissible region x > y >= 0.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Requested volume is too large for the chosen engine.
class FeasibilityError : public Error {
 public:
  using Error::Error;
};

/// Observable support reaches beyond the evaluation volume.
class SupportError : public Error {
 public:
  using Error::Error;
};

/// Malformed observable or vertex text. location() is "byte N" for syntax
/// errors or a JSON pointer for schema errors.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string location)
      : Error(what + " (at " + location + ")"), location_(std::move(location)) {}
  ParseError(const std::string& what, std::size_t byte) : ParseError(what, "byte " + std::to_string(byte)) {}

  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

}  // namespace cayley_qmc
